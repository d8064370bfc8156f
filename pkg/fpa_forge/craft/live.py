"""Send a crafted campaign to a real broker over plain TCP.

The kernel owns the real TCP session, so the capture is rebuilt from the
bytes exchanged on the socket with wall-clock timestamps.
"""

from __future__ import annotations

import logging
import socket
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from fpa_forge.core.capture import CaptureFrame, frame_packet, write_pcap
from fpa_forge.core.mqtt import MqttPacket, PacketType, build_disconnect, encode_packet, read_packet
from fpa_forge.core.tcp import MQTT_PORT, SessionContext, TcpFlags, emit, receive
from fpa_forge.craft.campaign import CraftSpec, Direction, generate_session
from fpa_forge.errors import ConnackNonZero, ConnectRefused, Incomplete, PubackTimeout, TlsPortRejected

logger = logging.getLogger(__name__)

TLS_PORT = 8883
PUBLIC_BROKERS = {
    "mosquitto": "test.mosquitto.org",
    "hivemq": "broker.hivemq.com",
}


@dataclass(frozen=True)
class LiveEndpoint:
    host: str
    port: int = MQTT_PORT
    timeout: float = 5.0

    def __post_init__(self) -> None:
        if self.port == TLS_PORT:
            raise TlsPortRejected("port 8883 carries MQTT over TLS, which is not supported")

    @classmethod
    def public(cls, name: str, opt_in: bool, timeout: float = 5.0) -> "LiveEndpoint":
        """Endpoint for a named public test broker; requires an explicit opt-in."""
        if not opt_in:
            raise ConnectRefused(f"public broker {name!r} requires an explicit opt-in")
        try:
            host = PUBLIC_BROKERS[name]
        except KeyError:
            raise ConnectRefused(f"unknown public broker {name!r}") from None
        return cls(host, MQTT_PORT, timeout)


class _Recorder:
    """Mirror the socket exchange as TCP segments for the capture file."""

    def __init__(self, local: Tuple[str, int], remote: Tuple[str, int]) -> None:
        self.client = SessionContext(local[0], remote[0], local[1], remote[1])
        self.broker = SessionContext(remote[0], local[0], remote[1], local[1])
        self.frames: List[CaptureFrame] = []
        self._record(self.client, self.broker, TcpFlags.SYN)
        self._record(self.broker, self.client, TcpFlags.SYN | TcpFlags.ACK)
        self._record(self.client, self.broker, TcpFlags.ACK)

    def _record(self, sender: SessionContext, receiver: SessionContext, flags: TcpFlags, data: bytes = b"") -> None:
        seg = emit(sender, flags, data)
        receive(receiver, seg)
        self.frames.append(frame_packet(seg, time.time(), ip_id=len(self.frames)))

    def sent(self, data: bytes) -> None:
        self._record(self.client, self.broker, TcpFlags.PSH | TcpFlags.ACK, data)

    def received(self, data: bytes) -> None:
        self._record(self.broker, self.client, TcpFlags.PSH | TcpFlags.ACK, data)


class _Connection:
    def __init__(self, sock: socket.socket, recorder: _Recorder) -> None:
        self.sock = sock
        self.recorder = recorder
        self.buffer = b""

    def send(self, data: bytes) -> None:
        self.sock.sendall(data)
        self.recorder.sent(data)

    def next_packet(self, deadline: float) -> Optional[MqttPacket]:
        """Next broker packet, or None on timeout or connection close."""
        while True:
            try:
                packet, used = read_packet(self.buffer)
                self.buffer = self.buffer[used:]
                return packet
            except Incomplete:
                pass
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            self.sock.settimeout(remaining)
            try:
                chunk = self.sock.recv(4096)
            except socket.timeout:
                return None
            except OSError as exc:
                logger.warning("Connection error while waiting for broker: %s", exc)
                return None
            if not chunk:
                return None
            self.recorder.received(chunk)
            self.buffer += chunk


def live_send(
    spec: CraftSpec,
    endpoint: LiveEndpoint,
    seed: int = 0,
    capture_path: Optional[Union[str, Path]] = None,
) -> Dict[str, object]:
    """Run the campaign against a broker and verify every QoS 1 PUBLISH is acknowledged."""
    spec = replace(spec, client=replace(spec.client, keep_alive=0))
    outgoing = [
        seg.payload
        for direction, seg in generate_session(spec, seed)
        if direction == Direction.CLIENT_TO_BROKER and seg.payload
    ]
    connect_bytes, publishes = outgoing[0], outgoing[1:]

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.settimeout(endpoint.timeout)
    try:
        address = socket.getaddrinfo(endpoint.host, endpoint.port, socket.AF_INET, socket.SOCK_STREAM)[0][4]
        sock.connect(address)
    except OSError as exc:
        sock.close()
        raise ConnectRefused(f"cannot reach {endpoint.host}:{endpoint.port}: {exc}") from exc

    recorder = _Recorder(sock.getsockname()[:2], sock.getpeername()[:2])
    conn = _Connection(sock, recorder)
    started = time.time()
    sent_count = puback_count = 0
    try:
        conn.send(connect_bytes)
        sent_count += 1
        connack = conn.next_packet(time.monotonic() + endpoint.timeout)
        if connack is None or connack.packet_type != PacketType.CONNACK:
            raise ConnectRefused(f"{endpoint.host}:{endpoint.port} did not answer CONNECT with CONNACK")
        if connack.return_code != 0:
            raise ConnackNonZero(connack.return_code)
        logger.info("Connected to %s:%d", endpoint.host, endpoint.port)

        for data in publishes:
            publish, _ = read_packet(data)
            conn.send(data)
            sent_count += 1
            if publish.qos == 0:
                continue
            deadline = time.monotonic() + endpoint.timeout
            while True:
                reply = conn.next_packet(deadline)
                if reply is None:
                    raise PubackTimeout(publish.msgid)
                if reply.packet_type == PacketType.PUBACK and reply.msgid == publish.msgid:
                    puback_count += 1
                    break
                logger.debug("Ignoring %s while waiting for PUBACK %d", reply.packet_type.name, publish.msgid)
        conn.send(encode_packet(build_disconnect()))
    finally:
        sock.close()
        if capture_path is not None:
            write_pcap(recorder.frames, capture_path)

    logger.info("Sent %d packets, %d PUBACKs received", sent_count, puback_count)
    return {
        "connack_rc": 0,
        "puback_count": puback_count,
        "sent_count": sent_count,
        "capture_path": str(capture_path) if capture_path is not None else None,
        "stats": {"time_ms": (time.time() - started) * 1000.0},
    }
