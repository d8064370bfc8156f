"""TCP/IPv4 encapsulation of MQTT bytes.

Keeps the fields that move together when a PUBLISH grows or shrinks in step:
MQTT remaining length, TCP segment length, sequence number and checksum.
"""

from __future__ import annotations

import enum
import ipaddress
import logging
import random
import struct
from dataclasses import dataclass, replace
from typing import Optional, Union

from fpa_forge.core.mqtt import MAX_REMAINING_LENGTH, decode_remaining_length, encode_remaining_length
from fpa_forge.errors import EncapError, MssExceeded, NotEstablished, RangeError

logger = logging.getLogger(__name__)

MSS = 1460
MQTT_PORT = 1883
TCP_HEADER_LEN = 20
DEFAULT_WINDOW = 64240
SEQ_MODULUS = 2**32
# Remaining length values that fit a two-byte varint.
TWO_BYTE_VARINT_LIMIT = 16_383


class TcpFlags(enum.IntFlag):
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10
    URG = 0x20


@dataclass
class SessionContext:
    """One direction of a TCP session as seen by its sender."""

    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int = MQTT_PORT
    seq: int = 0
    ack: int = 0
    established: bool = False

    @classmethod
    def new(
        cls,
        src_ip: str,
        dst_ip: str,
        src_port: int,
        dst_port: int = MQTT_PORT,
        rng: Optional[random.Random] = None,
    ) -> "SessionContext":
        """Start a session with a fresh initial sequence number."""
        rng = rng or random.Random()
        return cls(src_ip, dst_ip, src_port, dst_port, seq=rng.randrange(SEQ_MODULUS))


@dataclass(frozen=True)
class TcpSegment:
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    seq: int
    ack: int
    flags: TcpFlags
    payload: bytes = b""
    checksum: int = 0
    window: int = DEFAULT_WINDOW

    @property
    def length(self) -> int:
        return len(self.payload)

    def header_bytes(self, checksum: Optional[int] = None) -> bytes:
        return struct.pack(
            "!HHIIBBHHH",
            self.src_port,
            self.dst_port,
            self.seq,
            self.ack,
            (TCP_HEADER_LEN // 4) << 4,
            int(self.flags),
            self.window,
            self.checksum if checksum is None else checksum,
            0,
        )

    def to_bytes(self) -> bytes:
        return self.header_bytes() + self.payload


# ---------------------------------------------------------------------------
# Length relations


def compute_mqtt_len(topic_bytes: int, msgid_present: bool, payload_bytes: int) -> int:
    """Remaining length of a PUBLISH: topic length field, topic, msgid, message."""
    if topic_bytes < 1:
        raise RangeError("a topic needs at least one byte")
    if payload_bytes < 0:
        raise RangeError("payload size cannot be negative")
    length = 2 + topic_bytes + (2 if msgid_present else 0) + payload_bytes
    if length > MAX_REMAINING_LENGTH:
        raise RangeError(f"remaining length {length} exceeds {MAX_REMAINING_LENGTH}")
    return length


def compute_tcp_len(mqtt_len: int, mss: int = MSS, allow_long: bool = False) -> int:
    """TCP segment size carrying one control packet of the given remaining length.

    The fixed header is the type byte plus the remaining-length varint. Without
    ``allow_long`` the varint is capped at two bytes.

    Uses the real varint width, so remaining lengths 128..255 take two length
    bytes (255 -> 258). ``two_branch_tcp_len`` gives the +2/+3 approximation
    (255 -> 257).
    """
    if not 0 <= mqtt_len <= MAX_REMAINING_LENGTH:
        raise RangeError(f"remaining length {mqtt_len} out of range")
    if mqtt_len > TWO_BYTE_VARINT_LIMIT and not allow_long:
        raise MssExceeded(f"remaining length {mqtt_len} needs more than two varint bytes")
    tcp_len = 1 + len(encode_remaining_length(mqtt_len)) + mqtt_len
    if tcp_len > mss:
        raise MssExceeded(f"segment of {tcp_len} bytes exceeds MSS {mss}")
    return tcp_len


def two_branch_tcp_len(mqtt_len: int) -> int:
    """Segment size under the ``+2 up to 255, +3 above`` rule of thumb.

    Disagrees with the wire format for remaining lengths 128..255, whose varint
    already takes two bytes.
    """
    return mqtt_len + 2 if mqtt_len <= 255 else mqtt_len + 3


def max_padding_budget(
    topic_bytes: int,
    msgid_present: bool,
    base_payload_bytes: int,
    mss: int = MSS,
    allow_long: bool = False,
) -> int:
    """Largest number of bytes that can be appended to the payload within MSS.

    Without ``allow_long`` the padded remaining length stays within a two-byte varint.
    """
    base = compute_mqtt_len(topic_bytes, msgid_present, base_payload_bytes)
    compute_tcp_len(base, mss, allow_long)  # raises when the base alone overflows
    budget = mss - 1 - len(encode_remaining_length(base)) - base
    if not allow_long:
        budget = min(budget, TWO_BYTE_VARINT_LIMIT - base)
    while budget > 0:
        try:
            compute_tcp_len(base + budget, mss, allow_long)
            break
        except MssExceeded:
            budget -= 1
    return max(budget, 0)


# ---------------------------------------------------------------------------
# Sequence numbers and checksum


def next_seq(prev_seq: int, prev_len: int) -> int:
    return (prev_seq + prev_len) % SEQ_MODULUS


def _ones_complement_sum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def _pseudo_header(src_ip: str, dst_ip: str, tcp_length: int) -> bytes:
    return (
        ipaddress.IPv4Address(src_ip).packed
        + ipaddress.IPv4Address(dst_ip).packed
        + struct.pack("!BBH", 0, 6, tcp_length)
    )


def internet_checksum(data: bytes) -> int:
    """One's complement of the one's complement sum, odd lengths zero padded."""
    return ~_ones_complement_sum(data) & 0xFFFF


def tcp_checksum(ctx: Union[SessionContext, TcpSegment], segment_bytes: bytes) -> int:
    """Internet checksum over the IPv4 pseudo-header and the TCP segment.

    ``segment_bytes`` must carry a zeroed checksum field.
    """
    return internet_checksum(_pseudo_header(ctx.src_ip, ctx.dst_ip, len(segment_bytes)) + segment_bytes)


def verify_checksum(segment: TcpSegment) -> bool:
    """Receiver-side check: the sum including the stored checksum is all ones."""
    data = segment.to_bytes()
    return _ones_complement_sum(_pseudo_header(segment.src_ip, segment.dst_ip, len(data)) + data) == 0xFFFF


# ---------------------------------------------------------------------------
# Emission


def emit(ctx: SessionContext, flags: TcpFlags, payload: bytes = b"") -> TcpSegment:
    """Build the next segment of ctx's direction and advance its sequence number."""
    segment = TcpSegment(
        src_ip=ctx.src_ip,
        dst_ip=ctx.dst_ip,
        src_port=ctx.src_port,
        dst_port=ctx.dst_port,
        seq=ctx.seq,
        ack=ctx.ack if flags & TcpFlags.ACK else 0,
        flags=flags,
        payload=bytes(payload),
    )
    segment = replace(segment, checksum=tcp_checksum(segment, segment.header_bytes(checksum=0) + segment.payload))
    consumed = len(payload) + (1 if flags & (TcpFlags.SYN | TcpFlags.FIN) else 0)
    ctx.seq = next_seq(ctx.seq, consumed)
    logger.debug(
        "%s:%d -> %s:%d flags=%s seq=%d len=%d",
        ctx.src_ip, ctx.src_port, ctx.dst_ip, ctx.dst_port, flags, segment.seq, len(payload),
    )
    return segment


def receive(ctx: SessionContext, segment: TcpSegment) -> None:
    """Acknowledge everything the peer sent in segment."""
    consumed = segment.length + (1 if segment.flags & (TcpFlags.SYN | TcpFlags.FIN) else 0)
    ctx.ack = next_seq(segment.seq, consumed)


def wrap_mqtt(
    ctx: SessionContext,
    mqtt_bytes: bytes,
    mss: int = MSS,
    allow_long: bool = False,
) -> TcpSegment:
    """Carry one encoded control packet in a PSH/ACK segment."""
    if not ctx.established:
        raise NotEstablished(f"session {ctx.src_ip}:{ctx.src_port} has not completed its handshake")
    remaining, _ = decode_remaining_length(mqtt_bytes[1:5])
    expected = compute_tcp_len(remaining, mss=mss, allow_long=allow_long)
    if len(mqtt_bytes) != expected:
        raise EncapError(f"{len(mqtt_bytes)} bytes do not match remaining length {remaining}")
    return emit(ctx, TcpFlags.PSH | TcpFlags.ACK, mqtt_bytes)
