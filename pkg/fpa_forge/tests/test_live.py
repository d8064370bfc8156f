"""
Tests for sending campaigns to a live broker.
An in-process fake broker on localhost stands in for Mosquitto; set
FPA_FORGE_BROKER=host[:port] to also run against a real broker.
"""

import os
import socket
import threading

import pytest

from fpa_forge.core.capture import read_pcap
from fpa_forge.core.mqtt import PacketType, build_connack, build_puback, encode_packet, split_packets
from fpa_forge.craft.campaign import CraftSpec
from fpa_forge.craft.live import LiveEndpoint, live_send
from fpa_forge.errors import ConnackNonZero, ConnectRefused, PubackTimeout, TlsPortRejected


class FakeBroker:
    """Single-connection broker answering CONNECT and QoS 1 PUBLISH."""

    def __init__(self, connack_rc=0, ack_publishes=True):
        self.connack_rc = connack_rc
        self.ack_publishes = ack_publishes
        self.received = []
        self.server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.server.bind(("127.0.0.1", 0))
        self.server.listen(1)
        self.port = self.server.getsockname()[1]
        self.thread = threading.Thread(target=self._serve, daemon=True)
        self.thread.start()

    def _serve(self):
        conn, _ = self.server.accept()
        buffer = b""
        with conn:
            while True:
                chunk = conn.recv(4096)
                if not chunk:
                    return
                packets, buffer = split_packets(buffer + chunk)
                for pkt in packets:
                    self.received.append(pkt)
                    if pkt.packet_type == PacketType.CONNECT:
                        conn.sendall(encode_packet(build_connack(self.connack_rc)))
                    elif pkt.packet_type == PacketType.PUBLISH and pkt.qos == 1 and self.ack_publishes:
                        conn.sendall(encode_packet(build_puback(pkt.msgid)))
                    elif pkt.packet_type == PacketType.DISCONNECT:
                        return

    def close(self):
        self.server.close()
        self.thread.join(timeout=2)


@pytest.fixture
def broker():
    instances = []

    def start(**kwargs):
        instance = FakeBroker(**kwargs)
        instances.append(instance)
        return instance

    yield start
    for instance in instances:
        instance.close()


class TestEndpoint:
    """Test suite for LiveEndpoint."""

    def test_tls_port_rejected(self):
        """Test that port 8883 is refused."""
        with pytest.raises(TlsPortRejected):
            LiveEndpoint("localhost", 8883)

    def test_public_needs_opt_in(self):
        """Test that public brokers are never used implicitly."""
        with pytest.raises(ConnectRefused):
            LiveEndpoint.public("mosquitto", opt_in=False)
        assert LiveEndpoint.public("hivemq", opt_in=True).host == "broker.hivemq.com"

    def test_unknown_public(self):
        """Test an unknown public broker name."""
        with pytest.raises(ConnectRefused):
            LiveEndpoint.public("nowhere", opt_in=True)


class TestLiveSend:
    """Test suite for live_send against the fake broker."""

    def test_compliant_campaign(self, broker, tmp_path):
        """Test CONNACK 0 and one PUBACK per QoS 1 PUBLISH."""
        fake = broker()
        capture = tmp_path / "live.pcap"
        report = live_send(CraftSpec(publish_count=5), LiveEndpoint("127.0.0.1", fake.port, 2.0), seed=1, capture_path=capture)
        assert report["connack_rc"] == 0
        assert report["puback_count"] == 5
        assert report["sent_count"] == 6
        assert capture.exists()
        # handshake, 6 sent packets plus DISCONNECT, and at least one received chunk
        assert len(read_pcap(capture)) >= 3 + 7 + 1

    def test_connect_first_with_zero_keep_alive(self, broker):
        """Test that CONNECT is sent first with keep alive forced to 0."""
        fake = broker()
        spec = CraftSpec(publish_count=1)
        live_send(spec, LiveEndpoint("127.0.0.1", fake.port, 2.0))
        fake.thread.join(timeout=2)
        assert fake.received[0].packet_type == PacketType.CONNECT
        assert fake.received[0].keep_alive == 0
        assert fake.received[-1].packet_type == PacketType.DISCONNECT

    def test_qos0_needs_no_puback(self, broker):
        """Test that QoS 0 publishes complete without acknowledgements."""
        fake = broker(ack_publishes=False)
        report = live_send(CraftSpec(publish_count=3, qos_mix={0: 1.0}), LiveEndpoint("127.0.0.1", fake.port, 1.0))
        assert report["puback_count"] == 0
        assert report["sent_count"] == 4

    def test_silent_drop(self, broker):
        """Test that a broker dropping a publish yields PubackTimeout."""
        fake = broker(ack_publishes=False)
        with pytest.raises(PubackTimeout) as info:
            live_send(CraftSpec(publish_count=2), LiveEndpoint("127.0.0.1", fake.port, 0.5))
        assert info.value.msgid == 1

    def test_refused_connection(self, broker):
        """Test a non-zero CONNACK return code."""
        fake = broker(connack_rc=5)
        with pytest.raises(ConnackNonZero) as info:
            live_send(CraftSpec(publish_count=1), LiveEndpoint("127.0.0.1", fake.port, 1.0))
        assert info.value.rc == 5

    def test_unreachable(self):
        """Test that a closed port raises ConnectRefused."""
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()
        with pytest.raises(ConnectRefused):
            live_send(CraftSpec(publish_count=1), LiveEndpoint("127.0.0.1", port, 1.0))


@pytest.mark.skipif("FPA_FORGE_BROKER" not in os.environ, reason="set FPA_FORGE_BROKER=host[:port] for a real broker")
class TestRealBroker:
    """Interop against a real broker with ACL 'topic readwrite Building1/Floor3/+'."""

    def endpoint(self):
        host, _, port = os.environ["FPA_FORGE_BROKER"].partition(":")
        return LiveEndpoint(host, int(port or 1883), 5.0)

    def test_pubacks(self):
        """Test one PUBACK per QoS 1 PUBLISH."""
        report = live_send(CraftSpec(publish_count=5), self.endpoint(), seed=3)
        assert report["puback_count"] == 5
