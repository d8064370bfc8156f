"""Attack campaign generation.

A campaign is one MQTT session: TCP handshake, CONNECT, CONNACK and a series
of whitespace-padded PUBLISH packets. Broker-side segments are synthesized so
the capture looks like the bidirectional traffic a NIDS sensor observes.
"""

from __future__ import annotations

import enum
import logging
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from fpa_forge.core.capture import CaptureFrame, frame_packet
from fpa_forge.core.mqtt import (
    ConnectOptions,
    PacketType,
    PublishOptions,
    build_connack,
    build_connect,
    build_puback,
    build_publish,
    encode_packet,
    read_packet,
)
from fpa_forge.core.tcp import (
    MQTT_PORT,
    MSS,
    SessionContext,
    TcpFlags,
    TcpSegment,
    emit,
    max_padding_budget,
    receive,
    two_branch_tcp_len,
    wrap_mqtt,
)
from fpa_forge.craft.topics import (
    PAD_CHAR,
    AclRule,
    Permission,
    acl_match,
    pad_topic,
    random_topic_from_tokens,
)
from fpa_forge.errors import AclViolation, BudgetExceeded, CraftError

logger = logging.getLogger(__name__)

PAD_BYTE = b"\x20"
DEFAULT_GAP_MS = 1.0


class Direction(str, enum.Enum):
    CLIENT_TO_BROKER = "c2s"
    BROKER_TO_CLIENT = "s2c"


@dataclass(frozen=True)
class TokenTopics:
    pool: Tuple[str, ...]
    levels: int = 1
    prefix: Optional[str] = None


@dataclass(frozen=True)
class CraftSpec:
    """Declarative description of one attack campaign."""

    base_topic: str = "Building1/Floor3/Sensor1"
    base_payload: bytes = b"27.5C 61%"
    topic_pad_range: Tuple[int, int] = (0, 3)
    payload_pad_counts: Tuple[int, ...] = (0,)
    qos_mix: Mapping[int, float] = field(default_factory=lambda: {1: 1.0})
    retain_mix: Mapping[int, float] = field(default_factory=lambda: {0: 1.0})
    publish_count: int = 10
    acl_rule: AclRule = AclRule(Permission.READWRITE, "Building1/Floor3/+")
    mss: int = MSS
    allow_long: bool = False
    gap_ms: float = DEFAULT_GAP_MS
    client: ConnectOptions = ConnectOptions(client_id="sensor-01", clean_session=1)
    src_ip: str = "192.168.0.20"
    dst_ip: str = "192.168.0.10"
    src_port: int = 50000
    dst_port: int = MQTT_PORT
    topics: Tuple[str, ...] = ()
    token_topics: Optional[TokenTopics] = None

    def base_topics(self) -> Tuple[str, ...]:
        return self.topics or (self.base_topic,)

    def validate(self) -> None:
        """Check the campaign before any packet is built."""
        lo, hi = self.topic_pad_range
        if not 0 <= lo <= hi:
            raise CraftError(f"invalid topic pad range {self.topic_pad_range}")
        if self.publish_count < 0:
            raise CraftError("publish_count cannot be negative")
        if not self.payload_pad_counts or min(self.payload_pad_counts) < 0:
            raise CraftError("payload_pad_counts must be non-empty and non-negative")
        if self.base_payload.endswith(PAD_BYTE):
            raise CraftError("base payload must not end with a space")
        for name, mix in (("qos_mix", self.qos_mix), ("retain_mix", self.retain_mix)):
            if not mix or set(mix) - {0, 1} or sum(mix.values()) <= 0 or min(mix.values()) < 0:
                raise CraftError(f"{name} must weight values in {{0, 1}}")
        if self.publish_count and not self.acl_rule.permission.allows_publish:
            raise AclViolation(f"ACL permission {self.acl_rule.permission.value} does not allow publishing")
        if self.token_topics is None:
            for base in self.base_topics():
                if base.endswith(PAD_CHAR):
                    raise CraftError(f"base topic {base!r} must not end with a space")
                pad_topic(base, hi)
                if not acl_match(self.acl_rule, base):
                    raise AclViolation(f"topic {base!r} does not match {self.acl_rule.pattern!r}")
            # Largest topic and msgid leave the smallest budget.
            longest = max(len(pad_topic(b, hi).encode("utf-8")) for b in self.base_topics())
            budget = max_padding_budget(
                longest, self.qos_mix.get(1, 0) > 0, len(self.base_payload), self.mss, self.allow_long
            )
            if max(self.payload_pad_counts) > budget:
                raise BudgetExceeded(
                    f"payload pad count {max(self.payload_pad_counts)} exceeds budget {budget}"
                )


def pad_payload(base: bytes, n_spaces: int, budget: int) -> bytes:
    """Append n_spaces 0x20 bytes after the sensor reading."""
    if n_spaces < 0:
        raise CraftError("pad count cannot be negative")
    if n_spaces > budget:
        raise BudgetExceeded(f"{n_spaces} padding bytes exceed the budget of {budget}")
    return bytes(base) + PAD_BYTE * n_spaces


def _draw(mix: Mapping[int, float], rng: random.Random) -> int:
    values = sorted(mix)
    return rng.choices(values, weights=[mix[v] for v in values])[0]


def _next_topic(spec: CraftSpec, index: int, rng: random.Random) -> Tuple[str, str]:
    """Return (base, padded) topic for the index-th publish."""
    if spec.token_topics is not None:
        prefix = spec.token_topics.prefix
        if prefix is None:
            prefix = spec.acl_rule.prefix or None
        base = random_topic_from_tokens(spec.token_topics.pool, spec.token_topics.levels, rng, prefix)
    else:
        topics = spec.base_topics()
        base = topics[index % len(topics)]
    padded = pad_topic(base, rng.randint(*spec.topic_pad_range))
    if not acl_match(spec.acl_rule, padded):
        raise AclViolation(f"topic {padded!r} does not match {spec.acl_rule.pattern!r}")
    return base, padded


def generate_session(spec: CraftSpec, seed: int = 0) -> List[Tuple[Direction, TcpSegment]]:
    """Build the full ordered segment list of one campaign session."""
    spec.validate()
    rng = random.Random(seed)
    client = SessionContext.new(spec.src_ip, spec.dst_ip, spec.src_port, spec.dst_port, rng=rng)
    broker = SessionContext.new(spec.dst_ip, spec.src_ip, spec.dst_port, spec.src_port, rng=rng)
    out: List[Tuple[Direction, TcpSegment]] = []

    def deliver(receiver: SessionContext, direction: Direction, seg: TcpSegment) -> None:
        receive(receiver, seg)
        out.append((direction, seg))

    c2s, s2c = Direction.CLIENT_TO_BROKER, Direction.BROKER_TO_CLIENT
    deliver(broker, c2s, emit(client, TcpFlags.SYN))
    deliver(client, s2c, emit(broker, TcpFlags.SYN | TcpFlags.ACK))
    deliver(broker, c2s, emit(client, TcpFlags.ACK))
    client.established = broker.established = True

    deliver(broker, c2s, wrap_mqtt(client, encode_packet(build_connect(spec.client)), spec.mss))
    deliver(client, s2c, wrap_mqtt(broker, encode_packet(build_connack(0)), spec.mss))

    msgid = 0
    for index in range(spec.publish_count):
        _, topic = _next_topic(spec, index, rng)
        qos = _draw(spec.qos_mix, rng)
        retain = _draw(spec.retain_mix, rng)
        if qos:
            msgid = msgid % 0xFFFF + 1
        budget = max_padding_budget(
            len(topic.encode("utf-8")), bool(qos), len(spec.base_payload), spec.mss, spec.allow_long
        )
        payload = pad_payload(spec.base_payload, rng.choice(spec.payload_pad_counts), budget)
        publish = build_publish(
            PublishOptions(topic=topic, payload=payload, qos=qos, retain=retain, msgid=msgid if qos else None)
        )
        deliver(broker, c2s, wrap_mqtt(client, encode_packet(publish), spec.mss, spec.allow_long))
        deliver(client, s2c, emit(broker, TcpFlags.ACK))
        if qos:
            deliver(client, s2c, wrap_mqtt(broker, encode_packet(build_puback(msgid)), spec.mss))

    logger.info("Generated session of %d segments (%d publishes, seed %d)", len(out), spec.publish_count, seed)
    return out


def session_frames(
    segments: Sequence[Tuple[Direction, TcpSegment]],
    start: float = 0.0,
    gap_ms: float = DEFAULT_GAP_MS,
) -> List[CaptureFrame]:
    """Frame every segment with a fixed inter-packet gap."""
    frames = []
    for i, (_, seg) in enumerate(segments):
        # integer microseconds so timestamps do not drift with float sums
        usec = int(round(start * 1_000_000)) + int(round(i * gap_ms * 1000))
        frames.append(frame_packet(seg, (usec // 1_000_000, usec % 1_000_000), ip_id=i))
    return frames


def summarize_session(segments: Sequence[Tuple[Direction, TcpSegment]]) -> Dict[str, object]:
    """Counts of the control packets and padding carried by a session."""
    types: Counter = Counter()
    qos: Counter = Counter()
    topic_pads: List[int] = []
    payload_pads: List[int] = []
    two_branch_mismatches = 0
    for _, seg in segments:
        if not seg.payload:
            continue
        pkt, _ = read_packet(seg.payload)
        types[pkt.packet_type.name] += 1
        if pkt.packet_type != PacketType.PUBLISH:
            continue
        qos[pkt.qos] += 1
        topic = pkt.topic or ""
        topic_pads.append(len(topic) - len(topic.rstrip(PAD_CHAR)))
        payload_pads.append(len(pkt.payload) - len(pkt.payload.rstrip(PAD_BYTE)))
        if two_branch_tcp_len(pkt.remaining_length) != seg.length:
            two_branch_mismatches += 1
    return {
        "segments": len(segments),
        "packet_types": dict(types),
        "publish_by_qos": {str(k): v for k, v in sorted(qos.items())},
        "topic_padding_total": sum(topic_pads),
        "payload_padding_total": sum(payload_pads),
        "max_payload_padding": max(payload_pads, default=0),
        "two_branch_mismatches": two_branch_mismatches,
    }


def craft_campaign(spec: CraftSpec, seed: int = 0, start: float = 0.0) -> Dict[str, object]:
    """Generate, frame and summarize one campaign."""
    started = time.time()
    segments = generate_session(spec, seed)
    frames = session_frames(segments, start=start, gap_ms=spec.gap_ms)
    elapsed_ms = (time.time() - started) * 1000.0

    import os

    import psutil

    process = psutil.Process(os.getpid())
    memory_usage_mb = process.memory_info().rss / 1024 / 1024

    return {
        "segments": segments,
        "frames": frames,
        "summary": summarize_session(segments),
        "stats": {
            "time_ms": elapsed_ms,
            "memory_usage_mb": memory_usage_mb,
            "seed": seed,
        },
    }
