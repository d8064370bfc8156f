"""MQTT v3.1.1 control packet codec.

Only the packets a publishing client and its broker exchange during a
campaign are constructible (CONNECT, CONNACK, PUBLISH, PUBACK, PINGREQ,
DISCONNECT).
Every control packet type is decodable so captures and broker replies can be
parsed.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

from fpa_forge.errors import (
    Empty,
    EncodeError,
    Incomplete,
    LeadingDollar,
    MalformedLength,
    ProtocolViolation,
    RangeError,
    TooLong,
    TopicError,
    UnknownType,
    UnsupportedQoS,
    WildcardInTopic,
)

MAX_REMAINING_LENGTH = 268_435_455
MAX_STRING_BYTES = 65_535
PROTOCOL_NAME = b"MQTT"
PROTOCOL_LEVEL = 0x04

# Connect flag bits, bit 7 to bit 0.
USERNAME_FLAG = 0x80
PASSWORD_FLAG = 0x40
WILL_RETAIN = 0x20
WILL_QOS_SHIFT = 3
WILL_FLAG = 0x04
CLEAN_SESSION = 0x02
RESERVED = 0x01


class PacketType(enum.IntEnum):
    CONNECT = 1
    CONNACK = 2
    PUBLISH = 3
    PUBACK = 4
    PUBREC = 5
    PUBREL = 6
    PUBCOMP = 7
    SUBSCRIBE = 8
    SUBACK = 9
    UNSUBSCRIBE = 10
    UNSUBACK = 11
    PINGREQ = 12
    PINGRESP = 13
    DISCONNECT = 14


# Packets whose variable header is exactly a 2-byte packet identifier.
_MSGID_ONLY = {
    PacketType.PUBACK,
    PacketType.PUBREC,
    PacketType.PUBREL,
    PacketType.PUBCOMP,
    PacketType.UNSUBACK,
    PacketType.SUBSCRIBE,
    PacketType.SUBACK,
    PacketType.UNSUBSCRIBE,
}


@dataclass(frozen=True)
class MqttPacket:
    """A control packet split into fixed header, variable header and payload."""

    packet_type: PacketType
    header_flags: int
    remaining_length: int
    variable_header: bytes = b""
    payload: bytes = b""

    @property
    def qos(self) -> int:
        if self.packet_type != PacketType.PUBLISH:
            return 0
        return (self.header_flags >> 1) & 0x03

    @property
    def retain(self) -> int:
        return self.header_flags & 0x01 if self.packet_type == PacketType.PUBLISH else 0

    @property
    def dup(self) -> int:
        if self.packet_type != PacketType.PUBLISH:
            return 0
        return (self.header_flags >> 3) & 0x01

    @property
    def topic_bytes(self) -> Optional[bytes]:
        if self.packet_type != PacketType.PUBLISH:
            return None
        (length,) = struct.unpack_from("!H", self.variable_header, 0)
        return self.variable_header[2 : 2 + length]

    @property
    def topic(self) -> Optional[str]:
        raw = self.topic_bytes
        return None if raw is None else raw.decode("utf-8")

    @property
    def msgid(self) -> Optional[int]:
        if self.packet_type == PacketType.PUBLISH:
            if self.qos == 0:
                return None
            (value,) = struct.unpack_from("!H", self.variable_header, len(self.variable_header) - 2)
            return value
        if self.packet_type in _MSGID_ONLY:
            (value,) = struct.unpack_from("!H", self.variable_header, 0)
            return value
        return None

    @property
    def return_code(self) -> Optional[int]:
        if self.packet_type != PacketType.CONNACK:
            return None
        return self.variable_header[1]

    @property
    def connack_flags(self) -> Optional[int]:
        if self.packet_type != PacketType.CONNACK:
            return None
        return self.variable_header[0]

    @property
    def protocol_name(self) -> Optional[str]:
        if self.packet_type != PacketType.CONNECT:
            return None
        (length,) = struct.unpack_from("!H", self.variable_header, 0)
        return self.variable_header[2 : 2 + length].decode("utf-8")

    @property
    def protocol_level(self) -> Optional[int]:
        if self.packet_type != PacketType.CONNECT:
            return None
        return self.variable_header[-4]

    @property
    def connect_flags(self) -> Optional[int]:
        if self.packet_type != PacketType.CONNECT:
            return None
        return self.variable_header[-3]

    @property
    def keep_alive(self) -> Optional[int]:
        if self.packet_type != PacketType.CONNECT:
            return None
        (value,) = struct.unpack_from("!H", self.variable_header, len(self.variable_header) - 2)
        return value


@dataclass(frozen=True)
class ConnectOptions:
    client_id: str = ""
    username_flag: int = 0
    password_flag: int = 0
    will_retain: int = 0
    will_qos: int = 0
    will_flag: int = 0
    clean_session: int = 0
    keep_alive: int = 0
    username: str = ""
    password: bytes = b""
    will_topic: str = ""
    will_message: bytes = b""
    # Only ever non-zero when a test forces an invalid request.
    reserved: int = 0

    @property
    def flags_byte(self) -> int:
        return (
            (USERNAME_FLAG if self.username_flag else 0)
            | (PASSWORD_FLAG if self.password_flag else 0)
            | (WILL_RETAIN if self.will_retain else 0)
            | ((self.will_qos & 0x03) << WILL_QOS_SHIFT)
            | (WILL_FLAG if self.will_flag else 0)
            | (CLEAN_SESSION if self.clean_session else 0)
            | (RESERVED if self.reserved else 0)
        )


@dataclass(frozen=True)
class PublishOptions:
    topic: str
    payload: bytes = b""
    qos: int = 0
    retain: int = 0
    dup: int = 0
    msgid: Optional[int] = None


# ---------------------------------------------------------------------------
# Remaining length varint


def encode_remaining_length(length: int) -> bytes:
    """Base-128 varint used by the fixed header (1 to 4 bytes)."""
    if not 0 <= length <= MAX_REMAINING_LENGTH:
        raise RangeError(f"remaining length {length} outside 0..{MAX_REMAINING_LENGTH}")
    out = bytearray()
    while True:
        digit = length % 128
        length //= 128
        if length > 0:
            digit |= 0x80
        out.append(digit)
        if length == 0:
            return bytes(out)


def decode_remaining_length(data: Union[bytes, bytearray, List[int]]) -> Tuple[int, int]:
    """Return ``(length, bytes_consumed)`` for the varint at the start of data."""
    value = 0
    multiplier = 1
    for index in range(4):
        if index >= len(data):
            raise Incomplete("remaining length field is cut short")
        digit = data[index]
        value += (digit & 0x7F) * multiplier
        if not digit & 0x80:
            return value, index + 1
        multiplier *= 128
    raise MalformedLength("remaining length exceeds four bytes")


# ---------------------------------------------------------------------------
# Strings and topics


def _pack_string(value: Union[str, bytes]) -> bytes:
    raw = value.encode("utf-8") if isinstance(value, str) else bytes(value)
    if len(raw) > MAX_STRING_BYTES:
        raise TooLong(f"string of {len(raw)} bytes exceeds {MAX_STRING_BYTES}")
    return struct.pack("!H", len(raw)) + raw


def _encode_utf8(value: str) -> bytes:
    try:
        raw = value.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise TopicError(f"not encodable as UTF-8: {exc.reason}") from exc
    if b"\x00" in raw:
        raise TopicError("UTF-8 strings must not contain U+0000")
    return raw


def validate_topic(topic: Union[str, bytes]) -> bytes:
    """Check a PUBLISH topic name and return its UTF-8 encoding."""
    if isinstance(topic, (bytes, bytearray)):
        try:
            topic = bytes(topic).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TopicError("topic is not valid UTF-8") from exc
    if not topic:
        raise Empty("topic name must contain at least one character")
    raw = _encode_utf8(topic)
    if len(raw) > MAX_STRING_BYTES:
        raise TooLong(f"topic encodes to {len(raw)} bytes")
    if "+" in topic or "#" in topic:
        raise WildcardInTopic(f"topic {topic!r} contains a wildcard")
    if topic.startswith("$"):
        raise LeadingDollar(f"topic {topic!r} starts with '$'")
    return raw


# ---------------------------------------------------------------------------
# Builders


def _packet(packet_type: PacketType, flags: int, variable_header: bytes, payload: bytes) -> MqttPacket:
    remaining = len(variable_header) + len(payload)
    if remaining > MAX_REMAINING_LENGTH:
        raise RangeError(f"packet body of {remaining} bytes is too large")
    return MqttPacket(
        packet_type=packet_type,
        header_flags=(int(packet_type) << 4) | flags,
        remaining_length=remaining,
        variable_header=variable_header,
        payload=payload,
    )


def build_connect(opts: ConnectOptions) -> MqttPacket:
    if opts.reserved:
        raise ProtocolViolation("reserved connect flag must be zero")
    if opts.will_qos not in (0, 1, 2):
        raise ProtocolViolation(f"will QoS {opts.will_qos} is invalid")
    if not opts.will_flag and (opts.will_qos or opts.will_retain):
        raise ProtocolViolation("will QoS and retain require the will flag")
    if opts.password_flag and not opts.username_flag:
        raise ProtocolViolation("password flag requires the user name flag")
    if not 0 <= opts.keep_alive <= 0xFFFF:
        raise RangeError(f"keep alive {opts.keep_alive} does not fit 16 bits")

    variable_header = (
        _pack_string(PROTOCOL_NAME)
        + bytes([PROTOCOL_LEVEL, opts.flags_byte])
        + struct.pack("!H", opts.keep_alive)
    )
    payload = _pack_string(_encode_utf8(opts.client_id) if opts.client_id else b"")
    if opts.will_flag:
        payload += _pack_string(_encode_utf8(opts.will_topic))
        payload += _pack_string(opts.will_message)
    if opts.username_flag:
        payload += _pack_string(_encode_utf8(opts.username) if opts.username else b"")
    if opts.password_flag:
        payload += _pack_string(opts.password)
    return _packet(PacketType.CONNECT, 0, variable_header, payload)


def build_publish(opts: PublishOptions) -> MqttPacket:
    if opts.qos == 3:
        raise ProtocolViolation("both QoS bits set")
    if opts.qos == 2:
        raise UnsupportedQoS("QoS 2 publishes are not supported")
    if opts.qos not in (0, 1):
        raise ProtocolViolation(f"QoS {opts.qos} is invalid")
    if opts.qos == 1 and opts.msgid is None:
        raise ProtocolViolation("QoS 1 publish needs a packet identifier")
    if opts.qos == 0 and opts.msgid is not None:
        raise ProtocolViolation("QoS 0 publish must not carry a packet identifier")
    if opts.msgid is not None and not 1 <= opts.msgid <= 0xFFFF:
        raise RangeError(f"packet identifier {opts.msgid} outside 1..65535")

    topic = validate_topic(opts.topic)
    variable_header = struct.pack("!H", len(topic)) + topic
    if opts.qos == 1:
        variable_header += struct.pack("!H", opts.msgid)
    flags = (1 if opts.dup else 0) << 3 | opts.qos << 1 | (1 if opts.retain else 0)
    return _packet(PacketType.PUBLISH, flags, variable_header, bytes(opts.payload))


def build_connack(return_code: int = 0x00, session_present: int = 0) -> MqttPacket:
    return _packet(PacketType.CONNACK, 0, bytes([1 if session_present else 0, return_code]), b"")


def build_puback(msgid: int) -> MqttPacket:
    return _packet(PacketType.PUBACK, 0, struct.pack("!H", msgid), b"")


def build_pingreq() -> MqttPacket:
    return _packet(PacketType.PINGREQ, 0, b"", b"")


def build_disconnect() -> MqttPacket:
    return _packet(PacketType.DISCONNECT, 0, b"", b"")


def admissible_publish_headers() -> List[int]:
    """First bytes a DUP=0 PUBLISH with QoS 0 or 1 can carry."""
    return sorted({0x30 | qos << 1 | retain for qos in (0, 1) for retain in (0, 1)})


# ---------------------------------------------------------------------------
# Wire format


def encode_packet(pkt: MqttPacket) -> bytes:
    body = len(pkt.variable_header) + len(pkt.payload)
    if pkt.remaining_length != body:
        raise EncodeError(
            f"remaining length {pkt.remaining_length} disagrees with body of {body} bytes"
        )
    if pkt.remaining_length > MAX_REMAINING_LENGTH:
        raise EncodeError("remaining length too large")
    if pkt.header_flags >> 4 != int(pkt.packet_type):
        raise EncodeError("header byte does not carry the packet type")
    if pkt.packet_type == PacketType.PUBLISH:
        if pkt.qos == 3:
            raise EncodeError("both QoS bits set")
        if pkt.qos > 0 and len(pkt.variable_header) < 4:
            raise EncodeError("QoS > 0 publish lacks a packet identifier")
    return (
        bytes([pkt.header_flags])
        + encode_remaining_length(pkt.remaining_length)
        + pkt.variable_header
        + pkt.payload
    )


def _variable_header_size(packet_type: PacketType, flags: int, body: bytes) -> int:
    if packet_type == PacketType.CONNECT:
        if len(body) < 2:
            raise ProtocolViolation("CONNECT without protocol name")
        (name_len,) = struct.unpack_from("!H", body, 0)
        size = 2 + name_len + 4
    elif packet_type == PacketType.CONNACK:
        size = 2
    elif packet_type == PacketType.PUBLISH:
        if len(body) < 2:
            raise ProtocolViolation("PUBLISH without topic length")
        (topic_len,) = struct.unpack_from("!H", body, 0)
        qos = (flags >> 1) & 0x03
        if qos == 3:
            raise ProtocolViolation("both QoS bits set")
        size = 2 + topic_len + (2 if qos > 0 else 0)
    elif packet_type in _MSGID_ONLY:
        size = 2
    else:
        size = 0
    if size > len(body):
        raise ProtocolViolation(f"{packet_type.name} variable header overruns the packet")
    return size


def read_packet(data: Union[bytes, bytearray]) -> Tuple[MqttPacket, int]:
    """Decode the first control packet in data; return it and the bytes used."""
    if len(data) < 2:
        raise Incomplete("fixed header needs at least two bytes")
    first = data[0]
    try:
        packet_type = PacketType(first >> 4)
    except ValueError as exc:
        raise UnknownType(f"control packet type {first >> 4} is not MQTT v3.1.1") from exc
    remaining, used = decode_remaining_length(data[1:5])
    start = 1 + used
    end = start + remaining
    if len(data) < end:
        raise Incomplete(f"packet declares {remaining} bytes but only {len(data) - start} follow")
    body = bytes(data[start:end])
    split = _variable_header_size(packet_type, first & 0x0F, body)
    packet = MqttPacket(
        packet_type=packet_type,
        header_flags=first,
        remaining_length=remaining,
        variable_header=body[:split],
        payload=body[split:],
    )
    return packet, end


def decode_packet(data: Union[bytes, bytearray]) -> MqttPacket:
    packet, used = read_packet(data)
    if used != len(data):
        raise ProtocolViolation(f"{len(data) - used} trailing bytes after the packet")
    return packet


def split_packets(data: Union[bytes, bytearray]) -> Tuple[List[MqttPacket], bytes]:
    """Decode every complete packet in a stream buffer; return leftovers too."""
    packets: List[MqttPacket] = []
    offset = 0
    while offset < len(data):
        try:
            packet, used = read_packet(data[offset:])
        except Incomplete:
            break
        packets.append(packet)
        offset += used
    return packets, bytes(data[offset:])
