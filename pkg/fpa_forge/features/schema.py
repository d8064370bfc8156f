"""Column schema of the 61-feature packet CSV, with named feature subsets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple, Union

FeatureValue = Union[int, str]
FeatureRecord = Dict[str, FeatureValue]


@dataclass(frozen=True)
class Column:
    fid: int
    name: str
    numeric: bool = True

    @property
    def null(self) -> FeatureValue:
        return 0 if self.numeric else ""


def _c(fid: int, name: str, numeric: bool = True) -> Column:
    return Column(fid, name, numeric)


COLUMNS: Tuple[Column, ...] = (
    _c(1, "frame.time", False),
    _c(2, "ip.src_host", False),
    _c(3, "ip.dst_host", False),
    _c(4, "arp.dst.proto_ipv4", False),
    _c(5, "arp.opcode"),
    _c(6, "arp.hw.size"),
    _c(7, "arp.src.proto_ipv4", False),
    _c(8, "icmp.checksum"),
    _c(9, "icmp.seq_le"),
    _c(10, "icmp.transmit_timestamp"),
    _c(11, "icmp.unused"),
    _c(12, "http.file_data", False),
    _c(13, "http.content_length"),
    _c(14, "http.request.uri.query", False),
    _c(15, "http.request.method", False),
    _c(16, "http.referer", False),
    _c(17, "http.request.full_uri", False),
    _c(18, "http.request.version", False),
    _c(19, "http.response"),
    _c(20, "http.tls_port"),
    _c(21, "tcp.ack"),
    _c(22, "tcp.ack_raw"),
    _c(23, "tcp.checksum", False),
    _c(24, "tcp.connection.fin"),
    _c(25, "tcp.connection.rst"),
    _c(26, "tcp.connection.syn"),
    _c(27, "tcp.connection.synack"),
    _c(28, "tcp.dstport"),
    _c(29, "tcp.flags", False),
    _c(30, "tcp.flags.ack"),
    _c(31, "tcp.len"),
    _c(32, "tcp.options", False),
    _c(33, "tcp.payload", False),
    _c(34, "tcp.seq"),
    _c(35, "tcp.srcport"),
    _c(36, "udp.port"),
    _c(37, "udp.stream"),
    _c(38, "udp.time_delta"),
    _c(39, "dns.qry.name", False),
    _c(40, "dns.qry.name.len"),
    _c(41, "dns.qry.qu"),
    _c(42, "dns.qry.type"),
    _c(43, "dns.retransmission"),
    _c(44, "dns.retransmit_request"),
    _c(45, "dns.retransmit_request_in"),
    _c(46, "mqtt.conack.flags", False),
    _c(47, "mqtt.conflag.cleansess"),
    _c(48, "mqtt.conflags", False),
    _c(49, "mqtt.hdrflags", False),
    _c(50, "mqtt.len"),
    _c(51, "mqtt.msg_decoded_as"),
    _c(52, "mqtt.msg", False),
    _c(53, "mqtt.msgtype"),
    _c(54, "mqtt.proto_len"),
    _c(55, "mqtt.protoname", False),
    _c(56, "mqtt.topic", False),
    _c(57, "mqtt.topic_len"),
    _c(58, "mqtt.ver"),
    _c(59, "mbtcp.len"),
    _c(60, "mbtcp.trans_id"),
    _c(61, "mbtcp.unit_id"),
)

LABEL_COLUMNS: Tuple[Column, ...] = (
    _c(62, "Attack_label"),
    _c(63, "Attack_type", False),
)

BY_ID: Dict[int, Column] = {c.fid: c for c in COLUMNS + LABEL_COLUMNS}
BY_NAME: Dict[str, Column] = {c.name: c for c in COLUMNS + LABEL_COLUMNS}

# Columns whose value a whitespace-padded PUBLISH changes.
FPA_AFFECTED = (23, 31, 34, 49, 50, 56, 57)

_NIDS46_TCP = (21, 22, 23, 24, 25, 26, 27, 29, 30, 31, 34)
_NIDS46_MQTT = (46, 47, 48, 49, 50, 51, 53, 54, 55, 56, 57, 58)

PROFILES: Dict[str, Tuple[int, ...]] = {
    "full61": tuple(range(1, 62)),
    "tcp": tuple(range(21, 36)),
    "mqtt": tuple(range(46, 59)),
    "nids46": _NIDS46_TCP + _NIDS46_MQTT,
    "nids49": tuple(sorted(_NIDS46_TCP + (28,))) + _NIDS46_MQTT,
    "nids18": _NIDS46_TCP,
    "fpa_affected": FPA_AFFECTED,
}

# Categorical columns for one-hot encoding.
CATEGORICAL = tuple(c.name for c in COLUMNS if not c.numeric and c.fid != 1)


def profile_columns(profile: str) -> List[str]:
    """Column names of a profile, in feature-id order."""
    try:
        ids = PROFILES[profile]
    except KeyError:
        raise KeyError(f"unknown feature profile {profile!r}; choose from {sorted(PROFILES)}") from None
    return [BY_ID[i].name for i in ids]


def empty_record() -> FeatureRecord:
    return {c.name: c.null for c in COLUMNS}
