"""Per-packet feature extraction from captures into the 61-column CSV."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd

from fpa_forge.core.capture import CaptureFrame, DissectedFrame, dissect, read_pcap
from fpa_forge.core.mqtt import MqttPacket, PacketType, read_packet
from fpa_forge.core.tcp import MQTT_PORT, SEQ_MODULUS, TcpFlags
from fpa_forge.errors import CodecError
from fpa_forge.features.schema import (
    BY_NAME,
    FeatureRecord,
    empty_record,
    profile_columns,
)

logger = logging.getLogger(__name__)

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
Flow = Tuple[str, int, str, int]


@dataclass
class Extraction:
    records: List[FeatureRecord] = field(default_factory=list)
    skipped: int = 0
    mqtt_errors: int = 0


def render_time(frame: CaptureFrame) -> str:
    moment = _EPOCH + timedelta(seconds=frame.ts_sec, microseconds=frame.ts_usec)
    return moment.strftime("%Y-%m-%d %H:%M:%S.%f")


def _hex(value: int, width: int) -> str:
    return f"0x{value:0{width}x}"


def _tcp_fields(pkt: DissectedFrame, record: FeatureRecord, isn: Dict[Flow, int]) -> None:
    flow = (pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port)
    reverse = (pkt.dst_ip, pkt.dst_port, pkt.src_ip, pkt.src_port)
    isn.setdefault(flow, pkt.seq)
    flags = pkt.flags
    has_ack = bool(flags & TcpFlags.ACK)
    syn = bool(flags & TcpFlags.SYN)
    if has_ack:
        # relative to the peer's first sequence number, as dissectors display it
        peer_isn = isn.get(reverse, (pkt.ack - 1) % SEQ_MODULUS)
        record["tcp.ack"] = (pkt.ack - peer_isn) % SEQ_MODULUS
        record["tcp.ack_raw"] = pkt.ack
    record["tcp.checksum"] = _hex(pkt.checksum, 4)
    record["tcp.connection.fin"] = int(bool(flags & TcpFlags.FIN))
    record["tcp.connection.rst"] = int(bool(flags & TcpFlags.RST))
    record["tcp.connection.syn"] = int(syn and not has_ack)
    record["tcp.connection.synack"] = int(syn and has_ack)
    record["tcp.dstport"] = pkt.dst_port
    record["tcp.flags"] = _hex(int(flags), 8)
    record["tcp.flags.ack"] = int(has_ack)
    record["tcp.len"] = len(pkt.payload)
    record["tcp.options"] = pkt.options.hex()
    record["tcp.payload"] = pkt.payload.hex()
    record["tcp.seq"] = pkt.seq
    record["tcp.srcport"] = pkt.src_port


def _mqtt_fields(mqtt: MqttPacket, record: FeatureRecord) -> None:
    record["mqtt.hdrflags"] = _hex(mqtt.header_flags, 2)
    record["mqtt.len"] = mqtt.remaining_length
    record["mqtt.msgtype"] = int(mqtt.packet_type)
    if mqtt.packet_type == PacketType.CONNECT:
        record["mqtt.conflags"] = _hex(mqtt.connect_flags, 2)
        record["mqtt.conflag.cleansess"] = (mqtt.connect_flags >> 1) & 1
        record["mqtt.protoname"] = mqtt.protocol_name
        record["mqtt.proto_len"] = len(mqtt.protocol_name.encode("utf-8"))
        record["mqtt.ver"] = mqtt.protocol_level
    elif mqtt.packet_type == PacketType.CONNACK:
        record["mqtt.conack.flags"] = _hex(mqtt.connack_flags, 2)
    elif mqtt.packet_type == PacketType.PUBLISH:
        record["mqtt.topic"] = mqtt.topic
        record["mqtt.topic_len"] = len(mqtt.topic_bytes)
        record["mqtt.msg"] = mqtt.payload.hex()


def extract(frames: Iterable[CaptureFrame]) -> Extraction:
    """Extract records and tally frames that could not be used."""
    result = Extraction()
    isn: Dict[Flow, int] = {}
    for index, frame in enumerate(frames):
        pkt = dissect(frame)
        if pkt is None:
            result.skipped += 1
            logger.warning("Skipping frame %d: not Ethernet/IPv4/TCP", index)
            continue
        record = empty_record()
        record["frame.time"] = render_time(frame)
        record["ip.src_host"] = pkt.src_ip
        record["ip.dst_host"] = pkt.dst_ip
        _tcp_fields(pkt, record, isn)
        if pkt.payload and MQTT_PORT in (pkt.src_port, pkt.dst_port):
            try:
                mqtt, _ = read_packet(pkt.payload)
                _mqtt_fields(mqtt, record)
            except CodecError as exc:
                result.mqtt_errors += 1
                logger.debug("Frame %d payload is not MQTT: %s", index, exc)
        result.records.append(record)
    logger.info(
        "Extracted %d records (%d frames skipped, %d undecodable MQTT payloads)",
        len(result.records), result.skipped, result.mqtt_errors,
    )
    return result


def extract_features(frames: Iterable[CaptureFrame]) -> List[FeatureRecord]:
    return extract(frames).records


def extract_pcap(path: Union[str, Path]) -> Extraction:
    return extract(read_pcap(path))


def _label_values(label: str) -> Dict[str, object]:
    # Benign rows carry Attack_label 0; any other type is an attack.
    return {"Attack_label": 0 if label.lower() == "normal" else 1, "Attack_type": label}


def to_frame(
    records: Sequence[FeatureRecord],
    profile: str = "full61",
    label: Optional[str] = None,
) -> pd.DataFrame:
    columns = profile_columns(profile)
    df = pd.DataFrame(list(records), columns=columns)
    if label is not None:
        for name, value in _label_values(label).items():
            df[name] = value
    return df


def write_feature_csv(
    records: Sequence[FeatureRecord],
    path: Union[str, Path],
    profile: str = "full61",
    label: Optional[str] = None,
) -> int:
    """Write records under the profile's columns; return the number of rows."""
    df = to_frame(records, profile, label)
    df.to_csv(path, index=False, lineterminator="\n")
    logger.info("Wrote %d rows x %d columns to %s", len(df), len(df.columns), path)
    return len(df)


def read_feature_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Load a feature CSV with string columns kept verbatim (padding included)."""
    header = pd.read_csv(path, nrows=0).columns
    dtypes = {name: str for name in header if name in BY_NAME and not BY_NAME[name].numeric}
    df = pd.read_csv(path, dtype=dtypes, keep_default_na=False)
    return df
