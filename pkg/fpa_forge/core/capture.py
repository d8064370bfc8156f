"""Ethernet/IPv4 framing and classic pcap files."""

from __future__ import annotations

import ipaddress
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

from fpa_forge.core.tcp import MQTT_PORT, TCP_HEADER_LEN, TcpFlags, TcpSegment, internet_checksum, tcp_checksum
from fpa_forge.errors import BadMagic, CaptureError, TruncatedRecord

logger = logging.getLogger(__name__)

PCAP_MAGIC = 0xA1B2C3D4
PCAP_VERSION = (2, 4)
PCAP_SNAPLEN = 65535
LINKTYPE_ETHERNET = 1
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16

ETH_HEADER_LEN = 14
ETHERTYPE_IPV4 = 0x0800
IPV4_HEADER_LEN = 20
IP_TTL = 64
IP_FLAG_DF = 0x4000

# Locally administered addresses keep offline captures deterministic.
CLIENT_MAC = bytes.fromhex("02000000000a")
BROKER_MAC = bytes.fromhex("02000000000b")


@dataclass(frozen=True)
class CaptureFrame:
    ts_sec: int
    ts_usec: int
    link_bytes: bytes

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec / 1_000_000


@dataclass(frozen=True)
class DissectedFrame:
    """Fields recovered from an Ethernet/IPv4/TCP frame."""

    timestamp: float
    src_ip: str
    dst_ip: str
    ip_total_length: int
    ip_checksum_ok: bool
    src_port: int
    dst_port: int
    seq: int
    ack: int
    flags: TcpFlags
    window: int
    checksum: int
    tcp_checksum_ok: bool
    options: bytes
    payload: bytes


def split_timestamp(ts: float) -> Tuple[int, int]:
    sec = int(ts)
    usec = int(round((ts - sec) * 1_000_000))
    if usec >= 1_000_000:
        sec, usec = sec + 1, usec - 1_000_000
    return sec, usec


def frame_packet(
    seg: TcpSegment,
    ts: Union[float, Tuple[int, int]],
    src_mac: Optional[bytes] = None,
    dst_mac: Optional[bytes] = None,
    ip_id: int = 0,
) -> CaptureFrame:
    """Wrap a TCP segment in IPv4 and Ethernet II headers.

    Without explicit MACs, segments addressed to the MQTT port travel from the
    synthetic client MAC to the synthetic broker MAC and vice versa.
    """
    if src_mac is None or dst_mac is None:
        towards_broker = seg.dst_port == MQTT_PORT
        src_mac = src_mac or (CLIENT_MAC if towards_broker else BROKER_MAC)
        dst_mac = dst_mac or (BROKER_MAC if towards_broker else CLIENT_MAC)
    tcp_bytes = seg.to_bytes()
    total_length = IPV4_HEADER_LEN + len(tcp_bytes)
    src = ipaddress.IPv4Address(seg.src_ip).packed
    dst = ipaddress.IPv4Address(seg.dst_ip).packed
    header = struct.pack(
        "!BBHHHBBH4s4s", 0x45, 0, total_length, ip_id & 0xFFFF, IP_FLAG_DF, IP_TTL, 6, 0, src, dst
    )
    header = header[:10] + struct.pack("!H", internet_checksum(header)) + header[12:]
    ethernet = dst_mac + src_mac + struct.pack("!H", ETHERTYPE_IPV4)
    sec, usec = ts if isinstance(ts, tuple) else split_timestamp(ts)
    return CaptureFrame(sec, usec, ethernet + header + tcp_bytes)


def dissect(frame: CaptureFrame) -> Optional[DissectedFrame]:
    """Parse an Ethernet/IPv4/TCP frame; None for anything else."""
    data = frame.link_bytes
    if len(data) < ETH_HEADER_LEN + IPV4_HEADER_LEN + TCP_HEADER_LEN:
        return None
    (ethertype,) = struct.unpack_from("!H", data, 12)
    if ethertype != ETHERTYPE_IPV4:
        return None
    ip = data[ETH_HEADER_LEN:]
    version_ihl, _, total_length, _, _, _, proto, _, src, dst = struct.unpack_from("!BBHHHBBH4s4s", ip, 0)
    ihl = (version_ihl & 0x0F) * 4
    if version_ihl >> 4 != 4 or proto != 6 or total_length > len(ip) or ihl < IPV4_HEADER_LEN:
        return None
    ip_checksum_ok = internet_checksum(ip[:ihl]) == 0
    tcp = ip[ihl:total_length]
    if len(tcp) < TCP_HEADER_LEN:
        return None
    sport, dport, seq, ack, offset, flags, window, checksum, _ = struct.unpack_from("!HHIIBBHHH", tcp, 0)
    data_offset = (offset >> 4) * 4
    if data_offset < TCP_HEADER_LEN or data_offset > len(tcp):
        return None
    src_ip, dst_ip = str(ipaddress.IPv4Address(src)), str(ipaddress.IPv4Address(dst))
    zeroed = tcp[:16] + b"\x00\x00" + tcp[18:]
    probe = TcpSegment(src_ip, dst_ip, sport, dport, seq, ack, TcpFlags(flags & 0x3F))
    return DissectedFrame(
        timestamp=frame.timestamp,
        src_ip=src_ip,
        dst_ip=dst_ip,
        ip_total_length=total_length,
        ip_checksum_ok=ip_checksum_ok,
        src_port=sport,
        dst_port=dport,
        seq=seq,
        ack=ack,
        flags=TcpFlags(flags & 0x3F),
        window=window,
        checksum=checksum,
        tcp_checksum_ok=tcp_checksum(probe, zeroed) == checksum,
        options=bytes(tcp[TCP_HEADER_LEN:data_offset]),
        payload=bytes(tcp[data_offset:]),
    )


def write_pcap(frames: Iterable[CaptureFrame], path: Union[str, Path]) -> int:
    """Write a classic microsecond pcap file; return the number of frames."""
    count = 0
    with open(path, "wb") as fh:
        fh.write(
            struct.pack(
                "<IHHiIII", PCAP_MAGIC, *PCAP_VERSION, 0, 0, PCAP_SNAPLEN, LINKTYPE_ETHERNET
            )
        )
        for frame in frames:
            size = len(frame.link_bytes)
            fh.write(struct.pack("<IIII", frame.ts_sec, frame.ts_usec, size, size))
            fh.write(frame.link_bytes)
            count += 1
    logger.info("Wrote %d frames to %s", count, path)
    return count


def read_pcap(path: Union[str, Path]) -> List[CaptureFrame]:
    data = Path(path).read_bytes()
    magic = data[:4]
    if magic == struct.pack("<I", PCAP_MAGIC):
        endian = "<"
    elif magic == struct.pack(">I", PCAP_MAGIC):
        endian = ">"
    else:
        raise BadMagic(f"{path} does not start with a classic pcap magic number")
    if len(data) < GLOBAL_HEADER_LEN:
        raise CaptureError(f"{path} has a truncated global header")
    frames: List[CaptureFrame] = []
    offset = GLOBAL_HEADER_LEN
    while offset < len(data):
        index = len(frames)
        if offset + RECORD_HEADER_LEN > len(data):
            raise TruncatedRecord(index)
        ts_sec, ts_usec, incl_len, _ = struct.unpack_from(f"{endian}IIII", data, offset)
        offset += RECORD_HEADER_LEN
        if offset + incl_len > len(data):
            raise TruncatedRecord(index)
        frames.append(CaptureFrame(ts_sec, ts_usec, data[offset : offset + incl_len]))
        offset += incl_len
    logger.debug("Read %d frames from %s", len(frames), path)
    return frames
