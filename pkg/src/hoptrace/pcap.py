"""Classic pcap savefile reading/writing and frame dissection.

Supports the de-facto savefile layout only (not pcapng): 24-byte global
header, 16-byte per-record headers, microsecond or nanosecond timestamps,
either byte order. Dissection stops at the transport header; anything deeper
is opaque payload, which keeps the tracer independent of the routed protocol.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field

from .errors import MalformedFrameError, TruncatedCaptureError, UnsupportedFormatError
from .model import NodeId, Timestamp

MAGIC_MICROS = 0xA1B2C3D4
MAGIC_NANOS = 0xA1B23C4D

LINKTYPE_ETHERNET = 1
LINKTYPE_IEEE80211 = 105
LINKTYPE_RADIOTAP = 127

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_IPV6 = 0x86DD

BROADCAST_MAC = "ff:ff:ff:ff:ff:ff"

# Seed folded into every payload digest so digests are stable across runs and
# machines but not accidentally comparable with other tools' hashes.
DIGEST_SEED = b"hoptrace\x01"

_GLOBAL_HDR = struct.Struct("<HHiIII")  # after the magic; '<' swapped per magic
_REC_HDR_LE = struct.Struct("<IIII")
_REC_HDR_BE = struct.Struct(">IIII")


class LinkType(str, enum.Enum):
    ETHERNET = "ethernet"
    IEEE80211 = "ieee80211"
    RADIOTAP = "radiotap"


class TsResolution(str, enum.Enum):
    MICRO = "micro"
    NANO = "nano"


_LINKTYPES = {
    LINKTYPE_ETHERNET: LinkType.ETHERNET,
    LINKTYPE_IEEE80211: LinkType.IEEE80211,
    LINKTYPE_RADIOTAP: LinkType.RADIOTAP,
}

_PROTO_NAMES = {6: "tcp", 17: "udp", 1: "icmp", 58: "icmpv6"}


@dataclass(frozen=True)
class FlowKey:
    """Transport-level flow identity. Ports are 0 for ICMP-family protocols."""

    src_ip: str
    dst_ip: str
    proto: str  # udp | tcp | icmp | icmpv6 | other
    proto_number: int
    src_port: int = 0
    dst_port: int = 0
    icmp_id: int | None = None
    icmp_seq: int | None = None

    def describe(self) -> str:
        if self.proto in ("udp", "tcp"):
            return f"{self.proto} [{self.src_ip}]:{self.src_port}>[{self.dst_ip}]:{self.dst_port}"
        return f"{self.proto} [{self.src_ip}]>[{self.dst_ip}]"


@dataclass(frozen=True)
class PacketRecord:
    """One frame observed at one node's capture."""

    capture_node: NodeId
    ts: Timestamp
    src_mac: str
    dst_mac: str
    ethertype: int
    length: int  # bytes on wire (orig_len)
    payload_digest: int  # 64-bit, hop-invariant
    flow: FlowKey | None = None
    seq_hint: int | None = None
    payload_len: int = 0  # transport payload bytes (application data)
    digest_confident: bool = True  # False when only raw bytes were digestable
    raw: bytes = b""  # captured bytes, kept for re-serialization


@dataclass
class CaptureFile:
    """Parsed capture for one node; records sorted by timestamp."""

    node: NodeId
    link_type: LinkType
    ts_resolution: TsResolution
    records: list[PacketRecord] = field(default_factory=list)
    snaplen: int = 65535
    malformed_frames: int = 0
    skipped_frames: int = 0  # non-data frames (802.11 control/management)


def read_capture(data: bytes, node: NodeId) -> CaptureFile:
    """Parse a classic pcap savefile.

    Raises UnsupportedFormatError on an unknown magic and TruncatedCaptureError
    (carrying the parsed prefix) when the file ends mid-record.
    """
    if len(data) < 24:
        raise UnsupportedFormatError(f"{node}: file too short for a pcap header ({len(data)} bytes)")
    magic_le = struct.unpack_from("<I", data, 0)[0]
    magic_be = struct.unpack_from(">I", data, 0)[0]
    if magic_le in (MAGIC_MICROS, MAGIC_NANOS):
        swapped, magic = "<", magic_le
    elif magic_be in (MAGIC_MICROS, MAGIC_NANOS):
        swapped, magic = ">", magic_be
    else:
        raise UnsupportedFormatError(f"{node}: unknown pcap magic 0x{magic_be:08X}")
    resolution = TsResolution.NANO if magic == MAGIC_NANOS else TsResolution.MICRO

    _ver_major, _ver_minor, _thiszone, _sigfigs, snaplen, network = struct.unpack_from(
        swapped + "HHiIII", data, 4
    )
    if network not in _LINKTYPES:
        raise UnsupportedFormatError(f"{node}: unsupported link type {network}")
    capture = CaptureFile(
        node=node,
        link_type=_LINKTYPES[network],
        ts_resolution=resolution,
        snaplen=snaplen,
    )

    rec_hdr = _REC_HDR_LE if swapped == "<" else _REC_HDR_BE
    offset = 24
    while offset < len(data):
        if offset + 16 > len(data):
            raise TruncatedCaptureError(
                f"{node}: record header truncated at byte {offset}",
                partial=_finish(capture),
                records_parsed=len(capture.records),
            )
        ts_sec, ts_subsec, incl_len, orig_len = rec_hdr.unpack_from(data, offset)
        offset += 16
        if offset + incl_len > len(data):
            raise TruncatedCaptureError(
                f"{node}: record body truncated at byte {offset} (need {incl_len} bytes)",
                partial=_finish(capture),
                records_parsed=len(capture.records),
            )
        frame = data[offset : offset + incl_len]
        offset += incl_len
        if resolution is TsResolution.NANO:
            ts = ts_sec * 1_000_000 + ts_subsec // 1000  # floor to microseconds
        else:
            ts = ts_sec * 1_000_000 + ts_subsec
        try:
            fields = dissect_frame(frame, capture.link_type)
        except MalformedFrameError:
            capture.malformed_frames += 1
            continue
        if fields is None:
            capture.skipped_frames += 1
            continue
        capture.records.append(
            PacketRecord(capture_node=node, ts=ts, length=orig_len, raw=frame, **fields)
        )
    return _finish(capture)


def _finish(capture: CaptureFile) -> CaptureFile:
    capture.records.sort(key=lambda r: r.ts)
    return capture


def write_capture(capture: CaptureFile) -> bytes:
    """Serialize records back to a little-endian, microsecond, ethernet savefile."""
    out = bytearray()
    out += struct.pack("<IHHiIII", MAGIC_MICROS, 2, 4, 0, 0, capture.snaplen, LINKTYPE_ETHERNET)
    for rec in capture.records:
        out += _REC_HDR_LE.pack(rec.ts // 1_000_000, rec.ts % 1_000_000, len(rec.raw), rec.length)
        out += rec.raw
    return bytes(out)


def write_frames(frames: list[tuple[Timestamp, bytes]], snaplen: int = 65535) -> bytes:
    """Serialize raw (timestamp, frame) pairs; same profile as write_capture."""
    out = bytearray()
    out += struct.pack("<IHHiIII", MAGIC_MICROS, 2, 4, 0, 0, snaplen, LINKTYPE_ETHERNET)
    for ts, frame in frames:
        out += _REC_HDR_LE.pack(ts // 1_000_000, ts % 1_000_000, len(frame), len(frame))
        out += frame
    return bytes(out)


def format_mac(raw: bytes) -> str:
    return ":".join(f"{b:02x}" for b in raw)


def parse_mac(text: str) -> bytes:
    return bytes(int(p, 16) for p in text.split(":"))


def format_ip(raw: bytes) -> str:
    import ipaddress

    return str(ipaddress.ip_address(raw))


def dissect_frame(frame: bytes, link_type: LinkType) -> dict | None:
    """Extract PacketRecord fields from one frame.

    Returns None for frames that carry no traceable data (802.11 control and
    management frames); raises MalformedFrameError when the frame is shorter
    than its link header.
    """
    if link_type is LinkType.ETHERNET:
        if len(frame) < 14:
            raise MalformedFrameError(f"frame of {len(frame)} bytes is below the 14-byte ethernet header")
        dst_mac = format_mac(frame[0:6])
        src_mac = format_mac(frame[6:12])
        ethertype = struct.unpack_from(">H", frame, 12)[0]
        body = frame[14:]
    elif link_type in (LinkType.IEEE80211, LinkType.RADIOTAP):
        offset = 0
        if link_type is LinkType.RADIOTAP:
            if len(frame) < 4:
                raise MalformedFrameError("frame shorter than the radiotap length field")
            rt_len = struct.unpack_from("<H", frame, 2)[0]
            if len(frame) < rt_len:
                raise MalformedFrameError("frame shorter than its radiotap header")
            offset = rt_len
        dot11 = frame[offset:]
        if len(dot11) < 24:
            raise MalformedFrameError("frame shorter than the 802.11 data header")
        fc = struct.unpack_from("<H", dot11, 0)[0]
        if (fc >> 2) & 0x3 != 2:  # only data frames carry payloads we trace
            return None
        # Address 1 = receiver, address 2 = transmitter in the data-frame header.
        dst_mac = format_mac(dot11[4:10])
        src_mac = format_mac(dot11[10:16])
        llc = dot11[24:]
        if len(llc) < 8 or llc[0:3] != b"\xaa\xaa\x03":
            return None
        ethertype = struct.unpack_from(">H", llc, 6)[0]
        body = llc[8:]
    else:  # pragma: no cover - LinkType is closed
        raise UnsupportedFormatError(f"link type {link_type}")

    flow = None
    seq_hint = None
    payload_len = len(body)
    confident = False

    parsed = _parse_ip(body, ethertype)
    if parsed is not None:
        flow, transport_payload, digest_fields = parsed
        payload_len = len(transport_payload)
        digest = _digest(digest_fields)
        confident = True
        seq_hint = _extract_seq_hint(flow, transport_payload)
    else:
        digest = _digest([body])

    return {
        "src_mac": src_mac,
        "dst_mac": dst_mac,
        "ethertype": ethertype,
        "flow": flow,
        "seq_hint": seq_hint,
        "payload_digest": digest,
        "payload_len": payload_len,
        "digest_confident": confident,
    }


def _parse_ip(body: bytes, ethertype: int):
    if ethertype == ETHERTYPE_IPV6:
        if len(body) < 40:
            return None
        next_header = body[6]
        src_ip = format_ip(body[8:24])
        dst_ip = format_ip(body[24:40])
        src_raw, dst_raw = body[8:24], body[24:40]
        transport = body[40:]
    elif ethertype == ETHERTYPE_IPV4:
        if len(body) < 20:
            return None
        ihl = (body[0] & 0x0F) * 4
        if ihl < 20 or len(body) < ihl:
            return None
        next_header = body[9]
        src_ip = format_ip(body[12:16])
        dst_ip = format_ip(body[16:20])
        src_raw, dst_raw = body[12:16], body[16:20]
        transport = body[ihl:]
    else:
        return None

    proto = _PROTO_NAMES.get(next_header, "other")
    if proto in ("udp", "tcp"):
        hdr = 8 if proto == "udp" else _tcp_header_len(transport)
        if hdr is None or len(transport) < hdr:
            return None
        src_port, dst_port = struct.unpack_from(">HH", transport, 0)
        payload = transport[hdr:]
        flow = FlowKey(src_ip, dst_ip, proto, next_header, src_port, dst_port)
        fields = [
            src_raw,
            dst_raw,
            bytes([next_header]),
            struct.pack(">HH", src_port, dst_port),
            struct.pack(">I", len(payload)),
            payload,
        ]
        return flow, payload, fields
    if proto in ("icmp", "icmpv6"):
        if len(transport) < 8:
            return None
        icmp_type, icmp_code = transport[0], transport[1]
        icmp_id, icmp_seq = struct.unpack_from(">HH", transport, 4)
        payload = transport[8:]
        flow = FlowKey(src_ip, dst_ip, proto, next_header, icmp_id=icmp_id, icmp_seq=icmp_seq)
        fields = [
            src_raw,
            dst_raw,
            bytes([next_header, icmp_type, icmp_code]),
            struct.pack(">HH", icmp_id, icmp_seq),
            struct.pack(">I", len(payload)),
            payload,
        ]
        return flow, payload, fields
    # Other transport: digest the whole transport block (no mutable fields in it).
    flow = FlowKey(src_ip, dst_ip, proto, next_header)
    fields = [src_raw, dst_raw, bytes([next_header]), struct.pack(">I", len(transport)), transport]
    return flow, transport, fields


def _tcp_header_len(transport: bytes) -> int | None:
    if len(transport) < 20:
        return None
    return ((transport[12] >> 4) & 0x0F) * 4


def _digest(fields: list[bytes]) -> int:
    h = hashlib.blake2b(digest_size=8, person=DIGEST_SEED)
    for f in fields:
        h.update(f)
    return int.from_bytes(h.digest(), "big")


def packet_digest(frame: bytes, link_type: LinkType = LinkType.ETHERNET) -> int:
    """64-bit digest over the hop-invariant bytes of a frame.

    Covers addresses, protocol, ports or ICMP id+seq, transport payload and its
    length; excludes MACs, hop limit / TTL, traffic class, flow label, link
    headers and checksums, so every per-hop copy of one logical packet digests
    identically.
    """
    fields = dissect_frame(frame, link_type)
    if fields is None:
        raise MalformedFrameError("frame carries no digestable payload")
    return fields["payload_digest"]


def _extract_seq_hint(flow: FlowKey, payload: bytes) -> int | None:
    # Recognized payload shapes only; a hint is a tie-breaker, never required.
    if flow.proto == "udp" and len(payload) >= 4:
        return struct.unpack_from(">I", payload, 0)[0]
    if flow.proto in ("icmp", "icmpv6") and flow.icmp_seq is not None:
        return flow.icmp_seq
    return None
