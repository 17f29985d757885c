import struct

import pytest

from hoptrace.errors import MalformedFrameError, TruncatedCaptureError, UnsupportedFormatError
from hoptrace.model import NodeId
from hoptrace.pcap import (
    LinkType,
    dissect_frame,
    packet_digest,
    read_capture,
    write_capture,
    write_frames,
)
from hoptrace.synth import (
    RECEIVER_IP,
    SENDER_IP,
    build_ipv6_frame,
    build_opaque_frame,
    build_udp_transport,
)

NODE = NodeId("MR1")
MAC_A = "02:00:00:00:00:01"
MAC_B = "02:00:00:00:00:02"


def udp_frame(payload=b"\x00\x00\x00\x01datadata", src=MAC_A, dst=MAC_B, hop_limit=64):
    return build_ipv6_frame(src, dst, SENDER_IP, RECEIVER_IP, 17, hop_limit, build_udp_transport(payload))


def global_header(magic, network=1, endian="<"):
    return struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, 65535, network)


def record(ts_sec, ts_sub, frame, endian="<"):
    return struct.pack(endian + "IIII", ts_sec, ts_sub, len(frame), len(frame)) + frame


class TestReadCapture:
    def test_empty_capture(self):
        cap = read_capture(global_header(0xA1B2C3D4), NODE)
        assert cap.records == []
        assert cap.link_type is LinkType.ETHERNET

    def test_byte_swapped_magic_parses_identically(self):
        frame = udp_frame()
        native = global_header(0xA1B2C3D4, endian="<") + record(10, 500, frame, endian="<")
        swapped = global_header(0xA1B2C3D4, endian=">") + record(10, 500, frame, endian=">")
        a, b = read_capture(native, NODE), read_capture(swapped, NODE)
        assert a.records == b.records
        assert a.snaplen == b.snaplen

    def test_nanosecond_timestamps_floor_to_micros(self):
        frame = udp_frame()
        data = global_header(0xA1B23C4D) + record(2, 1500, frame)
        cap = read_capture(data, NODE)
        assert cap.records[0].ts == 2_000_001  # 1500 ns floors to 1 us

    def test_unknown_magic(self):
        with pytest.raises(UnsupportedFormatError):
            read_capture(b"\x00\x01\x02\x03" + b"\x00" * 20, NODE)

    def test_truncated_record_carries_partial(self):
        frame = udp_frame()
        data = global_header(0xA1B2C3D4) + record(1, 0, frame) + record(2, 0, frame)[: -10]
        with pytest.raises(TruncatedCaptureError) as err:
            read_capture(data, NODE)
        assert err.value.records_parsed == 1
        assert len(err.value.partial.records) == 1

    def test_malformed_frames_skipped_and_counted(self):
        short = b"\x01\x02\x03"  # below the 14-byte ethernet header
        data = global_header(0xA1B2C3D4) + record(1, 0, short) + record(2, 0, udp_frame())
        cap = read_capture(data, NODE)
        assert cap.malformed_frames == 1
        assert len(cap.records) == 1
        # parsed + skipped = records present in the file
        assert len(cap.records) + cap.malformed_frames == 2

    def test_records_sorted_by_timestamp(self):
        data = global_header(0xA1B2C3D4) + record(5, 0, udp_frame()) + record(1, 0, udp_frame(b"\x00\x00\x00\x02abc"))
        cap = read_capture(data, NODE)
        assert [r.ts for r in cap.records] == sorted(r.ts for r in cap.records)

    def test_write_read_round_trip_is_byte_identical(self):
        frames = [(1_000_000 + i, udp_frame(struct.pack(">I", i) + b"x" * 20)) for i in range(5)]
        data = write_frames(frames)
        cap = read_capture(data, NODE)
        assert write_capture(cap) == data


class TestDissect:
    def test_below_ethernet_header(self):
        with pytest.raises(MalformedFrameError):
            dissect_frame(b"\x00" * 13, LinkType.ETHERNET)

    def test_ipv6_udp_flow(self):
        fields = dissect_frame(udp_frame(), LinkType.ETHERNET)
        flow = fields["flow"]
        assert flow.proto == "udp"
        assert (flow.src_port, flow.dst_port) == (50000, 5001)
        assert flow.src_ip == "2001:db8::1"
        assert fields["src_mac"] == MAC_A
        assert fields["dst_mac"] == MAC_B
        assert fields["ethertype"] == 0x86DD

    def test_seq_hint_from_udp_payload(self):
        fields = dissect_frame(udp_frame(struct.pack(">I", 1234) + b"pad"), LinkType.ETHERNET)
        assert fields["seq_hint"] == 1234

    def test_opaque_ethertype_keeps_frame_traceable(self):
        fields = dissect_frame(build_opaque_frame(MAC_A, MAC_B, b"mystery-bytes"), LinkType.ETHERNET)
        assert fields["flow"] is None
        assert not fields["digest_confident"]
        assert fields["src_mac"] == MAC_A

    def test_dot11_data_frame(self):
        # Minimal 802.11 data frame: frame control (type=2), then addr1..addr3.
        fc = struct.pack("<H", 0x0008)
        hdr = fc + b"\x00\x00" + bytes.fromhex("020000000002") + bytes.fromhex("020000000001") + b"\x00" * 6 + b"\x00\x00"
        llc = b"\xaa\xaa\x03\x00\x00\x00" + struct.pack(">H", 0x86DD)
        ip_and_up = udp_frame()[14:]
        fields = dissect_frame(hdr + llc + ip_and_up, LinkType.IEEE80211)
        assert fields["src_mac"] == MAC_A
        assert fields["dst_mac"] == MAC_B
        assert fields["flow"].proto == "udp"

    def test_dot11_control_frame_skipped(self):
        ack = struct.pack("<H", 0x00D4) + b"\x00" * 22
        assert dissect_frame(ack, LinkType.IEEE80211) is None


class TestDigest:
    def test_deterministic(self):
        assert packet_digest(udp_frame()) == packet_digest(udp_frame())

    def test_one_byte_difference_changes_digest(self):
        a = packet_digest(udp_frame(b"\x00\x00\x00\x01aaaa"))
        b = packet_digest(udp_frame(b"\x00\x00\x00\x01aaab"))
        assert a != b

    def test_hop_invariance(self):
        # The same logical packet as captured at consecutive hops: MACs
        # rewritten, hop limit decremented. Digests must match.
        at_mr1 = udp_frame(src=MAC_A, dst=MAC_B, hop_limit=64)
        at_mr2 = udp_frame(src=MAC_B, dst="02:00:00:00:00:03", hop_limit=63)
        assert packet_digest(at_mr1) == packet_digest(at_mr2)

    def test_checksum_excluded(self):
        frame = bytearray(udp_frame())
        frame[14 + 40 + 6 : 14 + 40 + 8] = b"\x00\x00"  # zero the UDP checksum
        assert packet_digest(bytes(frame)) == packet_digest(udp_frame())

    def test_collision_sampling(self):
        import random

        rng = random.Random(1)
        seen = set()
        for _ in range(20_000):
            seen.add(packet_digest(udp_frame(rng.randbytes(32))))
        assert len(seen) == 20_000

    def test_one_byte_pairs_never_collide(self):
        # Brute-force sampling over a million pairs differing in one byte;
        # a single collision would be far outside the 2^-32 budget.
        import random

        rng = random.Random(2)
        mac_a, mac_b = MAC_A, MAC_B
        for _ in range(100_000):
            payload = bytearray(rng.randbytes(24))
            base = packet_digest(build_opaque_frame(mac_a, mac_b, bytes(payload)))
            for _ in range(10):
                pos = rng.randrange(len(payload))
                old = payload[pos]
                payload[pos] ^= 1 + rng.randrange(255)
                flipped = packet_digest(build_opaque_frame(mac_a, mac_b, bytes(payload)))
                assert flipped != base
                payload[pos] = old
