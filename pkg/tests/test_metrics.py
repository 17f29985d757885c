import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import chain_scenario
from hoptrace import synth
from hoptrace.applogs import parse_ping_log
from hoptrace.cli import analyze, RunPlan
from hoptrace.errors import InternalConsistencyError
from hoptrace.metrics import AppLogs, aggregate, compute_jitter_rtt, compute_pdr
from hoptrace.model import NodeId, Slotting, haversine_distance
from hoptrace.pcap import read_capture
from hoptrace.tracer import estimate_clock_offsets, reconstruct_journeys


def brute_force_mad(values):
    """Independent oracle: mean absolute deviation, spelled out."""
    mean = 0.0
    for v in values:
        mean += v
    mean /= len(values)
    total = 0.0
    for v in values:
        total += abs(v - mean)
    return total / len(values)


class TestPdr:
    def test_definitional_ratio(self):
        assert compute_pdr(10, 7) == pytest.approx(70.0)

    def test_zero_sent_is_absent(self):
        assert compute_pdr(0, 0) is None

    def test_exact_counts(self):
        assert compute_pdr(105, 100) == pytest.approx(95.23809523809524, abs=1e-12)

    def test_received_above_sent_rejected(self):
        with pytest.raises(InternalConsistencyError):
            compute_pdr(5, 6)


class TestJitter:
    def test_constant_latency_has_null_jitter(self):
        assert compute_jitter_rtt([5.0, 5.0, 5.0]) == 0.0

    def test_two_samples(self):
        assert compute_jitter_rtt([4.0, 6.0]) == pytest.approx(1.0)

    def test_empty_absent(self):
        assert compute_jitter_rtt([]) is None

    def test_against_brute_force_oracle(self):
        rng = random.Random(5)
        for _ in range(50):
            xs = [rng.uniform(0.1, 50.0) for _ in range(rng.randint(1, 1000))]
            assert compute_jitter_rtt(xs) == pytest.approx(brute_force_mad(xs), abs=1e-9)

    @given(st.lists(st.floats(min_value=0.0, max_value=1e4, allow_nan=False), min_size=1, max_size=200))
    def test_nonnegative(self, xs):
        assert compute_jitter_rtt(xs) >= 0.0


def _analyzed(tree, tmp_path, logs=True):
    spec = synth.parse_scenario(tree)
    bundle = synth.generate(spec)
    bdir = tmp_path / "b"
    synth.write_bundle(bundle, bdir)
    nodes = [n.name for n in spec.nodes]
    logmap = {f.stem: f for f in sorted((bdir / "logs").glob("*.log"))} if logs else {}
    plan = RunPlan(
        captures={n: bdir / "captures" / f"{n}.pcap" for n in nodes},
        gps={n: bdir / "gps" / f"{n}.nmea" for n in nodes},
        logs=logmap, sender=spec.sender, receiver=spec.receiver,
        out_dir=tmp_path / "o", name=spec.name)
    return analyze(plan), bundle


class TestAggregate:
    def test_throughput_identity(self, tmp_path):
        # 100 packets/s at 1250 bytes: 1 Mbit/s in every full slot.
        tree = chain_scenario("tput", seed=41, duration_s=5, rate_pps=100, payload=1250)
        result, _ = _analyzed(tree, tmp_path)
        data_slots = [s for s in result.report.data if s.end_to_end.sent == 100]
        assert len(data_slots) == 5
        for slot in data_slots:
            assert slot.end_to_end.throughput_bps == 1_000_000.0
            assert slot.end_to_end.bytes == 125_000

    def test_slot_sum_equals_total_delivered(self, tmp_path):
        tree = chain_scenario("sums", seed=42, duration_s=7,
                              link_extra={"MR2>MR3": {"drop": {"probability": 0.3}}})
        result, _ = _analyzed(tree, tmp_path)
        assert sum(s.end_to_end.delivered for s in result.report.data) == result.tally.delivered
        assert sum(s.end_to_end.sent for s in result.report.data) == result.tally.sent

    def test_link_distance_from_positions(self, tmp_path):
        tree = chain_scenario("dist", seed=43, duration_s=5, n=2)
        result, _ = _analyzed(tree, tmp_path)
        slot = result.report.data[0]
        link = slot.links[0]
        assert link.distance_m is not None
        nodes = {n.node.name: n for n in slot.nodes}
        oracle = haversine_distance(nodes["MR1"].lat, nodes["MR1"].lon,
                                    nodes["MR2"].lat, nodes["MR2"].lon)
        assert link.distance_m == pytest.approx(oracle, abs=1e-6)

    def test_ping_overlay_constant_rtt(self, tmp_path):
        tree = {
            "name": "pingslots", "seed": 44, "duration_s": 30,
            "nodes": [
                {"name": "MR1", "role": "mobile_router",
                 "motion": {"waypoints": [[48.84, 2.10]], "speed_mps": 0.0}},
                {"name": "MR2", "role": "mobile_router",
                 "motion": {"waypoints": [[48.841, 2.10]], "speed_mps": 0.0}},
            ],
            "links": [{"src": "MR1", "dst": "MR2"}, {"src": "MR2", "dst": "MR1"}],
            "routes": [{"path": ["MR1", "MR2"]}],
            "flows": [{"kind": "ping", "rate_pps": 2, "payload_bytes": 56}],
            "latency": {"prop_us": 2000, "fwd_us": 500, "proc_us": 1000},
        }
        result, _ = _analyzed(tree, tmp_path)
        traffic = [s for s in result.report.data if s.end_to_end.sent]
        assert traffic
        for slot in traffic:
            assert slot.end_to_end.rtt_avg_ms == pytest.approx(5.0, abs=1e-9)
            assert slot.end_to_end.jitter_rtt_ms == 0.0

    def test_empty_slots_emitted_with_node_stats(self, tmp_path):
        tree = chain_scenario("gaps", seed=45, duration_s=4, n=2,
                              flows=[{"kind": "udp", "rate_pps": 10, "payload_bytes": 100,
                                      "duration_s": 1.0},
                                     {"kind": "udp", "rate_pps": 10, "payload_bytes": 100,
                                      "start_s": 3.0}])
        result, _ = _analyzed(tree, tmp_path)
        by_index = {s.index: s for s in result.report.data}
        assert by_index[1].end_to_end.sent == 0
        assert by_index[1].nodes  # node positions still present in the gap
        assert by_index[3].end_to_end.sent == 10

    def test_hop_count_mode(self, tmp_path):
        tree = chain_scenario("hops", seed=46, duration_s=5, n=4)
        result, _ = _analyzed(tree, tmp_path)
        slot = next(s for s in result.report.data if s.end_to_end.sent)
        assert slot.end_to_end.hop_count == 3
        assert slot.end_to_end.hop_count_min == 3
        assert slot.end_to_end.hop_count_max == 3

    def test_per_slot_fate_partition(self, tmp_path):
        tree = chain_scenario("slotpart", seed=47, duration_s=10,
                              node_extra={"MR2": {"in_node_drop": {"probability": 0.2}}},
                              link_extra={"MR3>MR4": {"drop": {"probability": 0.2}}})
        result, _ = _analyzed(tree, tmp_path)
        slotting = Slotting(t0=result.report.started_at_us)
        per_slot = {}
        for j in result.journeys:
            per_slot.setdefault(slotting.slot_of(j.send_ts), []).append(j)
        for slot in result.report.data:
            js = per_slot.get(slot.index, [])
            losses = sum(1 for j in js if not j.ambiguous and j.fate.kind in ("link_loss", "in_node_loss"))
            unobserved = sum(1 for j in js if not j.ambiguous and j.fate.kind == "unobserved")
            ambiguous = sum(1 for j in js if j.ambiguous)
            assert slot.end_to_end.delivered + losses + unobserved + ambiguous == slot.end_to_end.sent
