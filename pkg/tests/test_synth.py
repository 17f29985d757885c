import json

import pytest

from conftest import chain_scenario, oracle_loop
from hoptrace import synth
from hoptrace.errors import ScenarioSpecError
from hoptrace.model import NodeId
from hoptrace.nmea import parse_sentence
from hoptrace.pcap import read_capture
from hoptrace.tracer import format_trace, read_trace


class TestSpecValidation:
    def test_drop_probability_out_of_range(self):
        tree = chain_scenario("bad", link_extra={"MR1>MR2": {"drop": {"probability": 1.2}}})
        with pytest.raises(ScenarioSpecError) as err:
            synth.parse_scenario(tree)
        assert err.value.path == "links[0].drop.probability"

    def test_unreachable_receiver(self):
        tree = chain_scenario("nolink")
        tree["links"] = tree["links"][:-1]  # break the chain before MR4
        with pytest.raises(ScenarioSpecError) as err:
            synth.parse_scenario(tree)
        assert "MR3>MR4" in str(err.value)

    def test_unknown_flow_kind(self):
        tree = chain_scenario("badflow", flows=[{"kind": "carrier_pigeon", "rate_pps": 1, "payload_bytes": 10}])
        with pytest.raises(ScenarioSpecError) as err:
            synth.parse_scenario(tree)
        assert err.value.path == "flows[0].kind"

    def test_routes_must_share_endpoints(self):
        tree = chain_scenario("badroutes")
        tree["routes"] = [{"path": ["MR1", "MR2", "MR3", "MR4"], "until_s": 5},
                          {"path": ["MR2", "MR3", "MR4"]}]
        with pytest.raises(ScenarioSpecError):
            synth.parse_scenario(tree)


class TestGenerate:
    def test_lossless_all_delivered(self):
        bundle = synth.generate(synth.parse_scenario(chain_scenario("clean", seed=61, duration_s=5)))
        tally = bundle.tally()
        assert tally["delivered"] == tally["sent"] == 250

    def test_same_seed_byte_identical(self):
        tree = chain_scenario("twin", seed=62, duration_s=5)
        a = synth.generate(synth.parse_scenario(tree))
        b = synth.generate(synth.parse_scenario(tree))
        assert a.captures == b.captures
        assert a.nmea == b.nmea
        assert a.logs == b.logs
        assert synth.format_truth(a) == synth.format_truth(b)

    def test_different_seed_differs(self):
        base = chain_scenario("twin", seed=62, duration_s=5,
                              link_extra={"MR1>MR2": {"drop": {"probability": 0.2}}})
        other = dict(base, seed=63)
        a = synth.generate(synth.parse_scenario(base))
        b = synth.generate(synth.parse_scenario(other))
        assert a.tally() != b.tally() or a.captures != b.captures

    def test_truth_records_realized_draws(self):
        tree = chain_scenario("realized", seed=64, duration_s=20,
                              link_extra={"MR2>MR3": {"drop": {"probability": 0.2}}})
        bundle = synth.generate(synth.parse_scenario(tree))
        tally = bundle.tally()
        k = tally["link_loss"]["MR2>MR3"]
        assert 0 < k < 1000
        assert tally["delivered"] == 1000 - k

    def test_truth_fate_partition(self):
        tree = chain_scenario("partition", seed=65, duration_s=10,
                              node_extra={"MR2": {"in_node_drop": {"probability": 0.3}}},
                              link_extra={"MR3>MR4": {"drop": {"probability": 0.3}}})
        bundle = synth.generate(synth.parse_scenario(tree))
        t = bundle.tally()
        assert (t["delivered"] + sum(t["link_loss"].values())
                + sum(t["in_node_loss"].values()) + t["unobserved"] + t["ambiguous"]) == t["sent"]

    def test_captures_parse_clean(self):
        bundle = synth.generate(synth.parse_scenario(chain_scenario("parses", seed=66, duration_s=3)))
        for name, data in bundle.captures.items():
            cap = read_capture(data, NodeId(name))
            assert cap.malformed_frames == 0
            assert cap.skipped_frames == 0

    def test_nmea_checksums_all_valid(self):
        bundle = synth.generate(synth.parse_scenario(chain_scenario("navok", seed=67, duration_s=3)))
        for text in bundle.nmea.values():
            lines = [l for l in text.splitlines() if l.strip()]
            assert lines
            assert all(parse_sentence(line).checksum_ok for line in lines)

    def test_deterministic_drop_schedule_is_exact(self):
        tree = chain_scenario("exact70", seed=68, duration_s=10, rate_pps=100,
                              node_extra={"MR2": {"in_node_drop": {"modulo": [10, 7]}}})
        bundle = synth.generate(synth.parse_scenario(tree))
        tally = bundle.tally()
        assert tally["in_node_loss"]["MR2"] == 700
        assert tally["delivered"] == 300


class TestBundleIo:
    def test_write_and_load_truth(self, tmp_path):
        bundle = synth.generate(synth.parse_scenario(chain_scenario("disk", seed=69, duration_s=3)))
        synth.write_bundle(bundle, tmp_path / "b")
        truth = synth.load_truth(tmp_path / "b")
        assert truth["tally"] == bundle.tally()
        assert (tmp_path / "b/scenario.json").exists()
        assert (tmp_path / "b/captures/MR1.pcap").exists()
        assert (tmp_path / "b/gps/MR1.nmea").exists()

    def test_scenario_round_trip(self, tmp_path):
        tree = chain_scenario("respec", seed=70, duration_s=3,
                              node_extra={"MR2": {"clock_skew_us": 50_000, "capture_loss": 0.1}},
                              link_extra={"MR1>MR2": {"drop": {"modulo": [5, 1]}}})
        bundle = synth.generate(synth.parse_scenario(tree))
        synth.write_bundle(bundle, tmp_path / "b")
        respec = synth.load_scenario(tmp_path / "b/scenario.json")
        assert respec == bundle.spec


class TestCompare:
    def test_oracle_equivalence_lossless(self, tmp_path):
        diffs, _, _ = oracle_loop(chain_scenario("equal", seed=71, duration_s=5), tmp_path)
        assert diffs == []

    def test_capture_gap_recovered(self, tmp_path):
        tree = chain_scenario("gapfix", seed=72, duration_s=10,
                              node_extra={"MR2": {"capture_loss": 0.4}})
        diffs, result, _ = oracle_loop(tree, tmp_path)
        assert diffs == []
        assert result.tally.delivered == result.tally.sent

    def test_single_corruption_single_diff(self, tmp_path):
        tree = chain_scenario("corrupt", seed=73, duration_s=3)
        diffs, result, bundle = oracle_loop(tree, tmp_path)
        assert diffs == []
        # Corrupt one slot's per-link counters by one packet.
        slot = result.report.data[0]
        bad_link = slot.links[0]
        object.__setattr__(bad_link, "sent", bad_link.sent + 1)
        truth = json.loads(synth.format_truth(bundle))
        entries = read_trace(format_trace(result.journeys))
        diffs = synth.compare(truth, result.report, entries)
        assert len(diffs) == 2  # the slot's link map and the per-link totals
        object.__setattr__(bad_link, "sent", bad_link.sent - 1)

    def test_packaged_scenarios_load(self):
        scenarios = synth.packaged_scenarios()
        assert len(scenarios) >= 10
        for expected in ("chain4", "handover", "bottleneck", "lossless_ping",
                         "skew_2s", "capture_gap"):
            assert expected in scenarios
