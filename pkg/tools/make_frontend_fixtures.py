#!/usr/bin/env python3
"""Produce the viewer's test fixtures from analyzer output: the golden
report/track pair plus the handover scenario with its truth switch slot."""

import json
import sys
import tempfile
from pathlib import Path

from hoptrace import synth
from hoptrace.cli import RunPlan, analyze
from hoptrace.report import emit_geojson, emit_report

sys.path.insert(0, str(Path(__file__).resolve().parent))
from regen_golden import GOLDEN_SCENARIO


def run(spec, out: Path, name: str) -> None:
    bundle = synth.generate(spec)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        synth.write_bundle(bundle, tmp / "b")
        result = analyze(RunPlan(
            captures={n.name: tmp / "b/captures" / f"{n.name}.pcap" for n in spec.nodes},
            gps={n.name: tmp / "b/gps" / f"{n.name}.nmea" for n in spec.nodes},
            logs={f.stem: f for f in sorted((tmp / "b/logs").glob("*.log"))},
            sender=spec.sender, receiver=spec.receiver,
            out_dir=tmp / "o", name=name,
        ))
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_bytes(emit_report(result.report))
    (out / "track.geojson").write_bytes(emit_geojson(result.report))
    return bundle


def main() -> None:
    fixtures = Path(__file__).resolve().parents[1] / "frontend" / "fixtures"
    run(synth.parse_scenario(GOLDEN_SCENARIO), fixtures / "golden", "golden")

    spec = synth.packaged_scenarios()["handover"]
    run(spec, fixtures / "handover", "handover")
    # The slot where the route switches, straight from the scenario truth.
    switch_s = next(r.until_s for r in spec.routes if r.until_s is not None)
    (fixtures / "handover" / "truth.json").write_text(
        json.dumps({"switch_slot": int(switch_s), "old_first_hop": ["MR1", "AR1"],
                    "new_first_hop": ["MR1", "AR2"]}, indent=2) + "\n")
    # Paths are relative to the served page (frontend/index.html).
    (fixtures / "experiments.json").write_text(json.dumps([
        {"label": "golden", "report": "fixtures/golden/report.json",
         "track": "fixtures/golden/track.geojson"},
        {"label": "handover", "report": "fixtures/handover/report.json",
         "track": "fixtures/handover/track.geojson"},
    ], indent=2) + "\n")
    print(f"fixtures written to {fixtures}")


if __name__ == "__main__":
    main()
