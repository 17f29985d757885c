#!/usr/bin/env python3
"""Regenerate the checked-in golden artifacts under tests/golden/.

Run only when an intentional format change invalidates them; review the diff
before committing.
"""

import sys
import tempfile
from pathlib import Path

from hoptrace import synth
from hoptrace.cli import analyze, RunPlan
from hoptrace.report import emit_geojson, emit_report
from hoptrace.tracer import format_trace

GOLDEN_SCENARIO = {
    "name": "golden",
    "seed": 4242,
    "duration_s": 1,
    "nodes": [
        {"name": "MR1", "role": "mobile_router",
         "motion": {"waypoints": [[48.8400, 2.1000], [48.8440, 2.1000]], "speed_mps": 10.0}},
        {"name": "MR2", "role": "mobile_router",
         "motion": {"waypoints": [[48.8411, 2.1000], [48.8451, 2.1000]], "speed_mps": 10.0}},
        {"name": "MR3", "role": "mobile_router",
         "motion": {"waypoints": [[48.8422, 2.1000]], "speed_mps": 0.0}},
    ],
    "links": [{"src": "MR1", "dst": "MR2"}, {"src": "MR2", "dst": "MR3"}],
    "routes": [{"path": ["MR1", "MR2", "MR3"]}],
    "flows": [{"kind": "udp", "rate_pps": 40, "payload_bytes": 400}],
}


def main(out_dir: Path) -> None:
    spec = synth.parse_scenario(GOLDEN_SCENARIO)
    bundle = synth.generate(spec)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        synth.write_bundle(bundle, tmp / "bundle")
        plan = RunPlan(
            captures={n.name: tmp / "bundle/captures" / f"{n.name}.pcap" for n in spec.nodes},
            gps={n.name: tmp / "bundle/gps" / f"{n.name}.nmea" for n in spec.nodes},
            logs={f.stem: f for f in sorted((tmp / "bundle/logs").glob("*.log"))},
            sender=spec.sender, receiver=spec.receiver,
            out_dir=tmp / "out", name="golden",
        )
        result = analyze(plan)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_bytes(emit_report(result.report))
        (out_dir / "trace.txt").write_text(format_trace(result.journeys), encoding="utf-8")
        (out_dir / "track.geojson").write_bytes(emit_geojson(result.report))
        (out_dir / "truth.json").write_text(synth.format_truth(bundle), encoding="utf-8")
    print(f"golden artifacts written to {out_dir}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "tests/golden")
