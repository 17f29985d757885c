#!/usr/bin/env python3
"""Walkthrough: generate a lossy four-vehicle run, analyze it, verify exactness.

The generator records every drop it makes; the analyzer must reproduce those
numbers exactly from the captures alone. This is the loop the acceptance
suite runs over the whole packaged scenario set.
"""

import tempfile
from pathlib import Path

from hoptrace import synth
from hoptrace.cli import RunPlan, analyze
from hoptrace.tracer import format_trace, read_trace

spec = synth.packaged_scenarios()["chain4_lossy"]
print(f"scenario: {spec.name} — {len(spec.nodes)} vehicles, "
      f"{spec.flows[0].rate_pps:.0f} packets/s for {spec.duration_s:.0f} s, "
      f"one link dropping 20%")

bundle = synth.generate(spec)
truth_tally = bundle.tally()
print(f"ground truth: sent {truth_tally['sent']}, delivered {truth_tally['delivered']}, "
      f"per-link losses {truth_tally['link_loss']}")

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    synth.write_bundle(bundle, tmp / "bundle")

    # The analyzer sees only what a real testbed would leave behind:
    # per-node pcap files, NMEA logs, and the iperf transcripts.
    plan = RunPlan(
        captures={n.name: tmp / "bundle/captures" / f"{n.name}.pcap" for n in spec.nodes},
        gps={n.name: tmp / "bundle/gps" / f"{n.name}.nmea" for n in spec.nodes},
        logs={f.stem: f for f in sorted((tmp / "bundle/logs").glob("*.log"))},
        sender=spec.sender, receiver=spec.receiver,
        out_dir=tmp / "out", name=spec.name,
    )
    result = analyze(plan)
    print(f"analyzed:     sent {result.tally.sent}, delivered {result.tally.delivered}, "
          f"per-link losses { {str(k): v for k, v in result.tally.link_loss.items()} }")

    diffs = synth.compare(synth.load_truth(tmp / "bundle"), result.report,
                          read_trace(format_trace(result.journeys)))
    print(f"comparison against truth: {len(diffs)} differences")
    assert diffs == []

    # A few journeys, as written to trace.txt.
    print("\nfirst packets:")
    for line in format_trace(result.journeys).splitlines()[2:6]:
        digest, flow, seq, fate, path, *_ = line.split("\t")
        print(f"  seq {seq:>3}  {fate:22s} via {path}")
