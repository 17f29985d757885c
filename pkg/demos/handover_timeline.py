#!/usr/bin/env python3
"""Walkthrough: watch a vehicle hand over between two roadside routers.

The handover scenario routes traffic through AR1 for the first 15 seconds
and AR2 afterwards. The per-slot link table makes the switch visible, and
the same data drives the plot exports and the map viewer.

Needs matplotlib only for the optional PNG at the end.
"""

import tempfile
from pathlib import Path

from hoptrace import synth
from hoptrace.cli import RunPlan, analyze
from hoptrace.report import emit_plot_series

spec = synth.packaged_scenarios()["handover"]
bundle = synth.generate(spec)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    synth.write_bundle(bundle, tmp / "bundle")
    result = analyze(RunPlan(
        captures={n.name: tmp / "bundle/captures" / f"{n.name}.pcap" for n in spec.nodes},
        gps={n.name: tmp / "bundle/gps" / f"{n.name}.nmea" for n in spec.nodes},
        logs={f.stem: f for f in sorted((tmp / "bundle/logs").glob("*.log"))},
        sender=spec.sender, receiver=spec.receiver,
        out_dir=tmp / "out", name=spec.name,
    ))

print("slot  active first hop     sent  delivered")
switch_slot = None
for slot in result.report.data:
    first_hops = [l for l in slot.links if l.link.src.name == "MR1"]
    active = ",".join(l.link.dst.name for l in first_hops) or "-"
    if switch_slot is None and any(l.link.dst.name == "AR2" for l in first_hops):
        switch_slot = slot.index
    e = slot.end_to_end
    print(f"{slot.index:4d}  {active:18s} {e.sent:4d}  {e.delivered:9d}")

print(f"\nroute switch first visible in slot {switch_slot}")

# The same series, exported in gnuplot form:
series = emit_plot_series(result.report, "sent", "link")
print("plot files:", ", ".join(sorted(series)))

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 3))
    for fname, content in sorted(series.items()):
        xs, ys = [], []
        for line in content.splitlines()[1:]:
            t, v = line.split()
            if v != "?":
                xs.append(float(t))
                ys.append(float(v))
        ax.plot(xs, ys, label=fname.removeprefix("link_").removesuffix("_sent.dat"))
    ax.set_xlabel("time (s)")
    ax.set_ylabel("packets sent on link")
    ax.legend()
    fig.tight_layout()
    out = Path(__file__).with_name("handover_links.png")
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")
except ImportError:
    print("matplotlib not installed; skipped the PNG")
