#!/usr/bin/env python3
"""Walkthrough: tell a forwarding-stack bottleneck apart from radio loss.

A relay that drops packets in software looks identical to a bad radio link
in any end-to-end measurement. Hop-by-hop accounting separates the two:
here every wireless link delivers 100% while the end-to-end ratio collapses,
and the missing packets are pinned to the relay itself.
"""

import tempfile
from pathlib import Path

from hoptrace import synth
from hoptrace.cli import RunPlan, analyze

spec = synth.packaged_scenarios()["bottleneck"]
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

tally = result.tally
e2e_pdr = 100.0 * tally.delivered / tally.sent

link_totals = {}
for slot in result.report.data:
    for link in slot.links:
        sent, received = link_totals.get(str(link.link), (0, 0))
        link_totals[str(link.link)] = (sent + link.sent, received + link.received)

print(f"sent {tally.sent}, delivered {tally.delivered} -> end-to-end PDR {e2e_pdr:.1f}%")
print("per-link delivery:")
for name, (sent, received) in sorted(link_totals.items()):
    print(f"  {name:10s} {received}/{sent}  ({100.0 * received / sent:.1f}%)")
print("loss attribution:")
for node, count in sorted(tally.in_node_loss.items(), key=lambda kv: kv[0].name):
    print(f"  dropped inside {node}: {count}")

assert all(s == r for s, r in link_totals.values()), "links are lossless"
assert e2e_pdr <= 30.0
