"""Shared helpers: building scenario trees and running the analysis loop."""

from pathlib import Path

import pytest

from hoptrace import synth
from hoptrace.cli import AnalysisResult, RunPlan, analyze
from hoptrace.tracer import format_trace, read_trace


def column_nodes(n=4, speed=10.0, **extra_by_name):
    """A column of vehicles 120 m apart heading north; extras merge per node."""
    nodes = []
    for i in range(n):
        lat0 = 48.8400 + i * 0.0011
        node = {
            "name": f"MR{i + 1}",
            "role": "mobile_router",
            "motion": {"waypoints": [[lat0, 2.1000], [lat0 + 0.0040, 2.1000]], "speed_mps": speed},
        }
        node.update(extra_by_name.get(node["name"], {}))
        nodes.append(node)
    return nodes


def chain_scenario(name, seed=1, n=4, duration_s=10, rate_pps=50, payload=400,
                   node_extra=None, link_extra=None, flows=None, **top):
    names = [f"MR{i + 1}" for i in range(n)]
    links = []
    for a, b in zip(names, names[1:]):
        item = {"src": a, "dst": b}
        item.update((link_extra or {}).get(f"{a}>{b}", {}))
        links.append(item)
    tree = {
        "name": name,
        "seed": seed,
        "duration_s": duration_s,
        "nodes": column_nodes(n, **(node_extra or {})),
        "links": links,
        "routes": [{"path": names}],
        "flows": flows or [{"kind": "udp", "rate_pps": rate_pps, "payload_bytes": payload}],
    }
    tree.update(top)
    return tree


def bundle_plan(bundle_dir: Path, spec, out_dir: Path, name=None) -> RunPlan:
    """RunPlan for a written bundle, mirroring what the CLI would build."""
    nodes = [n.name for n in spec.nodes]
    logs = {}
    for f in sorted((bundle_dir / "logs").glob("*.log")):
        logs[f.stem] = f
    return RunPlan(
        captures={n: bundle_dir / "captures" / f"{n}.pcap" for n in nodes},
        gps={n: bundle_dir / "gps" / f"{n}.nmea" for n in nodes},
        logs=logs,
        sender=spec.sender,
        receiver=spec.receiver,
        out_dir=out_dir,
        name=name or spec.name,
    )


def oracle_loop(tree_or_spec, tmp_path: Path):
    """synth -> analyze -> compare; returns (diffs, result, bundle)."""
    spec = tree_or_spec if isinstance(tree_or_spec, synth.ScenarioSpec) else synth.parse_scenario(tree_or_spec)
    bundle = synth.generate(spec)
    bdir = tmp_path / f"bundle_{spec.name}"
    synth.write_bundle(bundle, bdir)
    result = analyze(bundle_plan(bdir, spec, tmp_path / f"out_{spec.name}"))
    truth = synth.load_truth(bdir)
    diffs = synth.compare(truth, result.report, read_trace(format_trace(result.journeys)))
    return diffs, result, bundle


@pytest.fixture(scope="session")
def golden_dir():
    return Path(__file__).parent / "golden"
