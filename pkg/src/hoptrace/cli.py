"""Command line pipeline: analyze experiment bundles, generate synthetic
ground-truth scenarios, compare analyses against truth, export plot series.

Exit codes: 0 success, 2 completed with data-quality warnings, 1 failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import applogs, nmea, pcap, report as report_mod, synth, tracer
from .errors import (
    EmptyTrackError,
    HoptraceError,
    ScenarioSpecError,
    TruncatedCaptureError,
    UnrecognizedLogError,
    UnsupportedFormatError,
)
from .metrics import AppLogs, aggregate
from .model import NodeId, role_for_name
from .report import ExperimentReport, QualityCounters, emit_geojson, emit_plot_series, emit_report, parse_report
from .tracer import FlowPattern, classify_fates, estimate_clock_offsets, format_trace, read_trace, reconstruct_journeys

log = logging.getLogger("hoptrace")

PLOT_EXPORTS = (
    ("end_to_end", "pdr"),
    ("end_to_end", "throughput_bps"),
    ("end_to_end", "rtt_avg_ms"),
    ("end_to_end", "jitter_rtt_ms"),
    ("link", "pdr"),
    ("link", "throughput_bps"),
    ("link", "distance_m"),
    ("node", "speed_mps"),
)


@dataclass
class RunPlan:
    captures: dict[str, Path]
    gps: dict[str, Path] = field(default_factory=dict)
    logs: dict[str, Path] = field(default_factory=dict)
    sender: str = ""
    receiver: str = ""
    flow: FlowPattern | None = None
    slot_width_us: int = 1_000_000
    out_dir: Path = Path(".")
    name: str = "experiment"

    def validate(self) -> None:
        if not self.captures:
            raise HoptraceError("analyze needs at least one --capture NODE=PATH")
        if not self.sender or not self.receiver:
            raise HoptraceError("analyze needs --sender and --receiver")
        if self.sender == self.receiver:
            raise HoptraceError("sender and receiver must differ")
        paths = [*self.captures.values(), *self.gps.values(), *self.logs.values()]
        if len(paths) != len(set(paths)):
            raise HoptraceError("input paths must be distinct")


@dataclass
class AnalysisResult:
    report: ExperimentReport
    journeys: list
    tally: tracer.FateTally
    quality: QualityCounters


def analyze(plan: RunPlan) -> AnalysisResult:
    """Run the full pipeline in memory; the caller writes artifacts."""
    plan.validate()
    quality = QualityCounters()
    truncated = 0

    captures = []
    for name in sorted(plan.captures):
        path = plan.captures[name]
        node = NodeId(name, role_for_name(name))
        data = _read_bytes(path)
        try:
            cap = pcap.read_capture(data, node)
        except TruncatedCaptureError as err:
            log.warning("capture %s truncated: %s", path, err)
            cap = err.partial
            truncated += 1
        captures.append(cap)
        quality.malformed_frames += cap.malformed_frames
        quality.skipped_frames += cap.skipped_frames
    quality.truncated_captures = truncated

    tracks = {}
    for name in sorted(plan.gps):
        node = NodeId(name, role_for_name(name))
        text = _read_bytes(plan.gps[name]).decode("utf-8", errors="replace")
        try:
            track, counters = nmea.parse_track(text, node)
            tracks[node] = track
        except EmptyTrackError as err:
            log.warning("gps %s: %s", plan.gps[name], err)
            counters = nmea.TrackCounters(invalid_sentences=1)
        quality.checksum_failures += counters.checksum_failures
        quality.unknown_sentences += counters.unknown_sentences
        quality.invalid_sentences += counters.invalid_sentences
        quality.duplicate_fixes += counters.duplicate_fixes
        quality.jump_fixes += counters.jump_fixes

    app = AppLogs()
    for role in sorted(plan.logs):
        # The role's prefix names the side; the format is detected from content.
        side = "receiver" if role.startswith("receiver") else "sender"
        text = _read_bytes(plan.logs[role]).decode("utf-8", errors="replace")
        parsed = _parse_app_log(text, side)
        if parsed is None:
            log.warning("log %s: unrecognized format", plan.logs[role])
            quality.rejected_log_lines += 1
            continue
        if isinstance(parsed, applogs.PingLog):
            app.ping = parsed
        else:
            if side == "receiver":
                app.iperf_receiver = parsed
            else:
                app.iperf_sender = parsed
            quality.rejected_log_lines += parsed.rejected_lines

    sender = NodeId(plan.sender, role_for_name(plan.sender))
    receiver = NodeId(plan.receiver, role_for_name(plan.receiver))
    offsets = estimate_clock_offsets(captures, sender)
    quality.unknown_offset_nodes = tuple(sorted(n.name for n in offsets.unknown))

    counters = tracer.TraceCounters()
    journeys = reconstruct_journeys(
        captures, offsets, sender, receiver, flow_filter=plan.flow, counters=counters
    )
    quality.ignored_journeys = counters.ignored_journeys
    quality.ambiguous_journeys = counters.ambiguous_journeys
    quality.retransmissions = counters.retransmissions

    tally = classify_fates(journeys)
    slotting, slots = aggregate(journeys, tracks, app, slot_width_us=plan.slot_width_us)

    nodes = sorted(
        {c.node for c in captures} | set(tracks) | {sender, receiver}, key=lambda n: n.name
    )
    exp_report = ExperimentReport(
        experiment_id=f"{plan.name}-{slotting.t0}",
        name=plan.name,
        started_at_us=slotting.t0,
        slot_width_s=plan.slot_width_us / 1_000_000,
        nodes=tuple(nodes),
        clock_offsets_us={n.name: off for n, off in sorted(offsets.offsets.items(), key=lambda kv: kv[0].name)},
        scenario={
            "sender": plan.sender,
            "receiver": plan.receiver,
            "flow": _flow_text(plan.flow),
            "inputs": {
                "captures": {k: plan.captures[k].name for k in sorted(plan.captures)},
                "gps": {k: plan.gps[k].name for k in sorted(plan.gps)},
                "logs": {k: plan.logs[k].name for k in sorted(plan.logs)},
            },
        },
        quality=quality,
        data=tuple(slots),
    )
    return AnalysisResult(report=exp_report, journeys=journeys, tally=tally, quality=quality)


def _read_bytes(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as err:
        raise HoptraceError(f"cannot read {path}: {err.strerror}")


def _parse_app_log(text: str, side: str):
    try:
        return applogs.parse_ping_log(text)
    except UnrecognizedLogError:
        pass
    try:
        return applogs.parse_iperf_udp_log(text, side=side)
    except UnrecognizedLogError:
        pass
    try:
        return applogs.parse_iperf_tcp_log(text, side=side)
    except UnrecognizedLogError:
        return None


def _flow_text(flow: FlowPattern | None) -> str | None:
    if flow is None:
        return None
    parts = [flow.proto or "*"]
    if flow.src_ip or flow.dst_ip or flow.dst_port:
        parts += [flow.src_ip or "*", flow.dst_ip or "*", str(flow.dst_port or "*")]
    return ":".join(parts)


def run_analyze(plan: RunPlan) -> int:
    try:
        result = analyze(plan)
    except HoptraceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1

    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_bytes(emit_report(result.report))
    (out / "trace.txt").write_text(format_trace(result.journeys), encoding="utf-8")
    (out / "track.geojson").write_bytes(emit_geojson(result.report))
    plots = out / "plots"
    plots.mkdir(exist_ok=True)
    for scope, metric in PLOT_EXPORTS:
        for fname, content in emit_plot_series(result.report, metric, scope).items():
            (plots / fname).write_text(content, encoding="utf-8")

    _print_summary(result)
    print(f"artifacts: {out}/report.json trace.txt track.geojson plots/")
    return 2 if result.quality.has_warnings() else 0


def _print_summary(result: AnalysisResult) -> None:
    t = result.tally
    pdr = f"{100.0 * t.delivered / t.sent:.3f}%" if t.sent else "n/a"
    print(f"{result.report.name}: sent {t.sent}  delivered {t.delivered}  pdr {pdr}")

    link_totals: dict[str, list[int]] = {}
    for slot in result.report.data:
        for l in slot.links:
            sent_recv = link_totals.setdefault(str(l.link), [0, 0])
            sent_recv[0] += l.sent
            sent_recv[1] += l.received
    if link_totals:
        worst = min(
            link_totals.items(),
            key=lambda kv: (kv[1][1] / kv[1][0] if kv[1][0] else 1.0, kv[0]),
        )
        name, (sent, received) = worst
        ratio = 100.0 * received / sent if sent else 100.0
        print(f"worst link: {name}  pdr {ratio:.3f}% ({received}/{sent})")
    losses = ", ".join(
        f"{k}={v}"
        for k, v in (
            ("link_loss", sum(t.link_loss.values())),
            ("in_node_loss", sum(t.in_node_loss.values())),
            ("unobserved", t.unobserved),
            ("ambiguous", t.ambiguous),
        )
        if v
    )
    print(f"losses: {losses}" if losses else "losses: none")
    q = result.quality
    flags = {
        name: getattr(q, name)
        for name in (
            "malformed_frames", "truncated_captures", "checksum_failures",
            "invalid_sentences", "jump_fixes", "rejected_log_lines", "ambiguous_journeys",
        )
        if getattr(q, name)
    }
    if q.unknown_offset_nodes:
        flags["unknown_offset_nodes"] = ",".join(q.unknown_offset_nodes)
    print(f"data quality: {flags}" if flags else "data quality: clean")


def run_synth(spec_path: Path, out_dir: Path) -> int:
    try:
        spec = synth.load_scenario(spec_path)
        bundle = synth.generate(spec)
    except (ScenarioSpecError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    synth.write_bundle(bundle, out_dir)
    tally = bundle.tally()
    print(f"{spec.name}: wrote bundle to {out_dir} "
          f"(sent {tally['sent']}, delivered {tally['delivered']})")
    return 0


def run_compare(truth_dir: Path, analyzed_dir: Path) -> int:
    try:
        truth = synth.load_truth(truth_dir)
        report = parse_report(Path(analyzed_dir, "report.json").read_bytes())
        entries = read_trace(Path(analyzed_dir, "trace.txt").read_text(encoding="utf-8"))
    except (OSError, HoptraceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    diffs = synth.compare(truth, report, entries)
    if not diffs:
        print("match: analysis equals ground truth")
        return 0
    for d in diffs:
        print(f"diff: {d}")
    print(f"{len(diffs)} difference(s)")
    return 1


def run_plot(report_path: Path, metric: str, scope: str, out_dir: Path) -> int:
    try:
        report = parse_report(Path(report_path).read_bytes())
        series = emit_plot_series(report, metric, scope)
    except (OSError, HoptraceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for fname, content in series.items():
        (out / fname).write_text(content, encoding="utf-8")
        print(f"wrote {out / fname}")
    return 0


def _parse_node_path(values: list[str], flag: str) -> dict[str, Path]:
    out: dict[str, Path] = {}
    for value in values or []:
        if "=" not in value:
            raise HoptraceError(f"{flag} expects NODE=PATH, got {value!r}")
        name, path = value.split("=", 1)
        if name in out:
            raise HoptraceError(f"{flag}: duplicate entry for {name!r}")
        out[name] = Path(path)
    return out


_FLOW_BRACKETED = re.compile(r"^(?P<proto>\w+):\[(?P<src>[^\]]*)\]:\[(?P<dst>[^\]]*)\]:(?P<port>\d+)$")


def parse_flow(text: str) -> FlowPattern:
    """PROTO, PROTO:SRC:DST:PORT (IPv4), or PROTO:[SRC]:[DST]:PORT (IPv6)."""
    m = _FLOW_BRACKETED.match(text)
    if m:
        return FlowPattern(proto=m.group("proto"), src_ip=m.group("src") or None,
                           dst_ip=m.group("dst") or None, dst_port=int(m.group("port")))
    parts = text.split(":")
    if len(parts) == 1:
        return FlowPattern(proto=parts[0])
    if len(parts) == 4:
        return FlowPattern(proto=parts[0], src_ip=parts[1] or None,
                           dst_ip=parts[2] or None, dst_port=int(parts[3]))
    raise HoptraceError(f"cannot parse --flow {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hoptrace",
        description="Correlate per-node captures, GPS tracks and traffic logs from "
        "multi-hop wireless experiments into per-packet paths and per-second statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze an experiment bundle")
    p.add_argument("--capture", action="append", metavar="NODE=PATH", default=[],
                   help="pcap capture for one node (repeatable)")
    p.add_argument("--gps", action="append", metavar="NODE=PATH", default=[],
                   help="NMEA file for one node (repeatable)")
    p.add_argument("--log", action="append", metavar="ROLE=PATH", default=[],
                   help="traffic-generator log, ROLE is sender or receiver")
    p.add_argument("--sender", required=True, help="flow attachment node at the sending side")
    p.add_argument("--receiver", required=True, help="flow attachment node at the receiving side")
    p.add_argument("--flow", default=None,
                   help="flow filter: PROTO, PROTO:SRC:DST:PORT or PROTO:[SRC]:[DST]:PORT")
    p.add_argument("--slot-ms", type=int, default=1000, help="slot width in milliseconds")
    p.add_argument("--name", default=None, help="experiment name (default: output directory name)")
    p.add_argument("--out", required=True, metavar="DIR")

    p = sub.add_parser("synth", help="generate a synthetic ground-truth bundle")
    p.add_argument("--spec", required=True, metavar="PATH", help="scenario spec JSON")
    p.add_argument("--out", required=True, metavar="DIR")

    p = sub.add_parser("compare", help="compare an analysis against ground truth")
    p.add_argument("--truth", required=True, metavar="DIR", help="bundle directory with truth/")
    p.add_argument("--analyzed", required=True, metavar="DIR", help="directory with report.json and trace.txt")

    p = sub.add_parser("plot", help="export one metric as plot-ready columns")
    p.add_argument("--report", required=True, metavar="PATH")
    p.add_argument("--metric", required=True)
    p.add_argument("--scope", required=True, choices=["end_to_end", "link", "node"])
    p.add_argument("--out", default=".", metavar="DIR")
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("HOPTRACE_LOG", "WARNING").upper()
    if level not in ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"):
        level = "WARNING"
    logging.basicConfig(level=level)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            out = Path(args.out)
            plan = RunPlan(
                captures=_parse_node_path(args.capture, "--capture"),
                gps=_parse_node_path(args.gps, "--gps"),
                logs=_parse_node_path(args.log, "--log"),
                sender=args.sender,
                receiver=args.receiver,
                flow=parse_flow(args.flow) if args.flow else None,
                slot_width_us=args.slot_ms * 1000,
                out_dir=out,
                name=args.name or out.name,
            )
            return run_analyze(plan)
        if args.command == "synth":
            return run_synth(Path(args.spec), Path(args.out))
        if args.command == "compare":
            return run_compare(Path(args.truth), Path(args.analyzed))
        if args.command == "plot":
            return run_plot(Path(args.report), args.metric, args.scope, Path(args.out))
    except HoptraceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
