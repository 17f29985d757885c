"""The structured experiment report: a three-layer JSON document plus
plot-ready column files and GeoJSON track export.

Layers: `experiment` (static attributes and data-quality counters), `data`
(one entry per time slot) and, inside each slot, `nodes` and `links`. All
attribute names are lower_snake_case; missing measurements are omitted, never
null, so 0 always means a measured zero. Emission is byte-deterministic:
fixed key order, floats capped at six fractional digits. Unknown keys survive
a parse/emit round trip through per-object extension maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ReportSchemaError, UnknownMetricError
from .metrics import EndToEndSlotStats, LinkSlotStats, NodeSlotStats, SlotRecord
from .model import LinkId, NodeId, Role, Timestamp

FORMAT_VERSION = 1

ABSENT = "?"  # plot-file placeholder for a missing value

WARNING_COUNTERS = (
    "malformed_frames",
    "truncated_captures",
    "checksum_failures",
    "invalid_sentences",
    "jump_fixes",
    "rejected_log_lines",
    "ambiguous_journeys",
)


@dataclass
class QualityCounters:
    malformed_frames: int = 0
    skipped_frames: int = 0
    truncated_captures: int = 0
    checksum_failures: int = 0
    unknown_sentences: int = 0
    invalid_sentences: int = 0
    duplicate_fixes: int = 0
    jump_fixes: int = 0
    rejected_log_lines: int = 0
    ignored_journeys: int = 0
    ambiguous_journeys: int = 0
    retransmissions: int = 0
    unknown_offset_nodes: tuple[str, ...] = ()

    def has_warnings(self) -> bool:
        if self.unknown_offset_nodes:
            return True
        return any(getattr(self, name) for name in WARNING_COUNTERS)


@dataclass
class ExperimentReport:
    experiment_id: str
    name: str
    started_at_us: Timestamp
    slot_width_s: float
    nodes: tuple[NodeId, ...]
    clock_offsets_us: dict[str, int]
    scenario: dict
    quality: QualityCounters
    data: tuple[SlotRecord, ...]
    extensions: dict = field(default_factory=dict)


def _q6(x: float) -> float:
    return float(f"{x:.6f}")


def _num(x):
    return x if isinstance(x, int) else _q6(x)


def _put(obj: dict, key: str, value) -> None:
    if value is not None:
        obj[key] = _num(value) if isinstance(value, (int, float)) and not isinstance(value, bool) else value


def emit_report(report: ExperimentReport) -> bytes:
    """Serialize to UTF-8 JSON. Pure function of the report value."""
    _validate_report_value(report)
    tree = {
        "format_version": FORMAT_VERSION,
        "experiment": _experiment_tree(report),
        "data": [_slot_tree(slot) for slot in report.data],
    }
    return (json.dumps(tree, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _experiment_tree(report: ExperimentReport) -> dict:
    exp = {
        "id": report.experiment_id,
        "name": report.name,
        "started_at_us": report.started_at_us,
        "slot_width_s": _num(report.slot_width_s),
        "nodes": [{"name": n.name, "role": n.role.value} for n in report.nodes],
        "clock_offsets_us": {k: report.clock_offsets_us[k] for k in sorted(report.clock_offsets_us)},
        "scenario": _plain(report.scenario),
        "quality": {
            "malformed_frames": report.quality.malformed_frames,
            "skipped_frames": report.quality.skipped_frames,
            "truncated_captures": report.quality.truncated_captures,
            "checksum_failures": report.quality.checksum_failures,
            "unknown_sentences": report.quality.unknown_sentences,
            "invalid_sentences": report.quality.invalid_sentences,
            "duplicate_fixes": report.quality.duplicate_fixes,
            "jump_fixes": report.quality.jump_fixes,
            "rejected_log_lines": report.quality.rejected_log_lines,
            "ignored_journeys": report.quality.ignored_journeys,
            "ambiguous_journeys": report.quality.ambiguous_journeys,
            "retransmissions": report.quality.retransmissions,
            "unknown_offset_nodes": list(report.quality.unknown_offset_nodes),
        },
    }
    _merge_extensions(exp, report.extensions)
    return exp


def _slot_tree(slot: SlotRecord) -> dict:
    e = slot.end_to_end
    ee: dict = {}
    _put(ee, "sent", e.sent)
    _put(ee, "delivered", e.delivered)
    _put(ee, "pdr", e.pdr)
    _put(ee, "bytes", e.bytes)
    _put(ee, "throughput_bps", e.throughput_bps)
    _put(ee, "rtt_avg_ms", e.rtt_avg_ms)
    _put(ee, "jitter_rtt_ms", e.jitter_rtt_ms)
    _put(ee, "jitter_iperf_ms", e.jitter_iperf_ms)
    _put(ee, "hop_count", e.hop_count)
    _put(ee, "hop_count_min", e.hop_count_min)
    _put(ee, "hop_count_max", e.hop_count_max)
    _merge_extensions(ee, e.extensions)

    nodes = []
    for n in slot.nodes:
        item = {
            "name": n.node.name,
            "lat": _q6(n.lat),
            "lon": _q6(n.lon),
            "speed_mps": _q6(n.speed),
            "extrapolated": n.extrapolated,
        }
        _merge_extensions(item, n.extensions)
        nodes.append(item)

    links = []
    for l in slot.links:
        item = {"src": l.link.src.name, "dst": l.link.dst.name}
        _put(item, "sent", l.sent)
        _put(item, "received", l.received)
        _put(item, "pdr", l.pdr)
        _put(item, "bytes", l.bytes)
        _put(item, "throughput_bps", l.throughput_bps)
        _put(item, "distance_m", l.distance_m)
        _merge_extensions(item, l.extensions)
        links.append(item)

    tree = {"slot": slot.index, "time_us": slot.time, "end_to_end": ee, "nodes": nodes, "links": links}
    _merge_extensions(tree, slot.extensions)
    return tree


def _merge_extensions(obj: dict, extensions: dict) -> None:
    for key in sorted(extensions):
        if key not in obj:
            obj[key] = _plain(extensions[key])


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float):
        return _q6(value)
    return value


def _validate_report_value(report: ExperimentReport) -> None:
    declared = {n.name for n in report.nodes}
    last_time = None
    for i, slot in enumerate(report.data):
        if last_time is not None and slot.time <= last_time:
            raise ReportSchemaError("data not ordered by time", f"data[{i}].time_us")
        last_time = slot.time
        e = slot.end_to_end
        if e.delivered > e.sent:
            raise ReportSchemaError("delivered exceeds sent", f"data[{i}].end_to_end.delivered")
        for k, l in enumerate(slot.links):
            if l.received > l.sent:
                raise ReportSchemaError("received exceeds sent", f"data[{i}].links[{k}].received")
            for name in (l.link.src.name, l.link.dst.name):
                if name not in declared and not name.startswith("mac:"):
                    raise ReportSchemaError(f"undeclared node {name!r}", f"data[{i}].links[{k}]")
        for k, n in enumerate(slot.nodes):
            if n.node.name not in declared:
                raise ReportSchemaError(f"undeclared node {n.node.name!r}", f"data[{i}].nodes[{k}]")


# --- parsing -----------------------------------------------------------------

_ROLES = {r.value: r for r in Role}


def parse_report(data: bytes | str) -> ExperimentReport:
    """Parse and schema-validate a report; unknown keys land in extensions."""
    try:
        tree = json.loads(data)
    except json.JSONDecodeError as err:
        raise ReportSchemaError(f"not valid JSON: {err}", "$")
    if not isinstance(tree, dict):
        raise ReportSchemaError("top level must be an object", "$")
    version = tree.get("format_version")
    if version != FORMAT_VERSION:
        raise ReportSchemaError(f"unsupported format_version {version!r}", "format_version")
    exp = _require(tree, "experiment", dict, "experiment")
    data_list = _require(tree, "data", list, "data")

    nodes = []
    for i, item in enumerate(_require(exp, "nodes", list, "experiment.nodes")):
        path = f"experiment.nodes[{i}]"
        if not isinstance(item, dict):
            raise ReportSchemaError("node entry must be an object", path)
        name = _require(item, "name", str, f"{path}.name")
        role = item.get("role", "other")
        if role not in _ROLES:
            raise ReportSchemaError(f"unknown role {role!r}", f"{path}.role")
        nodes.append(NodeId(name, _ROLES[role]))
    node_by_name = {n.name: n for n in nodes}

    quality_tree = exp.get("quality", {})
    if not isinstance(quality_tree, dict):
        raise ReportSchemaError("quality must be an object", "experiment.quality")
    quality_kwargs = {}
    for k, v in quality_tree.items():
        if k not in QualityCounters.__dataclass_fields__:
            continue
        if k == "unknown_offset_nodes":
            if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
                raise ReportSchemaError("expected a list of node names", f"experiment.quality.{k}")
            quality_kwargs[k] = tuple(v)
        else:
            quality_kwargs[k] = _expect_int(v, f"experiment.quality.{k}")
    quality = QualityCounters(**quality_kwargs)

    offsets_tree = exp.get("clock_offsets_us", {})
    if not isinstance(offsets_tree, dict):
        raise ReportSchemaError("must be an object", "experiment.clock_offsets_us")
    scenario = exp.get("scenario", {})
    if not isinstance(scenario, dict):
        raise ReportSchemaError("must be an object", "experiment.scenario")

    known_exp = {"id", "name", "started_at_us", "slot_width_s", "nodes", "clock_offsets_us", "scenario", "quality"}
    slots = tuple(
        _parse_slot(item, i, node_by_name) for i, item in enumerate(data_list)
    )
    report = ExperimentReport(
        experiment_id=_require(exp, "id", str, "experiment.id"),
        name=_require(exp, "name", str, "experiment.name"),
        started_at_us=_expect_int(_require(exp, "started_at_us", (int,), "experiment.started_at_us"), "experiment.started_at_us"),
        slot_width_s=_expect_number(_require(exp, "slot_width_s", (int, float), "experiment.slot_width_s"), "experiment.slot_width_s"),
        nodes=tuple(nodes),
        clock_offsets_us={k: _expect_int(v, f"experiment.clock_offsets_us.{k}") for k, v in offsets_tree.items()},
        scenario=scenario,
        quality=quality,
        data=slots,
        extensions={k: v for k, v in exp.items() if k not in known_exp},
    )
    _validate_report_value(report)
    return report


def _require(obj: dict, key: str, types, path: str):
    if key not in obj:
        raise ReportSchemaError(f"missing required key {key!r}", path)
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ReportSchemaError(f"wrong type for {key!r}", path)
    return value


def _expect_int(value, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ReportSchemaError("expected an integer", path)
    return value


def _expect_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ReportSchemaError("expected a number", path)
    return value


def _optional_int(obj: dict, key: str, path: str):
    if key not in obj:
        return None
    return _expect_int(obj[key], f"{path}.{key}")


def _optional_number(obj: dict, key: str, path: str, lo=None, hi=None):
    if key not in obj:
        return None
    value = _expect_number(obj[key], f"{path}.{key}")
    if lo is not None and value < lo:
        raise ReportSchemaError(f"{key} below {lo}", f"{path}.{key}")
    if hi is not None and value > hi:
        raise ReportSchemaError(f"{key} above {hi}", f"{path}.{key}")
    return value


def _parse_slot(item, i: int, node_by_name) -> SlotRecord:
    path = f"data[{i}]"
    if not isinstance(item, dict):
        raise ReportSchemaError("slot entry must be an object", path)
    ee_tree = _require(item, "end_to_end", dict, f"{path}.end_to_end")
    ee_path = f"{path}.end_to_end"
    sent = _expect_int(ee_tree.get("sent", 0), f"{ee_path}.sent")
    delivered = _expect_int(ee_tree.get("delivered", 0), f"{ee_path}.delivered")
    known_ee = {
        "sent", "delivered", "pdr", "bytes", "throughput_bps", "rtt_avg_ms",
        "jitter_rtt_ms", "jitter_iperf_ms", "hop_count", "hop_count_min", "hop_count_max",
    }
    end_to_end = EndToEndSlotStats(
        sent=sent,
        delivered=delivered,
        pdr=_optional_number(ee_tree, "pdr", ee_path, 0.0, 100.0),
        bytes=_expect_int(ee_tree.get("bytes", 0), f"{ee_path}.bytes"),
        throughput_bps=_expect_number(ee_tree.get("throughput_bps", 0.0), f"{ee_path}.throughput_bps"),
        rtt_avg_ms=_optional_number(ee_tree, "rtt_avg_ms", ee_path, 0.0),
        jitter_rtt_ms=_optional_number(ee_tree, "jitter_rtt_ms", ee_path, 0.0),
        jitter_iperf_ms=_optional_number(ee_tree, "jitter_iperf_ms", ee_path, 0.0),
        hop_count=_optional_int(ee_tree, "hop_count", ee_path),
        hop_count_min=_optional_int(ee_tree, "hop_count_min", ee_path),
        hop_count_max=_optional_int(ee_tree, "hop_count_max", ee_path),
        extensions={k: v for k, v in ee_tree.items() if k not in known_ee},
    )

    nodes_tree = item.get("nodes", [])
    if not isinstance(nodes_tree, list):
        raise ReportSchemaError("nodes must be a list", f"{path}.nodes")
    links_tree = item.get("links", [])
    if not isinstance(links_tree, list):
        raise ReportSchemaError("links must be a list", f"{path}.links")

    nodes = []
    known_node = {"name", "lat", "lon", "speed_mps", "extrapolated"}
    for k, n in enumerate(nodes_tree):
        npath = f"{path}.nodes[{k}]"
        if not isinstance(n, dict):
            raise ReportSchemaError("node entry must be an object", npath)
        name = _require(n, "name", str, f"{npath}.name")
        lat = _expect_number(_require(n, "lat", (int, float), f"{npath}.lat"), f"{npath}.lat")
        lon = _expect_number(_require(n, "lon", (int, float), f"{npath}.lon"), f"{npath}.lon")
        if not -90.0 <= lat <= 90.0:
            raise ReportSchemaError("lat out of range", f"{npath}.lat")
        if not -180.0 <= lon <= 180.0:
            raise ReportSchemaError("lon out of range", f"{npath}.lon")
        node = node_by_name.get(name)
        if node is None:
            raise ReportSchemaError(f"undeclared node {name!r}", f"{npath}.name")
        nodes.append(
            NodeSlotStats(
                node=node, lat=lat, lon=lon,
                speed=_expect_number(n.get("speed_mps", 0.0), f"{npath}.speed_mps"),
                extrapolated=bool(n.get("extrapolated", False)),
                extensions={k2: v for k2, v in n.items() if k2 not in known_node},
            )
        )

    links = []
    known_link = {"src", "dst", "sent", "received", "pdr", "bytes", "throughput_bps", "distance_m"}
    for k, l in enumerate(links_tree):
        lpath = f"{path}.links[{k}]"
        if not isinstance(l, dict):
            raise ReportSchemaError("link entry must be an object", lpath)
        src = _require(l, "src", str, f"{lpath}.src")
        dst = _require(l, "dst", str, f"{lpath}.dst")
        links.append(
            LinkSlotStats(
                link=LinkId(node_by_name.get(src, NodeId(src)), node_by_name.get(dst, NodeId(dst))),
                sent=_expect_int(l.get("sent", 0), f"{lpath}.sent"),
                received=_expect_int(l.get("received", 0), f"{lpath}.received"),
                pdr=_optional_number(l, "pdr", lpath, 0.0, 100.0),
                bytes=_expect_int(l.get("bytes", 0), f"{lpath}.bytes"),
                throughput_bps=_expect_number(l.get("throughput_bps", 0.0), f"{lpath}.throughput_bps"),
                distance_m=_optional_number(l, "distance_m", lpath, 0.0),
                extensions={k2: v for k2, v in l.items() if k2 not in known_link},
            )
        )

    known_slot = {"slot", "time_us", "end_to_end", "nodes", "links"}
    return SlotRecord(
        index=_expect_int(_require(item, "slot", (int,), f"{path}.slot"), f"{path}.slot"),
        time=_expect_int(_require(item, "time_us", (int,), f"{path}.time_us"), f"{path}.time_us"),
        end_to_end=end_to_end,
        nodes=tuple(nodes),
        links=tuple(links),
        extensions={k: v for k, v in item.items() if k not in known_slot},
    )


# --- plot series -------------------------------------------------------------

_E2E_METRICS = {
    "sent": lambda e: e.sent,
    "delivered": lambda e: e.delivered,
    "pdr": lambda e: e.pdr,
    "bytes": lambda e: e.bytes,
    "throughput_bps": lambda e: e.throughput_bps,
    "rtt_avg_ms": lambda e: e.rtt_avg_ms,
    "jitter_rtt_ms": lambda e: e.jitter_rtt_ms,
    "jitter_iperf_ms": lambda e: e.jitter_iperf_ms,
    "hop_count": lambda e: e.hop_count,
}
_LINK_METRICS = {
    "sent": lambda l: l.sent,
    "received": lambda l: l.received,
    "pdr": lambda l: l.pdr,
    "bytes": lambda l: l.bytes,
    "throughput_bps": lambda l: l.throughput_bps,
    "distance_m": lambda l: l.distance_m,
}
_NODE_METRICS = {
    "lat": lambda n: n.lat,
    "lon": lambda n: n.lon,
    "speed_mps": lambda n: n.speed,
}


def emit_plot_series(report: ExperimentReport, metric: str, scope: str) -> dict[str, str]:
    """Whitespace-column files for gnuplot-style tooling, one per scope instance.

    Rows are `time_s value`; absent values are written as '?'.
    """
    if scope == "end_to_end":
        if metric not in _E2E_METRICS:
            raise UnknownMetricError(
                f"unknown end_to_end metric {metric!r}; available: {', '.join(sorted(_E2E_METRICS))}"
            )
        rows = [(slot, _E2E_METRICS[metric](slot.end_to_end)) for slot in report.data]
        return {f"end_to_end_{metric}.dat": _series_text(report, metric, rows)}
    if scope == "link":
        if metric not in _LINK_METRICS:
            raise UnknownMetricError(
                f"unknown link metric {metric!r}; available: {', '.join(sorted(_LINK_METRICS))}"
            )
        instances = sorted(
            {(l.link.src.name, l.link.dst.name) for slot in report.data for l in slot.links}
        )
        out = {}
        for src, dst in instances:
            rows = []
            for slot in report.data:
                match = [l for l in slot.links if l.link.src.name == src and l.link.dst.name == dst]
                rows.append((slot, _LINK_METRICS[metric](match[0]) if match else None))
            out[f"link_{src}-{dst}_{metric}.dat"] = _series_text(report, metric, rows)
        return out
    if scope == "node":
        if metric not in _NODE_METRICS:
            raise UnknownMetricError(
                f"unknown node metric {metric!r}; available: {', '.join(sorted(_NODE_METRICS))}"
            )
        names = sorted({n.node.name for slot in report.data for n in slot.nodes})
        out = {}
        for name in names:
            rows = []
            for slot in report.data:
                match = [n for n in slot.nodes if n.node.name == name]
                rows.append((slot, _NODE_METRICS[metric](match[0]) if match else None))
            out[f"node_{name}_{metric}.dat"] = _series_text(report, metric, rows)
        return out
    raise UnknownMetricError(f"unknown scope {scope!r}; available: end_to_end, link, node")


def _series_text(report, metric, rows) -> str:
    lines = [f"# time_s {metric}"]
    for slot, value in rows:
        t = (slot.time - report.started_at_us) / 1_000_000
        if value is None:
            rendered = ABSENT
        elif isinstance(value, int):
            rendered = str(value)
        else:
            rendered = str(_q6(value))
        lines.append(f"{t:.3f} {rendered}")
    return "\n".join(lines) + "\n"


# --- geojson -----------------------------------------------------------------

def emit_geojson(report: ExperimentReport) -> bytes:
    """Per-node LineString tracks plus per-slot Point features (lon-lat order)."""
    features = []
    names = sorted({n.node.name for slot in report.data for n in slot.nodes})
    for name in names:
        coords = []
        for slot in report.data:
            for n in slot.nodes:
                if n.node.name == name:
                    coords.append([_q6(n.lon), _q6(n.lat)])
        if len(coords) >= 2:
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "LineString", "coordinates": coords},
                    "properties": {"kind": "track", "node": name},
                }
            )
    for slot in report.data:
        for n in slot.nodes:
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [_q6(n.lon), _q6(n.lat)]},
                    "properties": {
                        "kind": "position",
                        "node": n.node.name,
                        "slot": slot.index,
                        "time_us": slot.time,
                        "speed_mps": _q6(n.speed),
                        "extrapolated": n.extrapolated,
                    },
                }
            )
    tree = {"type": "FeatureCollection", "features": features}
    return (json.dumps(tree, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
