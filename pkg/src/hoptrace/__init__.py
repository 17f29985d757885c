"""hoptrace: offline analysis of multi-hop wireless network experiments.

Correlates per-node packet captures, GPS tracks and traffic-generator logs
into per-packet paths, per-link loss attribution and geo-referenced
per-second statistics, with a synthetic ground-truth generator for exact
end-to-end verification.
"""

from .errors import HoptraceError
from .metrics import AppLogs, EndToEndSlotStats, LinkSlotStats, NodeSlotStats, SlotRecord, aggregate, compute_jitter_rtt, compute_pdr
from .model import GeoFix, GeoTrack, LinkId, NodeId, Role, Slotting, haversine_distance, interpolate_position, slot_of
from .pcap import CaptureFile, FlowKey, PacketRecord, dissect_frame, packet_digest, read_capture, write_capture
from .report import ExperimentReport, QualityCounters, emit_geojson, emit_plot_series, emit_report, parse_report
from .tracer import (
    ClockOffsetMap,
    FateTally,
    FlowPattern,
    PacketJourney,
    classify_fates,
    estimate_clock_offsets,
    format_trace,
    read_trace,
    reconstruct_journeys,
)

__version__ = "0.1.0"

__all__ = [
    "AppLogs",
    "CaptureFile",
    "ClockOffsetMap",
    "EndToEndSlotStats",
    "ExperimentReport",
    "FateTally",
    "FlowKey",
    "FlowPattern",
    "GeoFix",
    "GeoTrack",
    "HoptraceError",
    "LinkId",
    "LinkSlotStats",
    "NodeId",
    "NodeSlotStats",
    "PacketJourney",
    "PacketRecord",
    "QualityCounters",
    "Role",
    "SlotRecord",
    "Slotting",
    "aggregate",
    "classify_fates",
    "compute_jitter_rtt",
    "compute_pdr",
    "dissect_frame",
    "emit_geojson",
    "emit_plot_series",
    "emit_report",
    "estimate_clock_offsets",
    "format_trace",
    "haversine_distance",
    "interpolate_position",
    "packet_digest",
    "parse_report",
    "read_capture",
    "read_trace",
    "reconstruct_journeys",
    "slot_of",
    "write_capture",
]
