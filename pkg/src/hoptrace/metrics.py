"""Per-slot aggregation of journeys, GPS tracks and app-log overlays.

A journey belongs to the slot of its send observation, which keeps sent
counts causal and makes the per-slot fate partition exact. Jitter follows the
mean-absolute-deviation definition: average distance of each sample from the
sample mean, zero for constant latency.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .applogs import IperfLog, PingLog
from .errors import InternalConsistencyError, NoPositionError
from .model import GeoTrack, LinkId, NodeId, Slotting, Timestamp, haversine_distance, interpolate_position
from .tracer import PacketJourney


@dataclass(frozen=True)
class NodeSlotStats:
    node: NodeId
    lat: float
    lon: float
    speed: float
    extrapolated: bool = False
    extensions: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LinkSlotStats:
    link: LinkId
    sent: int
    received: int
    pdr: float | None
    bytes: int
    throughput_bps: float
    distance_m: float | None = None
    extensions: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EndToEndSlotStats:
    sent: int = 0
    delivered: int = 0
    pdr: float | None = None
    bytes: int = 0
    throughput_bps: float = 0.0
    rtt_avg_ms: float | None = None
    jitter_rtt_ms: float | None = None
    jitter_iperf_ms: float | None = None
    hop_count: int | None = None
    hop_count_min: int | None = None
    hop_count_max: int | None = None
    extensions: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SlotRecord:
    index: int
    time: Timestamp  # slot start on the corrected clock
    end_to_end: EndToEndSlotStats
    nodes: tuple[NodeSlotStats, ...] = ()
    links: tuple[LinkSlotStats, ...] = ()
    extensions: dict = field(default_factory=dict)


@dataclass
class AppLogs:
    """Parsed traffic-generator logs to overlay onto the capture-derived view."""

    ping: PingLog | None = None
    iperf_receiver: IperfLog | None = None
    iperf_sender: IperfLog | None = None


def compute_pdr(sent: int, received: int) -> float | None:
    """Delivery ratio as a percentage; absent (None) when nothing was sent."""
    if received > sent:
        raise InternalConsistencyError(f"received {received} exceeds sent {sent}")
    if sent == 0:
        return None
    return 100.0 * received / sent


def compute_jitter_rtt(rtts_ms: list[float]) -> float | None:
    """Mean absolute deviation of RTT samples from their mean, in ms."""
    if not rtts_ms:
        return None
    mean = sum(rtts_ms) / len(rtts_ms)
    return sum(abs(r - mean) for r in rtts_ms) / len(rtts_ms)


def aggregate(
    journeys: list[PacketJourney],
    tracks: dict[NodeId, GeoTrack],
    app: AppLogs | None = None,
    slotting: Slotting | None = None,
    slot_width_us: int = 1_000_000,
) -> tuple[Slotting, list[SlotRecord]]:
    """Aggregate everything into per-slot records.

    The slot grid is anchored at the first journey's send time (first track
    fix when there are no journeys). Empty slots are emitted with node stats
    only, so coverage gaps stay visible.
    """
    app = app or AppLogs()
    if slotting is None:
        if journeys:
            t0 = journeys[0].send_ts
        elif tracks:
            t0 = min(t.start for t in tracks.values())
        else:
            return Slotting(t0=0, width_us=slot_width_us), []
        slotting = Slotting(t0=t0, width_us=slot_width_us)

    by_slot: dict[int, list[PacketJourney]] = defaultdict(list)
    last_slot = 0
    for j in journeys:
        if j.send_ts < slotting.t0:
            continue
        k = slotting.slot_of(j.send_ts)
        by_slot[k].append(j)
        last_slot = max(last_slot, k)
    for track in tracks.values():
        if track.end >= slotting.t0:
            last_slot = max(last_slot, slotting.slot_of(track.end))

    rtts_by_slot = _ping_overlay(journeys, app.ping, slotting)
    iperf_by_slot = _iperf_overlay(journeys, app.iperf_receiver, slotting)
    for k in rtts_by_slot:
        last_slot = max(last_slot, k)

    records = []
    for k in range(last_slot + 1):
        slot_journeys = by_slot.get(k, [])
        records.append(
            SlotRecord(
                index=k,
                time=slotting.slot_start(k),
                end_to_end=_end_to_end(slot_journeys, slotting, rtts_by_slot.get(k), iperf_by_slot.get(k)),
                nodes=_node_stats(tracks, slotting, k),
                links=_link_stats(slot_journeys, tracks, slotting, k),
            )
        )
    return slotting, records


def _end_to_end(journeys, slotting, slot_rtts, slot_jitters) -> EndToEndSlotStats:
    sent = len(journeys)
    delivered = [j for j in journeys if not j.ambiguous and j.fate.kind == "delivered"]
    nbytes = sum(j.payload_len for j in delivered)
    width_s = slotting.width_us / 1_000_000
    hops = sorted(len(j.path) for j in delivered)
    hop_mode = None
    if hops:
        counts = defaultdict(int)
        for h in hops:
            counts[h] += 1
        hop_mode = min(counts, key=lambda h: (-counts[h], h))
    return EndToEndSlotStats(
        sent=sent,
        delivered=len(delivered),
        pdr=compute_pdr(sent, len(delivered)),
        bytes=nbytes,
        throughput_bps=8.0 * nbytes / width_s,
        rtt_avg_ms=(sum(slot_rtts) / len(slot_rtts)) if slot_rtts else None,
        jitter_rtt_ms=compute_jitter_rtt(slot_rtts) if slot_rtts else None,
        jitter_iperf_ms=(sum(slot_jitters) / len(slot_jitters)) if slot_jitters else None,
        hop_count=hop_mode,
        hop_count_min=hops[0] if hops else None,
        hop_count_max=hops[-1] if hops else None,
    )


def _node_stats(tracks, slotting, k) -> tuple[NodeSlotStats, ...]:
    mid = slotting.slot_mid(k)
    stats = []
    for node in sorted(tracks, key=lambda n: n.name):
        try:
            fix = interpolate_position(tracks[node], mid)
        except NoPositionError:
            continue
        stats.append(
            NodeSlotStats(node=node, lat=fix.lat, lon=fix.lon, speed=fix.speed,
                          extrapolated=fix.extrapolated)
        )
    return tuple(stats)


def _link_stats(journeys, tracks, slotting, k) -> tuple[LinkSlotStats, ...]:
    sent: dict[LinkId, int] = defaultdict(int)
    received: dict[LinkId, int] = defaultdict(int)
    nbytes: dict[LinkId, int] = defaultdict(int)
    for j in journeys:
        if j.ambiguous:
            continue  # correctness over coverage: no per-link credit
        for link in j.links_sent:
            sent[link] += 1
        for link in j.links_received:
            received[link] += 1
            nbytes[link] += j.payload_len

    mid = slotting.slot_mid(k)
    width_s = slotting.width_us / 1_000_000
    positions: dict[NodeId, tuple[float, float]] = {}

    def position(node):
        if node not in positions:
            track = tracks.get(node)
            if track is None:
                positions[node] = None
            else:
                try:
                    fix = interpolate_position(track, mid)
                    positions[node] = (fix.lat, fix.lon)
                except NoPositionError:
                    positions[node] = None
        return positions[node]

    stats = []
    for link in sorted(sent, key=lambda l: (l.src.name, l.dst.name)):
        a, b = position(link.src), position(link.dst)
        distance = haversine_distance(a[0], a[1], b[0], b[1]) if a and b else None
        stats.append(
            LinkSlotStats(
                link=link,
                sent=sent[link],
                received=received[link],
                pdr=compute_pdr(sent[link], received[link]),
                bytes=nbytes[link],
                throughput_bps=8.0 * nbytes[link] / width_s,
                distance_m=distance,
            )
        )
    return tuple(stats)


def _ping_overlay(journeys, ping: PingLog | None, slotting) -> dict[int, list[float]]:
    """Slot each answered probe by the send time of its captured request."""
    if ping is None:
        return {}
    journey_by_seq = {}
    for j in journeys:
        if j.flow is not None and j.flow.proto in ("icmp", "icmpv6") and j.seq_hint is not None:
            journey_by_seq.setdefault(j.seq_hint, j)
    out: dict[int, list[float]] = defaultdict(list)
    for probe in ping.probes:
        if probe.rtt_ms is None:
            continue
        j = journey_by_seq.get(probe.seq)
        if j is None or j.send_ts < slotting.t0:
            continue
        out[slotting.slot_of(j.send_ts)].append(probe.rtt_ms)
    return out


def _iperf_overlay(journeys, log: IperfLog | None, slotting) -> dict[int, list[float]]:
    """Map receiver-side iperf jitter into slots via the first-packet anchor."""
    if log is None:
        return {}
    udp = [j for j in journeys if j.flow is not None and j.flow.proto == "udp"]
    anchor = udp[0].send_ts if udp else (journeys[0].send_ts if journeys else None)
    if anchor is None:
        return {}
    out: dict[int, list[float]] = defaultdict(list)
    for iv in log.intervals:
        if iv.jitter_ms is None:
            continue
        ts = anchor + int(iv.start_s * 1_000_000)
        if ts < slotting.t0:
            continue
        out[slotting.slot_of(ts)].append(iv.jitter_ms)
    return out
