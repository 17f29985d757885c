"""Cross-capture packet correlation: clock alignment, per-packet path
reconstruction and loss attribution.

Every logical packet is identified across captures by its hop-invariant
payload digest. Per-node clocks are aligned by the median timestamp
difference over shared digests (one-hop flight time is absorbed into the
offset; it is microseconds against millisecond-scale skews). Paths are built
by chaining the MAC address pairs of the observed frames: the destination MAC
of the frame seen at one node names the next node on the path.
"""

from __future__ import annotations

import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .model import LinkId, NodeId, Timestamp
from .pcap import BROADCAST_MAC, CaptureFile, FlowKey, PacketRecord

DEFAULT_MIN_SHARED_DIGESTS = 30
DEFAULT_MATCH_WINDOW_US = 2_000_000

TRACE_HEADER = "# hoptrace trace format_version=1"
TRACE_COLUMNS = "# digest\tflow\tseq\tfate\tpath\tretrans\ttimestamps"


@dataclass(frozen=True)
class ClockOffsetMap:
    """Per-node microseconds to add to reach the reference node's clock."""

    reference: NodeId
    offsets: dict[NodeId, int]
    confidence: dict[NodeId, int]  # matched digest pairs behind each offset
    unknown: tuple[NodeId, ...] = ()  # nodes with no digest overlap path

    def correct(self, node: NodeId, ts: Timestamp) -> Timestamp:
        return ts + self.offsets[node]


@dataclass(frozen=True)
class FlowPattern:
    """Wildcard match over FlowKeys; None fields match anything."""

    proto: str | None = None
    src_ip: str | None = None
    dst_ip: str | None = None
    dst_port: int | None = None

    def matches(self, flow: FlowKey | None) -> bool:
        if flow is None:
            return self.proto is None and self.src_ip is None and self.dst_ip is None
        if self.proto is not None and flow.proto != self.proto:
            return False
        if self.src_ip is not None and flow.src_ip != self.src_ip:
            return False
        if self.dst_ip is not None and flow.dst_ip != self.dst_ip:
            return False
        if self.dst_port is not None and flow.dst_port != self.dst_port:
            return False
        return True


@dataclass(frozen=True)
class Observation:
    node: NodeId
    ts_corrected: Timestamp
    src_mac: str
    dst_mac: str
    direction: str  # received | forwarded | originated


@dataclass(frozen=True)
class Fate:
    kind: str  # delivered | link_loss | in_node_loss | unobserved
    link: LinkId | None = None
    node: NodeId | None = None

    def describe(self) -> str:
        if self.kind == "link_loss":
            return f"link_loss:{self.link}"
        if self.kind == "in_node_loss":
            return f"in_node_loss:{self.node}"
        return self.kind


@dataclass(frozen=True)
class PacketJourney:
    digest: int
    flow: FlowKey | None
    seq_hint: int | None
    observations: tuple[Observation, ...]
    path: tuple[LinkId, ...]  # hops the packet completed, in order
    fate: Fate
    ambiguous: bool
    send_ts: Timestamp  # corrected send time at the sender
    payload_len: int
    wire_len: int
    links_sent: tuple[LinkId, ...]  # every hop attempted (frame transmitted)
    links_received: tuple[LinkId, ...]  # hops confirmed at the far end
    unobserved_relays: tuple[NodeId, ...] = ()
    retransmissions: int = 0

    @property
    def path_nodes(self) -> tuple[NodeId, ...]:
        if not self.path:
            first = self.observations[0].node if self.observations else None
            return (first,) if first else ()
        return (self.path[0].src,) + tuple(link.dst for link in self.path)


@dataclass
class FateTally:
    sent: int = 0
    delivered: int = 0
    link_loss: dict[LinkId, int] = field(default_factory=dict)
    in_node_loss: dict[NodeId, int] = field(default_factory=dict)
    unobserved: int = 0
    ambiguous: int = 0

    def total(self) -> int:
        return (
            self.delivered
            + sum(self.link_loss.values())
            + sum(self.in_node_loss.values())
            + self.unobserved
            + self.ambiguous
        )


@dataclass
class TraceCounters:
    ignored_journeys: int = 0  # not originating at the sender (e.g. replies)
    ambiguous_journeys: int = 0
    retransmissions: int = 0


def estimate_clock_offsets(
    captures: list[CaptureFile],
    reference: NodeId,
    min_shared: int = DEFAULT_MIN_SHARED_DIGESTS,
) -> ClockOffsetMap:
    """Estimate per-node clock offsets from digests shared between captures.

    Pairwise offsets are medians of per-digest timestamp differences, composed
    along a spanning tree rooted at the reference node. Nodes that share no
    digest path with the reference come back in `unknown`.
    """
    first_ts: dict[NodeId, dict[int, Timestamp]] = {}
    for cap in captures:
        seen: dict[int, Timestamp] = {}
        for rec in cap.records:
            prev = seen.get(rec.payload_digest)
            if prev is None or rec.ts < prev:
                seen[rec.payload_digest] = rec.ts
        first_ts[cap.node] = seen

    nodes = sorted(first_ts, key=lambda n: n.name)
    shared: dict[tuple[NodeId, NodeId], list[int]] = {}
    for i, a in enumerate(nodes):
        for b in nodes[i + 1 :]:
            common = first_ts[a].keys() & first_ts[b].keys()
            if len(common) >= min_shared:
                diffs = sorted(first_ts[a][d] - first_ts[b][d] for d in common)
                shared[(a, b)] = diffs

    offsets: dict[NodeId, int] = {reference: 0}
    confidence: dict[NodeId, int] = {reference: 0}
    if reference not in first_ts:
        return ClockOffsetMap(reference, offsets, confidence, tuple(nodes))

    progress = True
    while progress:
        progress = False
        for node in nodes:
            if node in offsets:
                continue
            best = None  # (shared count, solved neighbor, diffs, orientation)
            for (a, b), diffs in shared.items():
                if a == node and b in offsets:
                    cand = (len(diffs), b, diffs, -1)
                elif b == node and a in offsets:
                    cand = (len(diffs), a, diffs, +1)
                else:
                    continue
                if best is None or cand[0] > best[0] or (
                    cand[0] == best[0] and cand[1].name < best[1].name
                ):
                    best = cand
            if best is None:
                continue
            count, anchor, diffs, orientation = best
            # diffs are ts_a - ts_b for the stored (a, b) ordering; the offset
            # of the unsolved node follows from o(b) = o(a) + median(ts_a - ts_b).
            med = statistics.median_low(diffs)
            if orientation == +1:  # node is b, anchor is a
                offsets[node] = offsets[anchor] + med
            else:  # node is a, anchor is b
                offsets[node] = offsets[anchor] - med
            confidence[node] = count
            progress = True

    unknown = tuple(n for n in nodes if n not in offsets)
    return ClockOffsetMap(reference, offsets, confidence, unknown)


def infer_node_macs(
    captures: list[CaptureFile], offsets: ClockOffsetMap, sender: NodeId
) -> dict[NodeId, str]:
    """Infer each capturing node's wireless MAC address.

    The sender's MAC anchors the inference: packets whose earliest corrected
    observation is at the sender were transmitted there, so their source MAC
    is the sender's. Remaining nodes are solved iteratively: a frame whose
    source MAC belongs to a known other node is a reception (the destination
    MAC is the capturing node's); a frame addressed to a known other node is a
    transmission (the source MAC is the capturing node's).
    """
    usable = [c for c in captures if c.node in offsets.offsets]
    corrected: dict[NodeId, list[PacketRecord]] = {c.node: c.records for c in usable}

    earliest: dict[int, tuple[Timestamp, NodeId]] = {}
    for cap in usable:
        off = offsets.offsets[cap.node]
        for rec in cap.records:
            ts = rec.ts + off
            cur = earliest.get(rec.payload_digest)
            if cur is None or (ts, cap.node.name) < (cur[0], cur[1].name):
                earliest[rec.payload_digest] = (ts, cap.node)

    votes: Counter[str] = Counter()
    for cap in usable:
        if cap.node != sender:
            continue
        for rec in cap.records:
            if earliest.get(rec.payload_digest, (None, None))[1] == sender:
                votes[rec.src_mac] += 1
    mac_of: dict[NodeId, str] = {}
    if votes:
        mac_of[sender] = min(votes, key=lambda m: (-votes[m], m))

    for _ in range(len(usable)):
        owned = set(mac_of.values())
        changed = False
        for cap in sorted(usable, key=lambda c: c.node.name):
            if cap.node in mac_of:
                continue
            tally: Counter[str] = Counter()
            for rec in corrected[cap.node]:
                if rec.src_mac in owned and rec.dst_mac != BROADCAST_MAC:
                    tally[rec.dst_mac] += 1  # reception at this node
                elif rec.dst_mac in owned:
                    tally[rec.src_mac] += 1  # transmission by this node
            tally = Counter({m: c for m, c in tally.items() if m not in owned})
            if tally:
                mac_of[cap.node] = min(tally, key=lambda m: (-tally[m], m))
                changed = True
        if not changed:
            break
    return mac_of


def reconstruct_journeys(
    captures: list[CaptureFile],
    offsets: ClockOffsetMap,
    sender: NodeId,
    receiver: NodeId,
    flow_filter: FlowPattern | None = None,
    window_us: int = DEFAULT_MATCH_WINDOW_US,
    counters: TraceCounters | None = None,
    mac_of: dict[NodeId, str] | None = None,
) -> list[PacketJourney]:
    """Correlate captures into one journey per logical packet sent by sender.

    Observations are grouped by payload digest, split into logical packets by
    a matching window, deduplicated against MAC-level retransmissions, and
    chained by MAC evidence into a hop-by-hop path with a terminal fate.
    """
    counters = counters if counters is not None else TraceCounters()
    if mac_of is None:
        mac_of = infer_node_macs(captures, offsets, sender)
    node_of = {mac: node for node, mac in sorted(mac_of.items(), key=lambda kv: kv[0].name)}

    by_digest: dict[int, list[tuple[Timestamp, NodeId, PacketRecord]]] = defaultdict(list)
    for cap in captures:
        if cap.node not in offsets.offsets:
            continue
        off = offsets.offsets[cap.node]
        for rec in cap.records:
            if flow_filter is not None and not flow_filter.matches(rec.flow):
                continue
            by_digest[rec.payload_digest].append((rec.ts + off, cap.node, rec))

    journeys = []
    for digest in sorted(by_digest):
        rows = sorted(by_digest[digest], key=lambda r: (r[0], r[1].name, r[2].src_mac))
        cluster: list[tuple[Timestamp, NodeId, PacketRecord]] = []
        for row in rows:
            if cluster and row[0] - cluster[0][0] > window_us:
                j = _build_journey(digest, cluster, sender, receiver, mac_of, node_of, counters)
                if j is not None:
                    journeys.append(j)
                cluster = []
            cluster.append(row)
        if cluster:
            j = _build_journey(digest, cluster, sender, receiver, mac_of, node_of, counters)
            if j is not None:
                journeys.append(j)

    journeys.sort(key=lambda j: (j.send_ts, j.digest))
    return journeys


def _build_journey(digest, rows, sender, receiver, mac_of, node_of, counters):
    # Collapse MAC-level retransmissions: same frame identity at the same node.
    deduped: dict[tuple[str, str, str], tuple[Timestamp, NodeId, PacketRecord]] = {}
    retrans = 0
    for ts, node, rec in rows:
        key = (node.name, rec.src_mac, rec.dst_mac)
        if key in deduped:
            retrans += 1
        else:
            deduped[key] = (ts, node, rec)
    obs_rows = sorted(deduped.values(), key=lambda r: (r[0], r[1].name, r[2].src_mac))
    counters.retransmissions += retrans

    # The journey originates at the sender iff the sender's capture holds a
    # frame it transmitted itself. Offset correction absorbs one-hop latency,
    # so downstream receive times may precede the send time by a few ms and
    # plain earliest-first ordering cannot identify the origin.
    sender_mac = mac_of.get(sender)
    origin = None
    for ts, node, rec in obs_rows:
        if node == sender and sender_mac is not None and rec.src_mac == sender_mac:
            origin = (ts, node, rec)
            break
    if origin is None:
        counters.ignored_journeys += 1
        return None
    first_ts, _, first_rec = origin

    # Unique MAC pairs are the hop attempts; record which ends witnessed each.
    edges: dict[tuple[str, str], dict] = {}
    observed_nodes: set[NodeId] = set()
    for ts, node, rec in obs_rows:
        observed_nodes.add(node)
        e = edges.setdefault((rec.src_mac, rec.dst_mac), {"ts": ts, "tx_seen": False, "rx_seen": False})
        e["ts"] = min(e["ts"], ts)
        if mac_of.get(node) == rec.src_mac:
            e["tx_seen"] = True
        if mac_of.get(node) == rec.dst_mac:
            e["rx_seen"] = True

    by_src: dict[str, list[str]] = defaultdict(list)
    for (src, dst) in edges:
        by_src[src].append(dst)

    ambiguous = False
    chain: list[tuple[str, str, bool]] = []  # (src_mac, dst_mac, inferred)
    visited = {sender_mac}
    used = set()
    current = sender_mac
    receiver_mac = mac_of.get(receiver)
    while True:
        dsts = sorted(set(by_src.get(current, ())))
        if len(dsts) > 1:
            ambiguous = True  # conflicting MAC evidence: one hop, two next hops
            break
        if len(dsts) == 1:
            nxt = dsts[0]
            if nxt in visited:
                ambiguous = True  # cycle
                break
            chain.append((current, nxt, False))
            used.add((current, nxt))
            visited.add(nxt)
            current = nxt
            if current == receiver_mac:
                break
            continue
        # No outgoing edge from the current MAC: try to bridge a capture gap.
        leftovers = [e for e in edges if e not in used]
        heads = sorted({s for s, d in leftovers if all(dd != s for _, dd in leftovers)})
        heads = [h for h in heads if h not in visited]
        if len(leftovers) > 0 and len(heads) == 1:
            nxt = heads[0]
            chain.append((current, nxt, True))
            visited.add(nxt)
            current = nxt
            continue
        if leftovers:
            ambiguous = True  # disconnected evidence that cannot be bridged
        break

    if not ambiguous and any(e not in used for e in edges):
        ambiguous = True  # evidence the chain does not explain

    def resolve(mac: str) -> NodeId:
        node = node_of.get(mac)
        return node if node is not None else NodeId(f"mac:{mac}")

    links_sent: list[LinkId] = []
    links_received: list[LinkId] = []
    unobserved_relays: list[NodeId] = []
    for i, (src, dst, inferred) in enumerate(chain):
        link = LinkId(resolve(src), resolve(dst))
        links_sent.append(link)
        is_last = i == len(chain) - 1
        # Every non-terminal hop completed by construction (the chain went on);
        # an inferred hop exists only because of downstream evidence.
        done = (not is_last) or inferred or edges[(src, dst)]["rx_seen"] or (
            resolve(dst) in observed_nodes
        )
        if done:
            links_received.append(link)
            if resolve(dst) not in observed_nodes:
                unobserved_relays.append(resolve(dst))

    delivered = receiver in observed_nodes
    if delivered:
        fate = Fate("delivered")
    elif not chain:
        fate = Fate("unobserved")
    else:
        last_src, last_dst, _ = chain[-1]
        last_node = resolve(last_dst)
        if last_dst == BROADCAST_MAC:
            fate = Fate("unobserved")
        elif last_node in observed_nodes:
            fate = Fate("in_node_loss", node=last_node)
        else:
            fate = Fate("link_loss", link=LinkId(resolve(last_src), last_node))

    observations = []
    seen_rx_at: set[str] = set()
    for ts, node, rec in obs_rows:
        own = mac_of.get(node)
        if own is not None and rec.dst_mac == own:
            direction = "received"
            seen_rx_at.add(node.name)
        elif own is not None and rec.src_mac == own:
            direction = "forwarded" if node.name in seen_rx_at else "originated"
        else:
            direction = "received"
        observations.append(Observation(node, ts, rec.src_mac, rec.dst_mac, direction))

    if ambiguous:
        counters.ambiguous_journeys += 1

    return PacketJourney(
        digest=digest,
        flow=first_rec.flow,
        seq_hint=first_rec.seq_hint,
        observations=tuple(observations),
        path=tuple(links_received),
        fate=fate,
        ambiguous=ambiguous,
        send_ts=first_ts,
        payload_len=first_rec.payload_len,
        wire_len=first_rec.length,
        links_sent=tuple(links_sent),
        links_received=tuple(links_received),
        unobserved_relays=tuple(unobserved_relays),
        retransmissions=retrans,
    )


def classify_fates(journeys: list[PacketJourney]) -> FateTally:
    """Tally journey fates. The five classes partition the sent set exactly."""
    tally = FateTally(sent=len(journeys))
    for j in journeys:
        if j.ambiguous:
            tally.ambiguous += 1
        elif j.fate.kind == "delivered":
            tally.delivered += 1
        elif j.fate.kind == "link_loss":
            tally.link_loss[j.fate.link] = tally.link_loss.get(j.fate.link, 0) + 1
        elif j.fate.kind == "in_node_loss":
            tally.in_node_loss[j.fate.node] = tally.in_node_loss.get(j.fate.node, 0) + 1
        else:
            tally.unobserved += 1
    return tally


def format_trace(journeys: list[PacketJourney]) -> str:
    """The packet-trace file: one tab-separated line per journey."""
    lines = [TRACE_HEADER, TRACE_COLUMNS]
    for j in journeys:
        fate = "ambiguous" if j.ambiguous else j.fate.describe()
        path = ">".join(n.name for n in j.path_nodes)
        first_ts: dict[str, int] = {}
        for o in j.observations:
            first_ts.setdefault(o.node.name, o.ts_corrected)
        stamps = ",".join(f"{name}={ts}" for name, ts in first_ts.items())
        flow = j.flow.describe() if j.flow is not None else "opaque"
        seq = str(j.seq_hint) if j.seq_hint is not None else "-"
        lines.append(
            f"{j.digest:016x}\t{flow}\t{seq}\t{fate}\t{path}\t{j.retransmissions}\t{stamps}"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TraceEntry:
    digest: int
    flow: str
    seq: int | None
    fate: str  # the describe() form, or "ambiguous"
    path: tuple[str, ...]
    retransmissions: int
    timestamps: dict[str, Timestamp]


def read_trace(text: str) -> list[TraceEntry]:
    """Parse a trace file written by format_trace."""
    entries = []
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        digest, flow, seq, fate, path, retrans, stamps = line.split("\t")
        timestamps = {}
        if stamps:
            for part in stamps.split(","):
                name, ts = part.rsplit("=", 1)
                timestamps[name] = int(ts)
        entries.append(
            TraceEntry(
                digest=int(digest, 16),
                flow=flow,
                seq=None if seq == "-" else int(seq),
                fate=fate,
                path=tuple(p for p in path.split(">") if p),
                retransmissions=int(retrans),
                timestamps=timestamps,
            )
        )
    return entries
