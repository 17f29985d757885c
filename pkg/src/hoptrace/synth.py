"""Synthetic ground-truth experiment bundles and the truth comparator.

The generator is a bookkeeping oracle, not a network simulator: every drop,
latency and retransmission is an explicit draw from a seeded RNG, recorded as
truth before capture loss can hide it. Per-hop frames rewrite MACs and
decrement the hop limit exactly as a real forwarder would, so the analyzer
must reassemble each packet's path from the same evidence a field trial
leaves behind.
"""

from __future__ import annotations

import datetime as _dt
import json
import random
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from . import nmea as nmea_mod
from . import pcap as pcap_mod
from .errors import ScenarioSpecError
from .model import NodeId, Role, haversine_distance
from .nmea import KNOTS_TO_MPS, format_coord, nmea_checksum
from .pcap import ETHERTYPE_IPV6, LinkType

ETHERTYPE_OPAQUE = 0x88B5  # local experimental ethertype: undissectable payload

_ROLES = {r.value: r for r in Role}


@dataclass(frozen=True)
class MotionSpec:
    waypoints: tuple[tuple[float, float], ...]  # (lat, lon)
    speed_mps: float = 0.0


@dataclass(frozen=True)
class DropRule:
    """Either an independent Bernoulli drop or a deterministic modulo schedule."""

    probability: float = 0.0
    modulo: tuple[int, int] | None = None  # drop when seq % m < k

    def decide(self, seq: int, rng: random.Random) -> bool:
        if self.modulo is not None:
            m, k = self.modulo
            return seq % m < k
        if self.probability > 0.0:
            return rng.random() < self.probability
        return False

    @property
    def active(self) -> bool:
        return self.probability > 0.0 or self.modulo is not None


@dataclass(frozen=True)
class NodeSpec:
    name: str
    role: Role = Role.OTHER
    motion: MotionSpec | None = None
    clock_skew_us: int = 0
    capture_loss: float = 0.0
    in_node_drop: DropRule = DropRule()


@dataclass(frozen=True)
class LinkSpec:
    src: str
    dst: str
    drop: DropRule = DropRule()
    retransmit_probability: float = 0.0


@dataclass(frozen=True)
class RouteSpec:
    path: tuple[str, ...]
    until_s: float | None = None  # active while t < until_s; None = to the end


@dataclass(frozen=True)
class FlowSpec:
    kind: str  # udp | ping | opaque
    rate_pps: float
    payload_bytes: int
    start_s: float = 0.0
    duration_s: float | None = None


@dataclass(frozen=True)
class LatencySpec:
    """Per-event delays in microseconds; a (lo, hi) pair draws uniformly."""

    prop_us: tuple[int, int] = (200, 900)
    fwd_us: tuple[int, int] = (300, 1500)
    proc_us: tuple[int, int] = (400, 800)

    def draw(self, which: str, rng: random.Random) -> int:
        lo, hi = getattr(self, which)
        return lo if lo == hi else rng.randint(lo, hi)


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    seed: int
    duration_s: float
    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]
    routes: tuple[RouteSpec, ...]
    flows: tuple[FlowSpec, ...]
    start_epoch_us: int = 1_296_750_000_000_000
    slot_width_s: float = 1.0
    latency: LatencySpec = LatencySpec()

    @property
    def sender(self) -> str:
        return self.routes[0].path[0]

    @property
    def receiver(self) -> str:
        return self.routes[0].path[-1]


@dataclass
class TruthJourney:
    flow_kind: str
    seq: int
    digest: int
    send_ts: int  # true clock, microseconds
    payload_len: int
    fate: str  # delivered | link_loss:A>B | in_node_loss:B
    path_nodes: tuple[str, ...]  # nodes the packet actually reached, in order
    links_sent: tuple[str, ...]  # "A>B" per transmission
    links_received: tuple[str, ...]
    rtt_ms: float | None = None  # ping only, as printed in the log


@dataclass
class TruthBundle:
    spec: ScenarioSpec
    captures: dict[str, bytes]
    nmea: dict[str, str]
    logs: dict[str, str]
    journeys: list[TruthJourney]
    t0: int  # first data-packet send time, true clock

    def tally(self) -> dict:
        out = {"sent": len(self.journeys), "delivered": 0, "unobserved": 0,
               "ambiguous": 0, "link_loss": {}, "in_node_loss": {}}
        for j in self.journeys:
            if j.fate == "delivered":
                out["delivered"] += 1
            elif j.fate.startswith("link_loss:"):
                link = j.fate.split(":", 1)[1]
                out["link_loss"][link] = out["link_loss"].get(link, 0) + 1
            elif j.fate.startswith("in_node_loss:"):
                node = j.fate.split(":", 1)[1]
                out["in_node_loss"][node] = out["in_node_loss"].get(node, 0) + 1
        return out

    def link_totals(self) -> dict:
        totals: dict[str, dict] = {}
        for j in self.journeys:
            for link in j.links_sent:
                totals.setdefault(link, {"sent": 0, "received": 0, "bytes": 0})["sent"] += 1
            for link in j.links_received:
                t = totals.setdefault(link, {"sent": 0, "received": 0, "bytes": 0})
                t["received"] += 1
                t["bytes"] += j.payload_len
        return totals

    def slot_counts(self) -> list[dict]:
        width = int(self.spec.slot_width_s * 1_000_000)
        slots: dict[int, dict] = {}
        for j in self.journeys:
            k = (j.send_ts - self.t0) // width
            s = slots.setdefault(k, {"slot": k, "sent": 0, "delivered": 0, "bytes": 0,
                                     "links": {}, "rtts": []})
            s["sent"] += 1
            if j.fate == "delivered":
                s["delivered"] += 1
                s["bytes"] += j.payload_len
            for link in j.links_sent:
                s["links"].setdefault(link, {"sent": 0, "received": 0})["sent"] += 1
            for link in j.links_received:
                s["links"].setdefault(link, {"sent": 0, "received": 0})["received"] += 1
            if j.rtt_ms is not None:
                s["rtts"].append(j.rtt_ms)
        return [slots[k] for k in sorted(slots)]


# --- scenario spec parsing ----------------------------------------------------

def parse_scenario(tree: dict) -> ScenarioSpec:
    """Build a validated ScenarioSpec from its JSON form."""
    def fail(msg, path):
        raise ScenarioSpecError(msg, path)

    def need(obj, key, path):
        if key not in obj:
            fail(f"missing {key!r}", path)
        return obj[key]

    if not isinstance(tree, dict):
        fail("scenario must be an object", "$")
    name = need(tree, "name", "$")
    seed = need(tree, "seed", "$")
    duration = need(tree, "duration_s", "$")
    if not isinstance(duration, (int, float)) or duration <= 0:
        fail("duration_s must be positive", "duration_s")

    nodes = []
    for i, item in enumerate(need(tree, "nodes", "$")):
        path = f"nodes[{i}]"
        nname = need(item, "name", path)
        role = _ROLES.get(item.get("role", "other"))
        if role is None:
            fail(f"unknown role {item.get('role')!r}", f"{path}.role")
        motion = None
        if "motion" in item:
            m = item["motion"]
            wps = tuple((float(w[0]), float(w[1])) for w in need(m, "waypoints", f"{path}.motion"))
            speed = float(m.get("speed_mps", 0.0))
            if speed < 0:
                fail("speed_mps must be >= 0", f"{path}.motion.speed_mps")
            for w, (lat, lon) in enumerate(wps):
                if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                    fail("waypoint out of range", f"{path}.motion.waypoints[{w}]")
            motion = MotionSpec(waypoints=wps, speed_mps=speed)
        nodes.append(
            NodeSpec(
                name=nname,
                role=role,
                motion=motion,
                clock_skew_us=int(item.get("clock_skew_us", 0)),
                capture_loss=_probability(item.get("capture_loss", 0.0), f"{path}.capture_loss"),
                in_node_drop=_drop_rule(item.get("in_node_drop"), f"{path}.in_node_drop"),
            )
        )
    node_names = {n.name for n in nodes}
    if len(node_names) != len(nodes):
        fail("duplicate node names", "nodes")

    links = []
    for i, item in enumerate(tree.get("links", [])):
        path = f"links[{i}]"
        src, dst = need(item, "src", path), need(item, "dst", path)
        for end in (src, dst):
            if end not in node_names:
                fail(f"unknown node {end!r}", path)
        if src == dst:
            fail("link endpoints must differ", path)
        links.append(
            LinkSpec(
                src=src,
                dst=dst,
                drop=_drop_rule(item.get("drop"), f"{path}.drop"),
                retransmit_probability=_probability(
                    item.get("retransmit_probability", 0.0), f"{path}.retransmit_probability"
                ),
            )
        )
    defined = {(l.src, l.dst) for l in links}

    routes = []
    for i, item in enumerate(need(tree, "routes", "$")):
        path = f"routes[{i}]"
        hops = tuple(need(item, "path", path))
        if len(hops) < 2:
            fail("route needs at least two nodes", f"{path}.path")
        for h in hops:
            if h not in node_names:
                fail(f"unknown node {h!r}", f"{path}.path")
        for a, b in zip(hops, hops[1:]):
            if (a, b) not in defined:
                fail(f"route uses undefined link {a}>{b}", f"{path}.path")
        routes.append(RouteSpec(path=hops, until_s=item.get("until_s")))
    if not routes:
        fail("at least one route required", "routes")
    first, last = routes[0].path[0], routes[0].path[-1]
    for i, r in enumerate(routes):
        if r.path[0] != first or r.path[-1] != last:
            fail("all routes must share sender and receiver", f"routes[{i}].path")

    flows = []
    for i, item in enumerate(need(tree, "flows", "$")):
        path = f"flows[{i}]"
        kind = need(item, "kind", path)
        if kind not in ("udp", "ping", "opaque"):
            fail(f"unknown flow kind {kind!r}", f"{path}.kind")
        rate = float(need(item, "rate_pps", path))
        if rate <= 0:
            fail("rate_pps must be positive", f"{path}.rate_pps")
        size = int(need(item, "payload_bytes", path))
        if size < 4:
            fail("payload_bytes must be >= 4", f"{path}.payload_bytes")
        flows.append(
            FlowSpec(
                kind=kind, rate_pps=rate, payload_bytes=size,
                start_s=float(item.get("start_s", 0.0)),
                duration_s=item.get("duration_s"),
            )
        )
    if not flows:
        fail("at least one flow required", "flows")

    latency = LatencySpec()
    if "latency" in tree:
        lt = tree["latency"]
        latency = LatencySpec(
            prop_us=_range_us(lt.get("prop_us", latency.prop_us), "latency.prop_us"),
            fwd_us=_range_us(lt.get("fwd_us", latency.fwd_us), "latency.fwd_us"),
            proc_us=_range_us(lt.get("proc_us", latency.proc_us), "latency.proc_us"),
        )

    return ScenarioSpec(
        name=name,
        seed=int(seed),
        duration_s=float(duration),
        nodes=tuple(nodes),
        links=tuple(links),
        routes=tuple(routes),
        flows=tuple(flows),
        start_epoch_us=int(tree.get("start_epoch_us", 1_296_750_000_000_000)),
        slot_width_s=float(tree.get("slot_width_s", 1.0)),
        latency=latency,
    )


def _probability(value, path) -> float:
    if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
        raise ScenarioSpecError(f"probability {value!r} not in [0, 1]", path)
    return float(value)


def _drop_rule(value, path) -> DropRule:
    if value is None:
        return DropRule()
    if not isinstance(value, dict):
        raise ScenarioSpecError("drop rule must be an object", path)
    modulo = None
    if "modulo" in value:
        m = value["modulo"]
        if not (isinstance(m, (list, tuple)) and len(m) == 2 and all(isinstance(x, int) for x in m)):
            raise ScenarioSpecError("modulo must be [m, k]", f"{path}.modulo")
        if m[0] <= 0 or not 0 <= m[1] <= m[0]:
            raise ScenarioSpecError("modulo needs m > 0 and 0 <= k <= m", f"{path}.modulo")
        modulo = (m[0], m[1])
    return DropRule(
        probability=_probability(value.get("probability", 0.0), f"{path}.probability"),
        modulo=modulo,
    )


def _range_us(value, path) -> tuple[int, int]:
    if isinstance(value, int):
        return (value, value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        lo, hi = int(value[0]), int(value[1])
        if 0 <= lo <= hi:
            return (lo, hi)
    raise ScenarioSpecError("expected microseconds or [lo, hi]", path)


def load_scenario(path: str | Path) -> ScenarioSpec:
    return parse_scenario(json.loads(Path(path).read_text(encoding="utf-8")))


# --- frame construction -------------------------------------------------------

SENDER_IP = bytes.fromhex("20010db8000000000000000000000001")
RECEIVER_IP = bytes.fromhex("20010db8000000000000000000000002")
UDP_SRC_PORT = 50000
UDP_DST_PORT = 5001
ICMP_ID = 0x1234
BASE_HOP_LIMIT = 64


def _checksum16(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f">{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return (~total) & 0xFFFF


def _transport_checksum(src_ip, dst_ip, next_header, transport: bytes) -> int:
    pseudo = src_ip + dst_ip + struct.pack(">I", len(transport)) + b"\x00\x00\x00" + bytes([next_header])
    cs = _checksum16(pseudo + transport)
    return cs if cs != 0 else 0xFFFF


def build_ipv6_frame(src_mac, dst_mac, src_ip, dst_ip, next_header, hop_limit, transport) -> bytes:
    eth = pcap_mod.parse_mac(dst_mac) + pcap_mod.parse_mac(src_mac) + struct.pack(">H", ETHERTYPE_IPV6)
    ip = struct.pack(">IHBB", 0x60000000, len(transport), next_header, hop_limit) + src_ip + dst_ip
    return eth + ip + transport


def build_udp_transport(payload: bytes) -> bytes:
    header = struct.pack(">HHHH", UDP_SRC_PORT, UDP_DST_PORT, 8 + len(payload), 0)
    cs = _transport_checksum(SENDER_IP, RECEIVER_IP, 17, header + payload)
    return header[:6] + struct.pack(">H", cs) + payload


def build_icmpicmp6_transport(icmp_type, seq, payload, src_ip, dst_ip) -> bytes:
    header = struct.pack(">BBHHH", icmp_type, 0, 0, ICMP_ID, seq)
    cs = _transport_checksum(src_ip, dst_ip, 58, header + payload)
    return struct.pack(">BBHHH", icmp_type, 0, cs, ICMP_ID, seq) + payload


def build_opaque_frame(src_mac, dst_mac, payload: bytes) -> bytes:
    return (
        pcap_mod.parse_mac(dst_mac) + pcap_mod.parse_mac(src_mac)
        + struct.pack(">H", ETHERTYPE_OPAQUE) + payload
    )


# --- generation ---------------------------------------------------------------

@dataclass
class _NodeState:
    spec: NodeSpec
    mac: str
    frames: list[tuple[int, bytes]] = field(default_factory=list)  # skewed ts, frame

    def record(self, true_ts: int, frame: bytes, rng: random.Random) -> None:
        if self.spec.capture_loss > 0.0 and rng.random() < self.spec.capture_loss:
            return
        self.frames.append((true_ts + self.spec.clock_skew_us, frame))


def generate(spec: ScenarioSpec) -> TruthBundle:
    """Generate the full bundle for one scenario. Deterministic per seed."""
    rng = random.Random(spec.seed)
    nodes = {n.name: _NodeState(n, f"02:00:00:00:00:{i + 1:02x}") for i, n in enumerate(spec.nodes)}
    links = {(l.src, l.dst): l for l in spec.links}

    t0 = spec.start_epoch_us
    end_us = t0 + int(spec.duration_s * 1_000_000)
    journeys: list[TruthJourney] = []
    first_send = None

    for flow_index, flow in enumerate(spec.flows):
        flow_start = t0 + int(flow.start_s * 1_000_000)
        flow_dur = flow.duration_s if flow.duration_s is not None else spec.duration_s - flow.start_s
        count = int(flow_dur * flow.rate_pps)
        for seq in range(count):
            send_ts = flow_start + round(seq * 1_000_000 / flow.rate_pps)
            if send_ts >= end_us:
                break
            route = _active_route(spec, (send_ts - t0) / 1_000_000)
            journey = _send_packet(spec, nodes, links, route, flow, seq, send_ts, rng)
            journeys.append(journey)
            if first_send is None or send_ts < first_send:
                first_send = send_ts

    captures = {}
    for name, state in nodes.items():
        state.frames.sort(key=lambda f: f[0])
        captures[name] = pcap_mod.write_frames(state.frames)

    nmea = {}
    gps_start = (t0 // 1_000_000 - 2) * 1_000_000
    gps_end = end_us + 2_000_000
    for name, state in nodes.items():
        nmea[name] = _generate_nmea(state.spec, gps_start, gps_end)

    logs = _generate_logs(spec, journeys, first_send if first_send is not None else t0)

    return TruthBundle(
        spec=spec,
        captures=captures,
        nmea=nmea,
        logs=logs,
        journeys=journeys,
        t0=first_send if first_send is not None else t0,
    )


def _active_route(spec: ScenarioSpec, at_s: float) -> tuple[str, ...]:
    for route in spec.routes:
        if route.until_s is None or at_s < route.until_s:
            return route.path
    return spec.routes[-1].path


def _flow_payload(flow: FlowSpec, seq: int, seed: int, rng: random.Random) -> bytes:
    if flow.kind == "opaque":
        return rng.randbytes(flow.payload_bytes)
    # Scenario-tagged filler so distinct scenarios never share packet bytes.
    tag = (seq + seed * 131) & 0xFF
    pad = flow.payload_bytes - 4
    if flow.kind == "udp":
        return struct.pack(">I", seq) + bytes([tag]) * pad
    return struct.pack(">I", seq) + bytes([(tag + i) & 0xFF for i in range(pad)])  # ping body


def _frame_for(flow: FlowSpec, seq: int, src_mac, dst_mac, hop_limit, payload, reply=False) -> bytes:
    if flow.kind == "udp":
        return build_ipv6_frame(src_mac, dst_mac, SENDER_IP, RECEIVER_IP, 17, hop_limit,
                                build_udp_transport(payload))
    if flow.kind == "ping":
        wire_seq = (seq + 1) % 65536  # ping numbers probes from 1 on the wire and in its log
        if reply:
            transport = build_icmpicmp6_transport(129, wire_seq, payload, RECEIVER_IP, SENDER_IP)
            return build_ipv6_frame(src_mac, dst_mac, RECEIVER_IP, SENDER_IP, 58, hop_limit, transport)
        transport = build_icmpicmp6_transport(128, wire_seq, payload, SENDER_IP, RECEIVER_IP)
        return build_ipv6_frame(src_mac, dst_mac, SENDER_IP, RECEIVER_IP, 58, hop_limit, transport)
    return build_opaque_frame(src_mac, dst_mac, payload)


def _walk(spec, nodes, links, path, flow, seq, send_ts, rng, frame_builder):
    """Transmit one packet along path; returns (fate, reached, links_sent/rcvd, arrival_ts)."""
    links_sent: list[str] = []
    links_received: list[str] = []
    reached = [path[0]]
    now = send_ts
    for hop, (a, b) in enumerate(zip(path, path[1:])):
        frame = frame_builder(nodes[a].mac, nodes[b].mac, BASE_HOP_LIMIT - hop)
        link = links.get((a, b))
        link_name = f"{a}>{b}"
        nodes[a].record(now, frame, rng)
        links_sent.append(link_name)
        retransmit = link is not None and link.retransmit_probability > 0.0 and (
            rng.random() < link.retransmit_probability
        )
        if link is not None and link.drop.decide(seq, rng):
            return f"link_loss:{link_name}", reached, links_sent, links_received, None
        arrive = now + spec.latency.draw("prop_us", rng)
        nodes[b].record(arrive, frame, rng)
        if retransmit:
            # A MAC-level retransmission: the same frame appears again at both ends.
            re_ts = now + spec.latency.draw("prop_us", rng) + 1000
            nodes[a].record(re_ts, frame, rng)
            nodes[b].record(re_ts + spec.latency.draw("prop_us", rng), frame, rng)
        links_received.append(link_name)
        reached.append(b)
        if b == path[-1]:
            return "delivered", reached, links_sent, links_received, arrive
        if nodes[b].spec.in_node_drop.active and nodes[b].spec.in_node_drop.decide(seq, rng):
            return f"in_node_loss:{b}", reached, links_sent, links_received, None
        now = arrive + spec.latency.draw("fwd_us", rng)
    return "delivered", reached, links_sent, links_received, now


def _send_packet(spec, nodes, links, route, flow, seq, send_ts, rng) -> TruthJourney:
    payload = _flow_payload(flow, seq, spec.seed, rng)

    def builder(src_mac, dst_mac, hop_limit):
        return _frame_for(flow, seq, src_mac, dst_mac, hop_limit, payload)

    first_frame = builder(nodes[route[0]].mac, nodes[route[1]].mac, BASE_HOP_LIMIT)
    digest = pcap_mod.packet_digest(first_frame, LinkType.ETHERNET)

    fate, reached, links_sent, links_received, arrival = _walk(
        spec, nodes, links, route, flow, seq, send_ts, rng, builder
    )

    rtt_ms = None
    if flow.kind == "ping" and fate == "delivered":
        proc = spec.latency.draw("proc_us", rng)
        reply_path = tuple(reversed(route))

        def reply_builder(src_mac, dst_mac, hop_limit):
            return _frame_for(flow, seq, src_mac, dst_mac, hop_limit, payload, reply=True)

        reply_fate, _, _, _, reply_arrival = _walk(
            spec, nodes, links, reply_path, flow, seq, arrival + proc, rng, reply_builder
        )
        if reply_fate == "delivered":
            rtt_ms = float(f"{(reply_arrival - send_ts) / 1000:.3f}")

    return TruthJourney(
        flow_kind=flow.kind,
        seq=seq,
        digest=digest,
        send_ts=send_ts,
        payload_len=len(payload),
        fate=fate,
        path_nodes=tuple(reached),
        links_sent=tuple(links_sent),
        links_received=tuple(links_received),
        rtt_ms=rtt_ms,
    )


def _motion_position(motion: MotionSpec | None, t_s: float) -> tuple[float, float, float]:
    """(lat, lon, speed) along the waypoint script at t_s seconds from start."""
    if motion is None or not motion.waypoints:
        return 0.0, 0.0, 0.0
    if len(motion.waypoints) == 1 or motion.speed_mps <= 0:
        lat, lon = motion.waypoints[0]
        return lat, lon, 0.0
    remaining = motion.speed_mps * max(t_s, 0.0)
    for (lat1, lon1), (lat2, lon2) in zip(motion.waypoints, motion.waypoints[1:]):
        seg = haversine_distance(lat1, lon1, lat2, lon2)
        if seg <= 0:
            continue
        if remaining <= seg:
            f = remaining / seg
            return lat1 + f * (lat2 - lat1), lon1 + f * (lon2 - lon1), motion.speed_mps
        remaining -= seg
    lat, lon = motion.waypoints[-1]
    return lat, lon, 0.0


def _generate_nmea(node: NodeSpec, start_us: int, end_us: int) -> str:
    lines = []
    t = start_us
    while t <= end_us:
        lines.append(_rmc_sentence(node, t, (t - start_us) / 1_000_000))
        t += 1_000_000
    return "\n".join(lines) + "\n"


def _rmc_sentence(node: NodeSpec, ts_us: int, motion_t: float) -> str:
    lat, lon, speed = _motion_position(node.motion, motion_t - 2.0)
    dt = _dt.datetime.fromtimestamp(ts_us / 1_000_000, tz=_dt.timezone.utc)
    lat_str, lat_h = format_coord(lat, is_lat=True)
    lon_str, lon_h = format_coord(lon, is_lat=False)
    knots = speed / KNOTS_TO_MPS
    body = (
        f"GPRMC,{dt:%H%M%S},A,{lat_str},{lat_h},{lon_str},{lon_h},"
        f"{knots:05.1f},,{dt:%d%m%y},,"
    )
    return f"${body}*{nmea_checksum(body):02X}"


def _generate_logs(spec: ScenarioSpec, journeys: list[TruthJourney], t0: int) -> dict[str, str]:
    logs: dict[str, str] = {}
    udp = [j for j in journeys if j.flow_kind == "udp"]
    if udp:
        width = 1_000_000
        per_slot: dict[int, dict] = defaultdict(lambda: {"sent": 0, "delivered": 0, "bytes_sent": 0, "bytes_rcvd": 0})
        for j in udp:
            k = (j.send_ts - t0) // width
            s = per_slot[k]
            s["sent"] += 1
            s["bytes_sent"] += j.payload_len
            if j.fate == "delivered":
                s["delivered"] += 1
                s["bytes_rcvd"] += j.payload_len
        sender_lines = ["------------------------------------------------------------",
                        f"Client connecting to [{pcap_mod.format_ip(RECEIVER_IP)}], UDP port {UDP_DST_PORT}",
                        "------------------------------------------------------------"]
        receiver_lines = ["------------------------------------------------------------",
                          f"Server listening on UDP port {UDP_DST_PORT}",
                          "------------------------------------------------------------"]
        for k in sorted(per_slot):
            s = per_slot[k]
            sender_lines.append(
                f"[  3] {float(k):4.1f}-{float(k + 1):4.1f} sec  {s['bytes_sent']} Bytes  {s['bytes_sent'] * 8} bits/sec"
            )
            lost = s["sent"] - s["delivered"]
            receiver_lines.append(
                f"[  3] {float(k):4.1f}-{float(k + 1):4.1f} sec  {s['bytes_rcvd']} Bytes  {s['bytes_rcvd'] * 8} bits/sec"
                f"   0.500 ms {lost:5d}/{s['sent']:5d} (0%)"
            )
        logs["sender_iperf"] = "\n".join(sender_lines) + "\n"
        logs["receiver_iperf"] = "\n".join(receiver_lines) + "\n"

    pings = [j for j in journeys if j.flow_kind == "ping"]
    if pings:
        dst = pcap_mod.format_ip(RECEIVER_IP)
        lines = [f"PING {dst}({dst}) {pings[0].payload_len} data bytes"]
        for j in pings:
            if j.rtt_ms is not None:
                lines.append(
                    f"{j.payload_len + 8} bytes from {dst}: icmp_seq={j.seq + 1} ttl=64 time={j.rtt_ms:.3f} ms"
                )
        logs["sender_ping"] = "\n".join(lines) + "\n"
    return logs


# --- bundle I/O and comparison -------------------------------------------------

def write_bundle(bundle: TruthBundle, out_dir: str | Path) -> None:
    out = Path(out_dir)
    for sub in ("captures", "gps", "logs", "truth"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for name, data in sorted(bundle.captures.items()):
        (out / "captures" / f"{name}.pcap").write_bytes(data)
    for name, text in sorted(bundle.nmea.items()):
        (out / "gps" / f"{name}.nmea").write_text(text, encoding="utf-8")
    for role, text in sorted(bundle.logs.items()):
        (out / "logs" / f"{role}.log").write_text(text, encoding="utf-8")
    (out / "truth" / "truth.json").write_text(format_truth(bundle), encoding="utf-8")
    (out / "scenario.json").write_text(
        json.dumps(_scenario_tree(bundle.spec), indent=2) + "\n", encoding="utf-8"
    )


def format_truth(bundle: TruthBundle) -> str:
    tree = {
        "scenario": bundle.spec.name,
        "seed": bundle.spec.seed,
        "t0_us": bundle.t0,
        "slot_width_s": bundle.spec.slot_width_s,
        "sender": bundle.spec.sender,
        "receiver": bundle.spec.receiver,
        "clock_skews_us": {n.name: n.clock_skew_us for n in bundle.spec.nodes},
        "tally": bundle.tally(),
        "links": bundle.link_totals(),
        "slots": [
            {
                "slot": s["slot"],
                "sent": s["sent"],
                "delivered": s["delivered"],
                "bytes": s["bytes"],
                "links": s["links"],
                "rtts_ms": s["rtts"],
            }
            for s in bundle.slot_counts()
        ],
        "journeys": [
            {
                "digest": f"{j.digest:016x}",
                "flow": j.flow_kind,
                "seq": j.seq,
                "send_ts": j.send_ts,
                "payload_len": j.payload_len,
                "fate": j.fate,
                "path": list(j.path_nodes),
            }
            for j in bundle.journeys
        ],
    }
    return json.dumps(tree, indent=2) + "\n"


def _scenario_tree(spec: ScenarioSpec) -> dict:
    tree = {
        "name": spec.name,
        "seed": spec.seed,
        "duration_s": spec.duration_s,
        "start_epoch_us": spec.start_epoch_us,
        "slot_width_s": spec.slot_width_s,
        "nodes": [],
        "links": [],
        "routes": [{"path": list(r.path), **({"until_s": r.until_s} if r.until_s is not None else {})} for r in spec.routes],
        "flows": [
            {
                "kind": f.kind, "rate_pps": f.rate_pps, "payload_bytes": f.payload_bytes,
                **({"start_s": f.start_s} if f.start_s else {}),
                **({"duration_s": f.duration_s} if f.duration_s is not None else {}),
            }
            for f in spec.flows
        ],
        "latency": {
            "prop_us": list(spec.latency.prop_us),
            "fwd_us": list(spec.latency.fwd_us),
            "proc_us": list(spec.latency.proc_us),
        },
    }
    for n in spec.nodes:
        item: dict = {"name": n.name, "role": n.role.value}
        if n.motion is not None:
            item["motion"] = {
                "waypoints": [list(w) for w in n.motion.waypoints],
                "speed_mps": n.motion.speed_mps,
            }
        if n.clock_skew_us:
            item["clock_skew_us"] = n.clock_skew_us
        if n.capture_loss:
            item["capture_loss"] = n.capture_loss
        if n.in_node_drop.active:
            rule: dict = {}
            if n.in_node_drop.modulo is not None:
                rule["modulo"] = list(n.in_node_drop.modulo)
            if n.in_node_drop.probability:
                rule["probability"] = n.in_node_drop.probability
            item["in_node_drop"] = rule
        tree["nodes"].append(item)
    for l in spec.links:
        item = {"src": l.src, "dst": l.dst}
        if l.drop.active:
            rule = {}
            if l.drop.modulo is not None:
                rule["modulo"] = list(l.drop.modulo)
            if l.drop.probability:
                rule["probability"] = l.drop.probability
            item["drop"] = rule
        if l.retransmit_probability:
            item["retransmit_probability"] = l.retransmit_probability
        tree["links"].append(item)
    return tree


def load_truth(bundle_dir: str | Path) -> dict:
    return json.loads((Path(bundle_dir) / "truth" / "truth.json").read_text(encoding="utf-8"))

def compare(truth: dict, report, trace_entries) -> list[str]:
    """Field-by-field comparison of an analysis against recorded ground truth.

    Counts are integer-exact; PDR and throughput must equal the values implied
    by the integers; jitter is checked to 1e-9 ms and clock offsets to 5 ms.
    Returns a list of human-readable mismatch entries; empty means equal.
    """
    diffs: list[str] = []

    def check(name, expected, actual):
        if expected != actual:
            diffs.append(f"{name}: truth={expected!r} analyzed={actual!r}")

    def check_close(name, expected, actual, tol):
        if actual is None or abs(expected - actual) > tol:
            diffs.append(f"{name}: truth={expected!r} analyzed={actual!r} (tol {tol})")

    width_s = truth["slot_width_s"]
    check("slot_width_s", width_s, report.slot_width_s)

    # Per-packet fates and paths, keyed by digest.
    by_digest = {e.digest: e for e in trace_entries}
    truth_digests = set()
    for tj in truth["journeys"]:
        digest = int(tj["digest"], 16)
        truth_digests.add(digest)
        entry = by_digest.get(digest)
        if entry is None:
            diffs.append(f"journey {tj['digest']}: missing from trace (truth fate {tj['fate']})")
            continue
        check(f"journey {tj['digest']} fate", tj["fate"], entry.fate)
        if tj["fate"] == "delivered":
            check(f"journey {tj['digest']} path", tuple(tj["path"]), entry.path)
    for digest in sorted(by_digest.keys() - truth_digests):
        diffs.append(f"journey {digest:016x}: analyzed but not in truth")

    # Fate tallies.
    tally = {"sent": 0, "delivered": 0, "unobserved": 0, "ambiguous": 0,
             "link_loss": {}, "in_node_loss": {}}
    for e in trace_entries:
        tally["sent"] += 1
        if e.fate == "delivered":
            tally["delivered"] += 1
        elif e.fate == "ambiguous":
            tally["ambiguous"] += 1
        elif e.fate == "unobserved":
            tally["unobserved"] += 1
        elif e.fate.startswith("link_loss:"):
            link = e.fate.split(":", 1)[1]
            tally["link_loss"][link] = tally["link_loss"].get(link, 0) + 1
        elif e.fate.startswith("in_node_loss:"):
            node = e.fate.split(":", 1)[1]
            tally["in_node_loss"][node] = tally["in_node_loss"].get(node, 0) + 1
    for key in ("sent", "delivered", "unobserved", "ambiguous", "link_loss", "in_node_loss"):
        check(f"tally.{key}", truth["tally"][key], tally[key])

    # Per-link totals summed over the report's slots.
    link_totals: dict[str, dict] = {}
    for slot in report.data:
        for l in slot.links:
            t = link_totals.setdefault(str(l.link), {"sent": 0, "received": 0, "bytes": 0})
            t["sent"] += l.sent
            t["received"] += l.received
            t["bytes"] += l.bytes
    check("links", truth["links"], link_totals)

    # Per-slot counts; slots the truth does not know about must carry no traffic.
    report_slots = {slot.index: slot for slot in report.data}
    truth_slots = {s["slot"]: s for s in truth["slots"]}
    for k, ts in sorted(truth_slots.items()):
        slot = report_slots.get(k)
        if slot is None:
            diffs.append(f"slot {k}: missing from report")
            continue
        e = slot.end_to_end
        check(f"slot {k} sent", ts["sent"], e.sent)
        check(f"slot {k} delivered", ts["delivered"], e.delivered)
        check(f"slot {k} bytes", ts["bytes"], e.bytes)
        check(f"slot {k} throughput", 8.0 * ts["bytes"] / width_s, e.throughput_bps)
        if ts["sent"]:
            expected_pdr = float(f"{100.0 * ts['delivered'] / ts['sent']:.6f}")
            check_close(f"slot {k} pdr", expected_pdr, e.pdr, 5e-7)
        slot_links = {str(l.link): {"sent": l.sent, "received": l.received} for l in slot.links}
        check(f"slot {k} links", ts["links"], slot_links)
        if ts["rtts_ms"]:
            mean = sum(ts["rtts_ms"]) / len(ts["rtts_ms"])
            mad = sum(abs(r - mean) for r in ts["rtts_ms"]) / len(ts["rtts_ms"])
            check_close(f"slot {k} rtt_avg_ms", mean, e.rtt_avg_ms, 1e-9)
            check_close(f"slot {k} jitter_rtt_ms", mad, e.jitter_rtt_ms, 1e-9)
    for k, slot in sorted(report_slots.items()):
        if k not in truth_slots and slot.end_to_end.sent != 0:
            diffs.append(f"slot {k}: analyzed sent={slot.end_to_end.sent}, truth has no traffic")

    # Clock offsets: the analyzer's offset map must recover the injected skews.
    skews = truth["clock_skews_us"]
    sender_skew = skews.get(truth["sender"], 0)
    for name, offset in sorted(report.clock_offsets_us.items()):
        if name in skews:
            check_close(f"clock_offset {name}", sender_skew - skews[name], offset, 5000)

    return diffs

def packaged_scenarios() -> dict[str, ScenarioSpec]:
    """The scenario suite shipped with the package, keyed by name."""
    from importlib import resources

    out = {}
    root = resources.files("hoptrace").joinpath("scenarios")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            spec = parse_scenario(json.loads(entry.read_text(encoding="utf-8")))
            out[spec.name] = spec
    return out
