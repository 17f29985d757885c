"""Parsers for end-node traffic-generator logs (ping-family and iperf-style).

Line-oriented and whitespace-tolerant; unknown lines are skipped and counted.
Summaries are always recomputed from the per-probe data, never trusted from
the tool's own footer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import UnrecognizedLogError

_PING_REPLY = re.compile(
    r"(?P<size>\d+)\s+bytes\s+from\s+.*?icmp_seq=(?P<seq>\d+).*?time=(?P<rtt>[\d.]+)\s*ms"
)
_PING_HEADER = re.compile(r"^PING\b")
_PING_NO_ANSWER = re.compile(r"no answer yet for icmp_seq=(?P<seq>\d+)")

_IPERF_INTERVAL = re.compile(
    r"\[\s*\d+\]\s+(?P<start>[\d.]+)\s*-\s*(?P<end>[\d.]+)\s+sec"
    r"\s+(?P<size>[\d.]+)\s+(?P<sunit>[KMG]?)Bytes"
    r"\s+(?P<rate>[\d.]+)\s+(?P<runit>[KMG]?)bits/sec"
    r"(?:\s+(?P<jitter>[\d.]+)\s+ms\s+(?P<lost>\d+)\s*/\s*(?P<total>\d+))?"
)

_SIZE_UNIT = {"": 1, "K": 1024, "M": 1024**2, "G": 1024**3}
_RATE_UNIT = {"": 1, "K": 1000, "M": 1000**2, "G": 1000**3}


@dataclass(frozen=True)
class PingProbe:
    seq: int
    rtt_ms: float | None  # absent means lost
    size: int = 0


@dataclass(frozen=True)
class PingSummary:
    transmitted: int
    received: int
    lost: int
    rtt_min_ms: float | None
    rtt_avg_ms: float | None
    rtt_max_ms: float | None


@dataclass
class PingLog:
    probes: list[PingProbe]
    summary: PingSummary
    duplicates: int = 0
    skipped_lines: int = 0


@dataclass(frozen=True)
class IperfInterval:
    start_s: float
    end_s: float
    bytes: int
    throughput_bps: float
    jitter_ms: float | None = None
    lost: int | None = None
    total: int | None = None


@dataclass
class IperfLog:
    intervals: list[IperfInterval]
    side: str  # "sender" | "receiver"
    coarse: bool = False  # True when only a summary line was available
    rejected_lines: int = 0


def parse_ping_log(text: str) -> PingLog:
    """Parse a ping/ping6 transcript into per-sequence probes plus a summary.

    Sequences missing between the lowest and highest observed ones are
    recorded as lost probes. Duplicate replies keep the first and are counted.
    """
    seen: dict[int, PingProbe] = {}
    duplicates = 0
    skipped = 0
    explicit_losses: set[int] = set()
    saw_header = False
    for line in text.splitlines():
        if not line.strip():
            continue
        if _PING_HEADER.search(line):
            saw_header = True
            continue
        m = _PING_REPLY.search(line)
        if m:
            seq = int(m.group("seq"))
            if seq in seen:
                duplicates += 1
            else:
                seen[seq] = PingProbe(seq=seq, rtt_ms=float(m.group("rtt")), size=int(m.group("size")))
            continue
        m = _PING_NO_ANSWER.search(line)
        if m:
            explicit_losses.add(int(m.group("seq")))
            continue
        skipped += 1
    if not seen and not saw_header:
        raise UnrecognizedLogError("no ping header and no reply lines found")

    probes: list[PingProbe] = []
    if seen or explicit_losses:
        all_seqs = set(seen) | explicit_losses
        base = 0 if 0 in all_seqs else 1
        for seq in range(min(min(all_seqs), base), max(all_seqs) + 1):
            probes.append(seen.get(seq, PingProbe(seq=seq, rtt_ms=None)))

    rtts = [p.rtt_ms for p in probes if p.rtt_ms is not None]
    summary = PingSummary(
        transmitted=len(probes),
        received=len(rtts),
        lost=len(probes) - len(rtts),
        rtt_min_ms=min(rtts) if rtts else None,
        rtt_avg_ms=sum(rtts) / len(rtts) if rtts else None,
        rtt_max_ms=max(rtts) if rtts else None,
    )
    return PingLog(probes=probes, summary=summary, duplicates=duplicates, skipped_lines=skipped)


def parse_iperf_udp_log(text: str, side: str = "receiver") -> IperfLog:
    """Parse classic iperf interval reports for a UDP test.

    Receiver-side logs carry jitter and lost/total; sender-side logs carry
    transfer and rate only. A summary-only log yields one synthetic interval
    spanning the test, flagged coarse.
    """
    return _parse_iperf(text, side=side, udp=True)


def parse_iperf_tcp_log(text: str, side: str = "receiver") -> IperfLog:
    """Parse classic iperf interval reports for a TCP test."""
    return _parse_iperf(text, side=side, udp=False)


def _parse_iperf(text: str, side: str, udp: bool) -> IperfLog:
    intervals: list[IperfInterval] = []
    summary_rows: list[IperfInterval] = []
    rejected = 0
    last_end = 0.0
    for line in text.splitlines():
        m = _IPERF_INTERVAL.search(line)
        if not m:
            continue
        start, end = float(m.group("start")), float(m.group("end"))
        if end <= start:
            rejected += 1
            continue
        nbytes = int(float(m.group("size")) * _SIZE_UNIT[m.group("sunit")])
        rate = float(m.group("rate")) * _RATE_UNIT[m.group("runit")]
        jitter = lost = total = None
        if udp and m.group("jitter") is not None:
            jitter = float(m.group("jitter"))
            lost, total = int(m.group("lost")), int(m.group("total"))
            if lost > total:
                rejected += 1
                continue
        iv = IperfInterval(
            start_s=start, end_s=end, bytes=nbytes, throughput_bps=rate,
            jitter_ms=jitter, lost=lost, total=total,
        )
        if intervals and start == 0.0 and end >= last_end:
            summary_rows.append(iv)  # the final whole-test summary line
            continue
        if start < last_end:
            rejected += 1
            continue
        intervals.append(iv)
        last_end = end
    if not intervals:
        if summary_rows:
            return IperfLog(intervals=[summary_rows[-1]], side=side, coarse=True,
                            rejected_lines=rejected)
        raise UnrecognizedLogError("no iperf interval lines found")
    # A single interval spanning the whole test from 0 is a summary-only log;
    # genuine interval reports are at most a couple of seconds wide.
    coarse = (
        len(intervals) == 1
        and intervals[0].start_s == 0.0
        and intervals[0].end_s - intervals[0].start_s > 2.0
    )
    return IperfLog(intervals=intervals, side=side, coarse=coarse, rejected_lines=rejected)
