"""NMEA 0183 parsing: sentences to validated per-node GeoTracks.

RMC is the primary fix source (date, time, position and speed in one
sentence); GGA can fill a gap only when an RMC close enough in time donates
its date. GPS time is treated as UTC.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field

from .errors import EmptyTrackError, SentenceFormatError
from .model import GeoFix, GeoTrack, NodeId, Timestamp

KNOTS_TO_MPS = 0.514444
MAX_PLAUSIBLE_SPEED_MPS = 150.0
GGA_DATE_DONOR_WINDOW_US = 500_000
DAY_US = 86_400_000_000


@dataclass(frozen=True)
class NmeaSentence:
    talker: str  # e.g. "GP"
    stype: str  # e.g. "RMC", "GGA"
    fields: tuple[str, ...]  # payload fields after the type token
    checksum_ok: bool
    ts: Timestamp | None = None  # absolute, RMC only
    time_of_day_us: int | None = None  # microseconds since UTC midnight
    lat: float | None = None
    lon: float | None = None
    speed: float | None = None  # m/s
    course: float | None = None
    status_valid: bool = True  # RMC status field, 'A' = valid


@dataclass
class TrackCounters:
    checksum_failures: int = 0
    unknown_sentences: int = 0
    invalid_sentences: int = 0  # unparsable fields or void status
    duplicate_fixes: int = 0
    jump_fixes: int = 0


def nmea_checksum(body: str) -> int:
    """XOR of all characters between '$' and '*'."""
    cs = 0
    for ch in body:
        cs ^= ord(ch)
    return cs


def parse_sentence(line: str) -> NmeaSentence:
    """Parse one '$...*hh' framed line. CR/LF is tolerated and stripped."""
    line = line.strip()
    if not line.startswith("$"):
        raise SentenceFormatError(f"not an NMEA sentence: {line[:20]!r}")
    star = line.rfind("*")
    if star == -1 or len(line) < star + 3:
        raise SentenceFormatError(f"missing checksum framing: {line[:30]!r}")
    body = line[1:star]
    try:
        claimed = int(line[star + 1 : star + 3], 16)
    except ValueError:
        raise SentenceFormatError(f"non-hex checksum: {line[star + 1 : star + 3]!r}")
    ok = nmea_checksum(body) == claimed

    parts = body.split(",")
    head = parts[0]
    talker, stype = (head[:2], head[2:]) if len(head) > 3 else ("", head)
    fields = tuple(parts[1:])

    base = dict(talker=talker, stype=stype, fields=fields, checksum_ok=ok)
    if not ok:
        return NmeaSentence(**base)
    try:
        if stype == "RMC":
            return _parse_rmc(base, fields)
        if stype == "GGA":
            return _parse_gga(base, fields)
    except (ValueError, IndexError):
        return NmeaSentence(**base, status_valid=False)
    return NmeaSentence(**base)


def _parse_rmc(base: dict, f: tuple[str, ...]) -> NmeaSentence:
    tod = _parse_time_of_day(f[0])
    status = f[1] == "A"
    lat = _parse_coord(f[2], f[3], degrees_digits=2)
    lon = _parse_coord(f[4], f[5], degrees_digits=3)
    speed = float(f[6]) * KNOTS_TO_MPS if f[6] else None
    course = float(f[7]) % 360.0 if f[7] else None
    date = _parse_date(f[8])
    ts = None
    if tod is not None and date is not None:
        midnight = _dt.datetime.combine(date, _dt.time(), tzinfo=_dt.timezone.utc)
        ts = int(midnight.timestamp()) * 1_000_000 + tod
    return NmeaSentence(
        **base, ts=ts, time_of_day_us=tod, lat=lat, lon=lon,
        speed=speed, course=course, status_valid=status,
    )


def _parse_gga(base: dict, f: tuple[str, ...]) -> NmeaSentence:
    tod = _parse_time_of_day(f[0])
    lat = _parse_coord(f[1], f[2], degrees_digits=2)
    lon = _parse_coord(f[3], f[4], degrees_digits=3)
    valid = f[5] not in ("", "0")  # fix quality 0 = no fix
    return NmeaSentence(**base, time_of_day_us=tod, lat=lat, lon=lon, status_valid=valid)


def _parse_time_of_day(text: str) -> int | None:
    if len(text) < 6:
        return None
    h, m = int(text[0:2]), int(text[2:4])
    s = float(text[4:])
    if not (0 <= h < 24 and 0 <= m < 60 and 0 <= s < 61):
        raise ValueError(f"bad time of day {text!r}")
    return int(round((h * 3600 + m * 60 + s) * 1_000_000))


def _parse_date(text: str) -> _dt.date | None:
    if len(text) != 6:
        return None
    day, month, year = int(text[0:2]), int(text[2:4]), int(text[4:6])
    return _dt.date(2000 + year if year < 70 else 1900 + year, month, day)


def _parse_coord(value: str, hemisphere: str, degrees_digits: int) -> float | None:
    if not value or not hemisphere:
        return None
    degrees = int(value[:degrees_digits])
    minutes = float(value[degrees_digits:])
    if minutes >= 60.0:
        raise ValueError(f"minutes out of range in {value!r}")
    dec = degrees + minutes / 60.0
    if hemisphere in ("S", "W"):
        dec = -dec
    elif hemisphere not in ("N", "E"):
        raise ValueError(f"bad hemisphere {hemisphere!r}")
    return dec


def format_coord(decimal_degrees: float, is_lat: bool) -> tuple[str, str]:
    """Decimal degrees back to (ddmm.mmmm, hemisphere). Stable to 1e-6 deg."""
    hemis = ("N", "S") if is_lat else ("E", "W")
    hemi = hemis[0] if decimal_degrees >= 0 else hemis[1]
    v = abs(decimal_degrees)
    degrees = int(v)
    minutes = (v - degrees) * 60.0
    if minutes >= 59.99995:  # would round to 60
        degrees += 1
        minutes = 0.0
    width = 2 if is_lat else 3
    return f"{degrees:0{width}d}{minutes:07.4f}", hemi


def build_track(
    sentences: list[NmeaSentence], node: NodeId, counters: TrackCounters | None = None
) -> GeoTrack:
    """Assemble a validated track from parsed sentences of one node.

    Fixes come from valid RMC sentences; GGA fills in only where an RMC within
    0.5 s can donate its date. Duplicate timestamps keep the first fix; fixes
    implying over 150 m/s against the previous accepted one are rejected.
    """
    from .model import haversine_distance

    counters = counters if counters is not None else TrackCounters()
    candidates: list[GeoFix] = []
    rmc_times: list[tuple[int, Timestamp]] = []  # (time-of-day, absolute ts)

    date_carry_us = 0
    last_tod = None
    last_ts = None
    for s in sentences:
        if not s.checksum_ok:
            counters.checksum_failures += 1
            continue
        if s.stype not in ("RMC", "GGA"):
            counters.unknown_sentences += 1
            continue
        if s.stype == "RMC":
            if not s.status_valid or s.ts is None or s.lat is None or s.lon is None:
                counters.invalid_sentences += 1
                continue
            # A backwards time-of-day jump of more than 12 h means midnight
            # passed; carry a day only if the sentence's own date field did
            # not advance with it.
            if (
                last_tod is not None
                and last_tod - s.time_of_day_us > DAY_US // 2
                and s.ts + date_carry_us <= last_ts
            ):
                date_carry_us += DAY_US
            last_tod = s.time_of_day_us
            ts = s.ts + date_carry_us
            last_ts = ts
            rmc_times.append((s.time_of_day_us, ts))
            candidates.append(
                GeoFix(node=node, ts=ts, lat=s.lat, lon=s.lon,
                       speed=s.speed or 0.0, course=s.course)
            )

    for s in sentences:
        if s.stype != "GGA" or not s.checksum_ok:
            continue
        if not s.status_valid or s.time_of_day_us is None or s.lat is None or s.lon is None:
            counters.invalid_sentences += 1
            continue
        donor = _nearest_rmc(rmc_times, s.time_of_day_us)
        if donor is None:
            counters.invalid_sentences += 1
            continue
        donor_tod, donor_ts = donor
        delta = s.time_of_day_us - donor_tod
        if delta > DAY_US // 2:
            delta -= DAY_US
        elif delta < -DAY_US // 2:
            delta += DAY_US
        candidates.append(
            GeoFix(node=node, ts=donor_ts + delta, lat=s.lat, lon=s.lon, speed=0.0)
        )

    candidates.sort(key=lambda f: f.ts)
    fixes: list[GeoFix] = []
    for fix in candidates:
        if fixes and fix.ts == fixes[-1].ts:
            counters.duplicate_fixes += 1
            continue
        if fixes:
            prev = fixes[-1]
            dt_s = (fix.ts - prev.ts) / 1_000_000
            implied = haversine_distance(prev.lat, prev.lon, fix.lat, fix.lon) / dt_s
            if implied >= MAX_PLAUSIBLE_SPEED_MPS:
                counters.jump_fixes += 1
                continue
        fixes.append(fix)
    if not fixes:
        raise EmptyTrackError(f"no usable fixes for {node}")
    return GeoTrack(node=node, fixes=tuple(fixes))


def _nearest_rmc(rmc_times: list[tuple[int, Timestamp]], tod: int):
    best = None
    for donor_tod, donor_ts in rmc_times:
        d = abs(donor_tod - tod)
        d = min(d, DAY_US - d)  # distance across midnight
        if d <= GGA_DATE_DONOR_WINDOW_US and (best is None or d < best[0]):
            best = (d, donor_tod, donor_ts)
    return None if best is None else (best[1], best[2])


def parse_track(text: str, node: NodeId) -> tuple[GeoTrack, TrackCounters]:
    """Parse a whole NMEA file for one node."""
    counters = TrackCounters()
    sentences = []
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            sentences.append(parse_sentence(line))
        except SentenceFormatError:
            counters.invalid_sentences += 1
    track = build_track(sentences, node, counters)
    return track, counters
