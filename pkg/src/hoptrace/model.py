"""Shared domain types, time-slot arithmetic and geodesic math.

All timestamps are integers: microseconds since the Unix epoch, UTC.
Values are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import BeforeStartError, EmptyTrackError, InvalidCoordinateError, NoPositionError

Timestamp = int  # microseconds since Unix epoch, UTC

EARTH_RADIUS_M = 6_371_000.0
MICROS_PER_SECOND = 1_000_000
DEFAULT_SLOT_WIDTH_US = 1 * MICROS_PER_SECOND
DEFAULT_GAP_TOLERANCE_US = 2 * MICROS_PER_SECOND


class Role(str, enum.Enum):
    MOBILE_ROUTER = "mobile_router"
    ACCESS_ROUTER = "access_router"
    END_NODE = "end_node"
    OTHER = "other"


_ROLE_PREFIXES = (("MR", Role.MOBILE_ROUTER), ("AR", Role.ACCESS_ROUTER), ("MNN", Role.END_NODE))


def role_for_name(name: str) -> Role:
    """Conventional role from a node name prefix (MR*, AR*, MNN*); OTHER otherwise."""
    for prefix, role in _ROLE_PREFIXES:
        if name.upper().startswith(prefix):
            return role
    return Role.OTHER


@dataclass(frozen=True, eq=False)
class NodeId:
    """A node label. Identity is the name; the role is fixed descriptive metadata."""

    name: str
    role: Role = Role.OTHER

    def __post_init__(self):
        if not self.name:
            raise ValueError("node name must be non-empty")

    def __eq__(self, other):
        return isinstance(other, NodeId) and self.name == other.name

    def __hash__(self):
        return hash(self.name)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class LinkId:
    """Directed link between two distinct nodes."""

    src: NodeId
    dst: NodeId

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError(f"link endpoints must differ: {self.src}")

    def __str__(self):
        return f"{self.src}>{self.dst}"


@dataclass(frozen=True)
class GeoFix:
    """One time-stamped position sample for a node."""

    node: NodeId
    ts: Timestamp
    lat: float
    lon: float
    speed: float  # m/s
    course: float | None = None  # degrees [0, 360)
    extrapolated: bool = False

    def __post_init__(self):
        _check_coordinates(self.lat, self.lon)
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")


@dataclass(frozen=True)
class GeoTrack:
    """Time-ordered, sanity-checked fixes for one node."""

    node: NodeId
    fixes: tuple[GeoFix, ...]

    @property
    def start(self) -> Timestamp:
        return self.fixes[0].ts

    @property
    def end(self) -> Timestamp:
        return self.fixes[-1].ts


@dataclass(frozen=True)
class Slotting:
    """One-second (by default) aggregation windows anchored at the experiment start.

    Slot k covers [t0 + k*width, t0 + (k+1)*width).
    """

    t0: Timestamp
    width_us: int = DEFAULT_SLOT_WIDTH_US

    def __post_init__(self):
        if self.width_us <= 0:
            raise ValueError("slot width must be positive")

    def slot_of(self, ts: Timestamp) -> int:
        return slot_of(ts, self.t0, self.width_us)

    def slot_start(self, index: int) -> Timestamp:
        return self.t0 + index * self.width_us

    def slot_mid(self, index: int) -> Timestamp:
        return self.t0 + index * self.width_us + self.width_us // 2


def _check_coordinates(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise InvalidCoordinateError(f"coordinates out of range: lat={lat} lon={lon}")


def haversine_distance(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters on a sphere of radius 6371 km."""
    _check_coordinates(lat1, lon1)
    _check_coordinates(lat2, lon2)
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = math.radians(lat2 - lat1)
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def slot_of(ts: Timestamp, t0: Timestamp, width_us: int = DEFAULT_SLOT_WIDTH_US) -> int:
    """Index of the window containing ts. ts must not precede t0."""
    if width_us <= 0:
        raise ValueError("slot width must be positive")
    if ts < t0:
        raise BeforeStartError(f"timestamp {ts} precedes start {t0}")
    return (ts - t0) // width_us


def interpolate_position(
    track: GeoTrack, ts: Timestamp, gap_tolerance_us: int = DEFAULT_GAP_TOLERANCE_US
) -> GeoFix:
    """Position of the track's node at ts.

    Linear interpolation between the bracketing fixes. Queries up to the gap
    tolerance before the first or after the last fix clamp to that fix and are
    flagged extrapolated; interior gaps wider than the tolerance, or queries
    further out, yield no position.
    """
    if not track.fixes:
        raise EmptyTrackError(f"track for {track.node} has no fixes")
    fixes = track.fixes
    if ts < fixes[0].ts:
        if fixes[0].ts - ts <= gap_tolerance_us:
            return _clamped(fixes[0], ts)
        raise NoPositionError(f"{track.node}: {ts} is {fixes[0].ts - ts} us before the track")
    if ts > fixes[-1].ts:
        if ts - fixes[-1].ts <= gap_tolerance_us:
            return _clamped(fixes[-1], ts)
        raise NoPositionError(f"{track.node}: {ts} is {ts - fixes[-1].ts} us past the track")

    lo, hi = 0, len(fixes) - 1
    while lo < hi:  # rightmost fix with ts <= query
        mid = (lo + hi + 1) // 2
        if fixes[mid].ts <= ts:
            lo = mid
        else:
            hi = mid - 1
    a = fixes[lo]
    if a.ts == ts:
        return a
    b = fixes[lo + 1]
    if b.ts - a.ts > gap_tolerance_us:
        raise NoPositionError(f"{track.node}: gap of {b.ts - a.ts} us around {ts} exceeds tolerance")
    f = (ts - a.ts) / (b.ts - a.ts)
    return GeoFix(
        node=track.node,
        ts=ts,
        lat=a.lat + f * (b.lat - a.lat),
        lon=a.lon + f * (b.lon - a.lon),
        speed=a.speed + f * (b.speed - a.speed),
        course=a.course if a.course is not None else b.course,
    )


def _clamped(fix: GeoFix, ts: Timestamp) -> GeoFix:
    return GeoFix(
        node=fix.node,
        ts=ts,
        lat=fix.lat,
        lon=fix.lon,
        speed=fix.speed,
        course=fix.course,
        extrapolated=True,
    )
