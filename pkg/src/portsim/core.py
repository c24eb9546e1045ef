"""Shared domain types, unit conversions, and geodesic helpers.

Positions are WGS-84 latitude/longitude degrees.  Distances on water are
computed on a sphere (haversine); at port scale the ellipsoidal correction
is far below the tolerances used anywhere in this project.

AIS sentinel values (heading 511, rate-of-turn -128) are normalised to
``None`` so that downstream arithmetic on an unavailable field raises
instead of silently producing garbage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone

KNOT_MS = 0.514444          # 1 knot in m/s
NM_M = 1852.0               # 1 nautical mile in metres
EARTH_RADIUS_KM = 6371.0
KM_PER_NM = NM_M / 1000.0

HEADING_UNAVAILABLE = 511   # raw AIS sentinel
ROT_UNAVAILABLE = -128      # raw AIS sentinel


class CoreError(Exception):
    """Base class for validation/geometry errors in this module."""


class MissingField(CoreError):
    def __init__(self, field):
        super().__init__(f"missing required field: {field}")
        self.field = field


class OutOfRange(CoreError):
    def __init__(self, field, value):
        super().__init__(f"field {field} out of range: {value!r}")
        self.field = field
        self.value = value


class UnparsableTimestamp(CoreError):
    def __init__(self, raw):
        super().__init__(f"unparsable timestamp: {raw!r}")
        self.raw = raw


class EmptyRoute(CoreError):
    pass


@dataclass(frozen=True)
class AisRecord:
    """One timestamped AIS observation of a vessel.

    ``heading`` and ``rot`` are ``None`` when the transponder reported the
    unavailable sentinel (511 / -128).
    """

    timestamp: datetime
    mmsi: str
    lat: float
    lon: float
    sog: float              # knots
    cog: float              # degrees [0, 360)
    heading: int | None     # degrees [0, 359], None = unavailable
    rot: float | None       # deg/min, None = unavailable
    draught: float          # metres
    ship_type: int
    ship_length: float      # metres
    ship_width: float       # metres


@dataclass(frozen=True)
class IotRecord:
    """One observation from a port IoT device (quay crane, yard truck, ...)."""

    timestamp: datetime
    equipment_index: str    # e.g. "YT1", "QC2"
    device_id: int
    lat: float
    lon: float
    altitude: float         # metres
    velocity: float         # m/s
    direction: float        # degrees [0, 360]
    work_type: str          # "Unloading" | "Loading"


@dataclass(frozen=True)
class Voyage:
    """A vessel's planned trip to its destination berth."""

    vessel_id: str
    route: tuple            # ((lat, lon), ...) origin -> destination berth
    start_time: datetime
    promised_eta: datetime
    max_speed: float        # knots
    van_count: int          # container moves to handle at the berth
    draught: float          # metres

    def __post_init__(self):
        if len(self.route) < 2:
            raise EmptyRoute("voyage route needs at least 2 waypoints")
        for a, b in zip(self.route, self.route[1:]):
            if a == b:
                raise OutOfRange("route", "consecutive duplicate waypoints")
        if self.promised_eta <= self.start_time:
            raise OutOfRange("promised_eta", self.promised_eta)
        if self.max_speed <= 0:
            raise OutOfRange("max_speed", self.max_speed)
        if self.van_count < 0:
            raise OutOfRange("van_count", self.van_count)


def utc(year, month, day, hour=0, minute=0, second=0, microsecond=0):
    """Convenience constructor for timezone-aware UTC instants."""
    return datetime(year, month, day, hour, minute, second, microsecond,
                    tzinfo=timezone.utc)


# -- timestamp parsing --------------------------------------------------------

_TS_FORMATS = (
    "%Y-%m-%d %H:%M:%S.%f UTC",
    "%Y-%m-%d %H:%M:%S UTC",
    "%Y-%m-%d %H:%M:%S.%f",
    "%Y-%m-%d %H:%M:%S",
)


def parse_timestamp(raw: str) -> datetime:
    """Parse the two timestamp layouts seen in AIS/IoT exports.

    Accepts "2019-07-03 00:00:15.015121 UTC" and RFC-3339 forms such as
    "2021-10-31T20:59:59Z".  Always returns an aware UTC datetime.
    """
    s = raw.strip()
    if len(s) > 10 and s[10] == "T":    # not `"T" in s` — "UTC" has one too
        try:
            dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
        except ValueError:
            raise UnparsableTimestamp(raw) from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.astimezone(timezone.utc)
    for fmt in _TS_FORMATS:
        try:
            return datetime.strptime(s, fmt).replace(tzinfo=timezone.utc)
        except ValueError:
            continue
    raise UnparsableTimestamp(raw)


# -- AIS validation -----------------------------------------------------------

_AIS_REQUIRED = ("timestamp", "mmsi", "lat", "lon", "sog", "cog", "heading",
                 "rot", "draught", "ship_type", "ship_length", "ship_width")


def _as_float(field, value):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise OutOfRange(field, value) from None


def validate_ais_record(raw: dict) -> AisRecord:
    """Validate a raw field map into a normalised :class:`AisRecord`.

    Sentinel values (heading 511, rot -128) map to ``None``.  Idempotent on
    already-valid records: feeding a record's fields back in reproduces it.
    """
    for field in _AIS_REQUIRED:
        if field not in raw or raw[field] is None and field not in ("heading", "rot"):
            raise MissingField(field)

    ts = raw["timestamp"]
    if isinstance(ts, str):
        ts = parse_timestamp(ts)
    elif not isinstance(ts, datetime):
        raise UnparsableTimestamp(ts)

    lat = _as_float("lat", raw["lat"])
    lon = _as_float("lon", raw["lon"])
    sog = _as_float("sog", raw["sog"])
    cog = _as_float("cog", raw["cog"])
    draught = _as_float("draught", raw["draught"])
    length = _as_float("ship_length", raw["ship_length"])
    width = _as_float("ship_width", raw["ship_width"])
    try:
        ship_type = int(raw["ship_type"])
    except (TypeError, ValueError):
        raise OutOfRange("ship_type", raw["ship_type"]) from None

    if not -90.0 <= lat <= 90.0:
        raise OutOfRange("lat", lat)
    if not -180.0 <= lon <= 180.0:
        raise OutOfRange("lon", lon)
    if sog < 0:
        raise OutOfRange("sog", sog)
    if not 0.0 <= cog < 360.0:
        raise OutOfRange("cog", cog)
    if draught < 0:
        raise OutOfRange("draught", draught)
    if length <= 0:
        raise OutOfRange("ship_length", length)
    if width <= 0:
        raise OutOfRange("ship_width", width)

    heading = raw["heading"]
    if heading is None:
        pass
    else:
        heading = int(_as_float("heading", heading))
        if heading == HEADING_UNAVAILABLE:
            heading = None
        elif not 0 <= heading <= 359:
            raise OutOfRange("heading", heading)

    rot = raw["rot"]
    if rot is not None:
        rot = _as_float("rot", rot)
        if rot == ROT_UNAVAILABLE:
            rot = None

    return AisRecord(timestamp=ts, mmsi=str(raw["mmsi"]), lat=lat, lon=lon,
                     sog=sog, cog=cog, heading=heading, rot=rot,
                     draught=draught, ship_type=ship_type,
                     ship_length=length, ship_width=width)


def validate_iot_record(raw: dict) -> IotRecord:
    """Validate a raw field map into an :class:`IotRecord`.

    Work type parses only from codes "U" (Unloading) and "L" (Loading).
    """
    required = ("timestamp", "equipment_index", "device_id", "lat", "lon",
                "altitude", "velocity", "direction", "work_type")
    for field in required:
        if field not in raw or raw[field] is None:
            raise MissingField(field)

    ts = raw["timestamp"]
    if isinstance(ts, str):
        ts = parse_timestamp(ts)

    lat = _as_float("lat", raw["lat"])
    lon = _as_float("lon", raw["lon"])
    if not -90.0 <= lat <= 90.0:
        raise OutOfRange("lat", lat)
    if not -180.0 <= lon <= 180.0:
        raise OutOfRange("lon", lon)
    velocity = _as_float("velocity", raw["velocity"])
    if velocity < 0:
        raise OutOfRange("velocity", velocity)
    direction = _as_float("direction", raw["direction"])
    if not 0.0 <= direction <= 360.0:
        raise OutOfRange("direction", direction)

    code = str(raw["work_type"]).strip()
    work = {"U": "Unloading", "L": "Loading",
            "Unloading": "Unloading", "Loading": "Loading"}.get(code)
    if work is None:
        raise OutOfRange("work_type", raw["work_type"])

    try:
        device_id = int(raw["device_id"])
    except (TypeError, ValueError):
        raise OutOfRange("device_id", raw["device_id"]) from None

    return IotRecord(timestamp=ts, equipment_index=str(raw["equipment_index"]),
                     device_id=device_id, lat=lat, lon=lon,
                     altitude=_as_float("altitude", raw["altitude"]),
                     velocity=velocity, direction=direction, work_type=work)


# -- geodesy ------------------------------------------------------------------

def haversine_km(a, b) -> float:
    """Great-circle distance in km between (lat, lon) points on a 6371-km sphere."""
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_nm(a, b) -> float:
    return haversine_km(a, b) / KM_PER_NM


def _project_on_segment(p, a, b):
    """Nearest point to p on segment a-b, in a local equirectangular frame.

    Returns (point, fraction along the segment in [0, 1]).  Adequate at the
    segment lengths used here; the caller only needs a consistent tie-free
    projection, not centimetre accuracy.
    """
    coslat = math.cos(math.radians(p[0]))
    ax, ay = (a[1] - p[1]) * coslat, a[0] - p[0]
    bx, by = (b[1] - p[1]) * coslat, b[0] - p[0]
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return a, 0.0
    t = -(ax * dx + ay * dy) / denom
    t = max(0.0, min(1.0, t))
    point = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
    return point, t


def route_remaining_nm(route, pos) -> float:
    """Distance in nm from pos (projected onto the route) to the final waypoint.

    pos is projected to the nearest point on the nearest segment; ties go to
    the earlier segment.  Raises :class:`EmptyRoute` for routes with fewer
    than two waypoints.
    """
    if len(route) < 2:
        raise EmptyRoute("route needs at least 2 waypoints")
    best = None  # (distance to route, segment index, projected point, fraction)
    for i, (a, b) in enumerate(zip(route, route[1:])):
        proj, t = _project_on_segment(pos, a, b)
        d = haversine_nm(pos, proj)
        if best is None or d < best[0] - 1e-12:
            best = (d, i, proj, t)
    _, seg, proj, _ = best
    remaining = haversine_nm(proj, route[seg + 1])
    for a, b in zip(route[seg + 1:], route[seg + 2:]):
        remaining += haversine_nm(a, b)
    return remaining


def route_length_nm(route) -> float:
    if len(route) < 2:
        raise EmptyRoute("route needs at least 2 waypoints")
    return sum(haversine_nm(a, b) for a, b in zip(route, route[1:]))
