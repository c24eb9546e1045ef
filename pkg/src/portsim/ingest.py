"""CSV ingest for AIS/IoT exports and deterministic synthetic traffic.

The synthetic generator stands in for a proprietary one-year port dataset.
Its weather field genuinely drives along-route vessel speed, so arrival
times carry a weather signal that a weather-aware ETA predictor can exploit
and a purely kinematic one cannot.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from datetime import timedelta

from .core import (
    AisRecord,
    CoreError,
    Voyage,
    haversine_nm,
    parse_timestamp,
    route_length_nm,
    validate_ais_record,
    validate_iot_record,
)

AIS_HEADER = ["Timestamp", "MMSI", "Latitude", "Longitude", "SOG", "COG",
              "Heading", "ROT", "Draught", "Ship Type", "Ship Length",
              "Ship Width"]
IOT_HEADER = ["Timestamp", "Equipment Index", "Device Identify", "Latitude",
              "Longitude", "Altitude", "Velocity", "Direction", "Work Type"]

AIR_QUALITY_KEYS = ("PM2.5", "PM10", "NO", "NOx", "SO", "SO2", "CO", "CO2", "O3")


class IngestError(Exception):
    pass


class HeaderMismatch(IngestError):
    def __init__(self, expected, got):
        super().__init__(f"header mismatch: expected {expected}, got {got}")


class RowError(IngestError):
    def __init__(self, line, cause):
        super().__init__(f"row error at line {line}: {cause}")
        self.line = line
        self.cause = cause


class InvalidConfig(IngestError):
    pass


@dataclass(frozen=True)
class WeatherCell:
    wind_direction: float       # degrees
    wind_speed: float           # m/s
    humidity: float             # percent
    air_quality: dict = field(default_factory=dict)


@dataclass(frozen=True)
class WeatherField:
    """A 2-D weather/air-quality field on a regular lat/lon grid."""

    origin: tuple               # (lat, lon) of cell [0][0] lower-left corner
    cell_size_deg: float
    grid: tuple                 # grid[row][col] -> WeatherCell, row = south->north
    valid_at: object            # UTC instant

    def cell_at(self, lat, lon) -> WeatherCell:
        """Nearest-cell lookup, clamped to the field extent."""
        row = int((lat - self.origin[0]) / self.cell_size_deg)
        col = int((lon - self.origin[1]) / self.cell_size_deg)
        row = max(0, min(len(self.grid) - 1, row))
        col = max(0, min(len(self.grid[0]) - 1, col))
        return self.grid[row][col]


@dataclass(frozen=True)
class SynthConfig:
    """Configuration for the deterministic traffic generator."""

    seed: int
    n_vessels: int
    horizon_hours: float
    route_templates: tuple      # tuple of routes, each ((lat, lon), ...)
    speed_range_knots: tuple    # (min, max) base speed
    van_count_range: tuple      # (min, max)
    weather_perturbation: float = 0.0   # scale of weather speed modulation
    sample_minutes: float = 10.0        # AIS sampling interval

    def validate(self):
        if self.n_vessels < 0:
            raise InvalidConfig("n_vessels must be >= 0")
        if not self.route_templates:
            raise InvalidConfig("at least one route template required")
        lo, hi = self.speed_range_knots
        if not (0 < lo <= hi):
            raise InvalidConfig("speed range must be positive and ordered")
        vlo, vhi = self.van_count_range
        if not (0 <= vlo <= vhi):
            raise InvalidConfig("van count range must be ordered, >= 0")
        if self.horizon_hours <= 0:
            raise InvalidConfig("horizon must be positive")
        if self.weather_perturbation < 0:
            raise InvalidConfig("weather_perturbation must be >= 0")
        if self.sample_minutes <= 0:
            raise InvalidConfig("sample_minutes must be positive")


# -- CSV parsing --------------------------------------------------------------

def _open_rows(source):
    if isinstance(source, (str,)) or hasattr(source, "__fspath__"):
        fh = open(source, newline="")
        return csv.reader(fh), fh
    if isinstance(source, bytes):
        source = source.decode()
    if isinstance(source, io.TextIOBase) or hasattr(source, "read"):
        return csv.reader(source), None
    return csv.reader(io.StringIO(source)), None


def parse_ais_csv(source, lenient=False):
    """Parse an AIS CSV with the fixed 12-column layout.

    Strict mode (default) raises :class:`RowError` on the first bad row.
    Lenient mode returns ``(records, errors)`` instead.
    """
    reader, fh = _open_rows(source)
    try:
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch(AIS_HEADER, None) from None
        if [h.strip() for h in header] != AIS_HEADER:
            raise HeaderMismatch(AIS_HEADER, header)
        records, errors = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != len(AIS_HEADER):
                    raise CoreError(f"expected {len(AIS_HEADER)} columns, got {len(row)}")
                rec = validate_ais_record({
                    "timestamp": row[0], "mmsi": row[1], "lat": row[2],
                    "lon": row[3], "sog": row[4], "cog": row[5],
                    "heading": row[6], "rot": row[7], "draught": row[8],
                    "ship_type": row[9], "ship_length": row[10],
                    "ship_width": row[11],
                })
            except CoreError as exc:
                if lenient:
                    errors.append(RowError(lineno, exc))
                    continue
                raise RowError(lineno, exc) from exc
            records.append(rec)
        return (records, errors) if lenient else records
    finally:
        if fh is not None:
            fh.close()


def parse_iot_csv(source, lenient=False):
    """Parse an IoT CSV with the fixed 9-column layout."""
    reader, fh = _open_rows(source)
    try:
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch(IOT_HEADER, None) from None
        if [h.strip() for h in header] != IOT_HEADER:
            raise HeaderMismatch(IOT_HEADER, header)
        records, errors = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != len(IOT_HEADER):
                    raise CoreError(f"expected {len(IOT_HEADER)} columns, got {len(row)}")
                rec = validate_iot_record({
                    "timestamp": row[0], "equipment_index": row[1],
                    "device_id": row[2], "lat": row[3], "lon": row[4],
                    "altitude": row[5], "velocity": row[6],
                    "direction": row[7], "work_type": row[8],
                })
            except CoreError as exc:
                if lenient:
                    errors.append(RowError(lineno, exc))
                    continue
                raise RowError(lineno, exc) from exc
            records.append(rec)
        return (records, errors) if lenient else records
    finally:
        if fh is not None:
            fh.close()


def _format_ts(dt):
    return dt.strftime("%Y-%m-%d %H:%M:%S.%f") + " UTC"


def _fmt_num(x):
    if isinstance(x, float) and x == int(x):
        return str(int(x))
    return repr(x) if isinstance(x, float) else str(x)


def ais_to_csv(records, out=None) -> str:
    """Serialize AIS records back to the canonical CSV layout."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AIS_HEADER)
    from .core import HEADING_UNAVAILABLE, ROT_UNAVAILABLE
    for r in records:
        heading = HEADING_UNAVAILABLE if r.heading is None else r.heading
        rot = ROT_UNAVAILABLE if r.rot is None else r.rot
        w.writerow([_format_ts(r.timestamp), r.mmsi, repr(r.lat), repr(r.lon),
                    _fmt_num(r.sog), _fmt_num(r.cog), heading, _fmt_num(rot),
                    _fmt_num(r.draught), r.ship_type, _fmt_num(r.ship_length),
                    _fmt_num(r.ship_width)])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w") as fh:
            fh.write(text)
    return text


def iot_to_csv(records, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(IOT_HEADER)
    code = {"Unloading": "U", "Loading": "L"}
    for r in records:
        w.writerow([r.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    r.equipment_index, r.device_id, repr(r.lat), repr(r.lon),
                    _fmt_num(r.altitude), _fmt_num(r.velocity),
                    _fmt_num(r.direction), code[r.work_type]])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w") as fh:
            fh.write(text)
    return text


# -- synthetic weather --------------------------------------------------------

def _routes_bbox(routes, margin=0.5):
    lats = [p[0] for r in routes for p in r]
    lons = [p[1] for r in routes for p in r]
    return (min(lats) - margin, min(lons) - margin,
            max(lats) + margin, max(lons) + margin)


def make_weather_field(rng, routes, valid_at, cell_size_deg=0.25):
    """A slowly varying wind/humidity field over the routes' bounding box.

    Wind speed follows a seeded linear gradient across the box plus small
    per-cell noise, so weather is spatially coherent: conditions observed
    near a vessel are informative about conditions further along its route.
    """
    lat0, lon0, lat1, lon1 = _routes_bbox(routes)
    n_rows = max(2, int(math.ceil((lat1 - lat0) / cell_size_deg)))
    n_cols = max(2, int(math.ceil((lon1 - lon0) / cell_size_deg)))
    base = 10.0 + rng.uniform(-2.0, 2.0)
    glat = rng.uniform(0.8, 1.2) * 16.0 / max(lat1 - lat0, 1e-9)
    glon = rng.uniform(-0.2, 0.2) * 4.0 / max(lon1 - lon0, 1e-9)
    wind_dir = rng.uniform(0.0, 360.0)
    rows = []
    for i in range(n_rows):
        lat_c = lat0 + (i + 0.5) * cell_size_deg
        row = []
        for j in range(n_cols):
            lon_c = lon0 + (j + 0.5) * cell_size_deg
            wind = (base - 8.0 + glat * (lat_c - lat0) + glon * (lon_c - lon0)
                    + rng.uniform(-0.5, 0.5))
            wind = max(0.0, wind)
            humidity = min(100.0, max(0.0, 60.0 + 2.0 * (wind - 10.0)
                                      + rng.uniform(-5.0, 5.0)))
            aq = {k: round(max(0.0, 20.0 + rng.uniform(-10.0, 10.0)), 3)
                  for k in AIR_QUALITY_KEYS}
            row.append(WeatherCell(wind_direction=round(wind_dir, 1),
                                   wind_speed=wind, humidity=humidity,
                                   air_quality=aq))
        rows.append(tuple(row))
    return WeatherField(origin=(lat0, lon0), cell_size_deg=cell_size_deg,
                        grid=tuple(rows), valid_at=valid_at)


def weather_speed_multiplier(field: WeatherField, lat, lon, perturbation) -> float:
    """Along-route speed multiplier 1 + perturbation * f(local weather).

    f maps wind speed through (10 m/s - wind)/8, clamped to [-1, 1]: strong
    wind slows the vessel, calm conditions speed it up.  The multiplier is
    floored at 0.2 so motion never stalls.
    """
    if perturbation == 0.0:
        return 1.0
    wind = field.cell_at(lat, lon).wind_speed
    f = max(-1.0, min(1.0, (10.0 - wind) / 8.0))
    return max(0.2, 1.0 + perturbation * f)


# -- trajectory synthesis -----------------------------------------------------

def _point_along(route, dist_nm):
    """Point at dist_nm along the polyline from its start (clamped to the end)."""
    remaining = dist_nm
    for a, b in zip(route, route[1:]):
        leg = haversine_nm(a, b)
        if remaining <= leg:
            t = 0.0 if leg == 0 else remaining / leg
            return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        remaining -= leg
    return route[-1]


def _bearing_deg(a, b):
    lat1, lat2 = math.radians(a[0]), math.radians(b[0])
    dlon = math.radians(b[1] - a[1])
    x = math.sin(dlon) * math.cos(lat2)
    y = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    return (math.degrees(math.atan2(x, y)) + 360.0) % 360.0


def generate_traffic(cfg: SynthConfig, start_time=None):
    """Generate (voyages, weather field series, AIS records), seeded.

    Each voyage samples its trajectory along the route at cfg.sample_minutes
    intervals; instantaneous speed is the vessel's base speed modulated by
    the weather field at its position (capped at max_speed).  The promised
    ETA is the weather-free kinematic arrival at base speed, so with zero
    perturbation every vessel arrives exactly on its promise.

    Returns (voyages, weather_series, ais_records, arrivals) where arrivals
    maps vessel_id -> actual arrival instant.
    """
    cfg.validate()
    if start_time is None:
        from .core import utc
        start_time = utc(2021, 1, 1)
    rng = random.Random(f"traffic/{cfg.seed}")

    weather_series = []
    n_fields = max(1, int(cfg.horizon_hours // 6) + 1)
    field0 = make_weather_field(rng, cfg.route_templates, start_time)
    for k in range(n_fields):
        # static conditions re-stamped every 6 h; a persistent field keeps the
        # weather -> arrival-time link learnable
        weather_series.append(WeatherField(
            origin=field0.origin, cell_size_deg=field0.cell_size_deg,
            grid=field0.grid, valid_at=start_time + timedelta(hours=6 * k)))

    voyages, records, arrivals = [], [], {}
    width = max(2, len(str(max(1, cfg.n_vessels))))
    for i in range(cfg.n_vessels):
        vrng = random.Random(f"traffic/{cfg.seed}/vessel/{i}")
        vid = f"V{i:0{width}d}"
        route = cfg.route_templates[i % len(cfg.route_templates)]
        base = vrng.uniform(*cfg.speed_range_knots)
        max_speed = base * (1.0 + max(0.1, cfg.weather_perturbation) + 0.2)
        vans = vrng.randint(*cfg.van_count_range)
        depart = start_time + timedelta(
            hours=vrng.uniform(0.0, max(0.0, cfg.horizon_hours * 0.25)))
        total_nm = route_length_nm(route)
        promised = depart + timedelta(hours=total_nm / base)
        draught = round(vrng.uniform(6.0, 14.0), 1)
        length = round(vrng.uniform(150.0, 350.0), 0)
        width_m = round(length / 7.0, 0)

        voyage = Voyage(vessel_id=vid, route=route, start_time=depart,
                        promised_eta=promised, max_speed=max_speed,
                        van_count=vans, draught=draught)
        voyages.append(voyage)

        dt_h = cfg.sample_minutes / 60.0
        pos_nm, t = 0.0, depart
        while True:
            pos = _point_along(route, pos_nm)
            mult = weather_speed_multiplier(field0, pos[0], pos[1],
                                            cfg.weather_perturbation)
            speed = min(base * mult, max_speed)
            ahead = _point_along(route, min(total_nm, pos_nm + 1.0))
            cog = _bearing_deg(pos, ahead) if ahead != pos else 0.0
            records.append(AisRecord(
                timestamp=t, mmsi=vid, lat=pos[0], lon=pos[1],
                sog=round(speed, 3), cog=round(cog, 1),
                heading=int(round(cog)) % 360, rot=0.0, draught=draught,
                ship_type=71, ship_length=length, ship_width=width_m))
            step_nm = speed * dt_h
            if pos_nm + step_nm >= total_nm:
                frac = (total_nm - pos_nm) / step_nm if step_nm > 0 else 0.0
                arrivals[vid] = t + timedelta(hours=dt_h * frac)
                break
            pos_nm += step_nm
            t += timedelta(minutes=cfg.sample_minutes)

    records.sort(key=lambda r: (r.timestamp, r.mmsi))
    return voyages, weather_series, records, arrivals


# -- key-value config files ---------------------------------------------------

def parse_kv_config(source) -> dict:
    """Parse a flat ``key = value`` config file into a string dict.

    Blank lines and ``#`` comments are ignored.  Values keep their raw
    string form; consumers coerce types.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _parse_route(text):
    pts = []
    for chunk in text.split(";"):
        lat, lon = chunk.split(",")
        pts.append((float(lat), float(lon)))
    return tuple(pts)


def synth_config_from_kv(kv: dict) -> SynthConfig:
    """Build a SynthConfig from a key-value map (see README for the schema)."""
    try:
        routes = tuple(_parse_route(kv[key]) for key in sorted(kv)
                       if key.startswith("route."))
        if not routes:
            raise KeyError("route.*")
        return SynthConfig(
            seed=int(kv.get("seed", "0")),
            n_vessels=int(kv.get("n_vessels", "10")),
            horizon_hours=float(kv.get("horizon_hours", "168")),
            route_templates=routes,
            speed_range_knots=(float(kv.get("speed_min_knots", "10")),
                               float(kv.get("speed_max_knots", "18"))),
            van_count_range=(int(kv.get("van_count_min", "500")),
                             int(kv.get("van_count_max", "4000"))),
            weather_perturbation=float(kv.get("weather_perturbation", "0")),
            sample_minutes=float(kv.get("sample_minutes", "10")),
        )
    except (KeyError, ValueError) as exc:
        raise InvalidConfig(f"bad synthetic-traffic config: {exc}") from exc
