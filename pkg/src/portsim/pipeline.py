"""Dataset assembly: turn voyages + AIS traces + weather into training samples.

One sample per prediction window: the ship-centred grid tensor, the
kinematic summary at the window instant, and the true remaining minutes.
"""

from __future__ import annotations

import csv
import io
from datetime import timedelta

from .core import route_remaining_nm, parse_timestamp
from .eta import (
    KinematicPredictor,
    KinematicSummary,
    PredictionInput,
    RidgeEtaPredictor,
    evaluate,
)
from .grid import GridSpec, build_grid_sequence
from .ingest import SynthConfig, WeatherCell, WeatherField, generate_traffic

# Benchmark geometry: one ~150 nm approach route; a single template keeps the
# weather-position relationship consistent so the ridge model can learn it.
BENCHMARK_ROUTE = ((33.2, 127.0), (35.05, 129.0))


def benchmark_config(seed, n_vessels=10, perturbation=0.3) -> SynthConfig:
    return SynthConfig(seed=seed, n_vessels=n_vessels, horizon_hours=24.0,
                       route_templates=(BENCHMARK_ROUTE,),
                       speed_range_knots=(10.0, 14.0),
                       van_count_range=(1000, 3000),
                       weather_perturbation=perturbation,
                       sample_minutes=10.0)


def window_spec(center) -> GridSpec:
    return GridSpec(center=center, half_extent_cells=4, cell_size_deg=0.1,
                    t_steps=4, step_duration=timedelta(minutes=30))


def build_samples(voyages, records, weather_series, arrivals,
                  stride_minutes=60.0, lo=0.25, hi=0.85):
    """Prediction-window samples for every voyage.

    Windows are placed every stride_minutes between the lo/hi fractions of
    each voyage's trace, skipping windows with zero speed or zero remaining
    time.  Returns a list of (PredictionInput, EtaLabel).
    """
    by_vessel = {}
    for r in records:
        by_vessel.setdefault(r.mmsi, []).append(r)

    samples = []
    for v in voyages:
        trace = sorted(by_vessel.get(v.vessel_id, []), key=lambda r: r.timestamp)
        if len(trace) < 3 or v.vessel_id not in arrivals:
            continue
        arrival = arrivals[v.vessel_id]
        t_start, t_end = trace[0].timestamp, trace[-1].timestamp
        span = (t_end - t_start).total_seconds()
        next_at = t_start + timedelta(seconds=lo * span)
        last_at = t_start + timedelta(seconds=hi * span)
        for i, rec in enumerate(trace):
            if rec.timestamp < next_at or rec.timestamp > last_at:
                continue
            next_at = rec.timestamp + timedelta(minutes=stride_minutes)
            if rec.sog <= 0:
                continue
            pos = (rec.lat, rec.lon)
            remaining = route_remaining_nm(v.route, pos)
            tensor, label = build_grid_sequence(
                trace[:i + 1], weather_series, window_spec(pos), arrival=arrival)
            if label is None or label.remaining_minutes <= 0:
                continue
            samples.append((PredictionInput(
                tensor=tensor,
                kinematics=KinematicSummary(remaining_nm=remaining,
                                            recent_sog=rec.sog)), label))
    return samples


def predictor_benchmark(seed, n_vessels=10, perturbation=0.3):
    """Fit the ridge reference on half the voyages, score both predictors.

    Returns (kinematic MetricReport, ridge MetricReport) on held-out voyages.
    """
    cfg = benchmark_config(seed, n_vessels=n_vessels, perturbation=perturbation)
    voyages, weather, records, arrivals = generate_traffic(cfg)
    train_v = [v for i, v in enumerate(voyages) if i % 2 == 0]
    test_v = [v for i, v in enumerate(voyages) if i % 2 == 1]
    train = build_samples(train_v, records, weather, arrivals)
    test = build_samples(test_v, records, weather, arrivals)

    ridge = RidgeEtaPredictor().fit(train)
    kin = KinematicPredictor()
    actuals = [label.remaining_minutes for _, label in test]
    kin_preds = [max(0.0, kin.predict(x)) for x, _ in test]
    ridge_preds = [max(0.0, ridge.predict(x)) for x, _ in test]
    return (evaluate(kin_preds, actuals, predictor_id="kinematic"),
            evaluate(ridge_preds, actuals, predictor_id="ridge-tensor"))


# -- file round-trips for the CLI ----------------------------------------------

VOYAGE_HEADER = ["Vessel", "Route", "Start", "PromisedETA", "MaxSpeed",
                 "VanCount", "Draught"]
WEATHER_HEADER = ["ValidAt", "OriginLat", "OriginLon", "CellSizeDeg", "Row",
                  "Col", "WindDirection", "WindSpeed", "Humidity"]
ARRIVAL_HEADER = ["Vessel", "Arrival"]


def _route_str(route):
    return ";".join(f"{lat!r},{lon!r}" for lat, lon in route)


def _route_parse(text):
    return tuple(tuple(float(x) for x in chunk.split(",")) for chunk in text.split(";"))


def voyages_to_csv(voyages, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VOYAGE_HEADER)
    for v in voyages:
        w.writerow([v.vessel_id, _route_str(v.route), v.start_time.isoformat(),
                    v.promised_eta.isoformat(), repr(v.max_speed), v.van_count,
                    repr(v.draught)])
    text = buf.getvalue()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    return text


def voyages_from_csv(path):
    from .core import Voyage
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            out.append(Voyage(vessel_id=row[0], route=_route_parse(row[1]),
                              start_time=parse_timestamp(row[2]),
                              promised_eta=parse_timestamp(row[3]),
                              max_speed=float(row[4]), van_count=int(row[5]),
                              draught=float(row[6])))
    return out


def weather_to_csv(weather_series, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(WEATHER_HEADER)
    for f in weather_series:
        for i, row in enumerate(f.grid):
            for j, cell in enumerate(row):
                w.writerow([f.valid_at.isoformat(), repr(f.origin[0]),
                            repr(f.origin[1]), repr(f.cell_size_deg), i, j,
                            repr(cell.wind_direction), repr(cell.wind_speed),
                            repr(cell.humidity)])
    text = buf.getvalue()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    return text


def weather_from_csv(path):
    fields = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            key = (row[0], row[1], row[2], row[3])
            fields.setdefault(key, {})[(int(row[4]), int(row[5]))] = WeatherCell(
                wind_direction=float(row[6]), wind_speed=float(row[7]),
                humidity=float(row[8]))
    series = []
    for (valid_at, olat, olon, cell_size), cells in sorted(fields.items()):
        n_rows = max(i for i, _ in cells) + 1
        n_cols = max(j for _, j in cells) + 1
        grid = tuple(tuple(cells[(i, j)] for j in range(n_cols))
                     for i in range(n_rows))
        series.append(WeatherField(origin=(float(olat), float(olon)),
                                   cell_size_deg=float(cell_size), grid=grid,
                                   valid_at=parse_timestamp(valid_at)))
    return series


def arrivals_to_csv(arrivals: dict, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ARRIVAL_HEADER)
    for vid in sorted(arrivals):
        w.writerow([vid, arrivals[vid].isoformat()])
    text = buf.getvalue()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    return text


def arrivals_from_csv(path) -> dict:
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            out[row[0]] = parse_timestamp(row[1])
    return out
