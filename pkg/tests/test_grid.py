"""Ship-centred spatiotemporal grid tensors."""

import random
from datetime import timedelta

import numpy as np
import pytest

from portsim.core import utc, validate_ais_record
from portsim.grid import (
    DEFAULT_WEATHER_CHANNELS,
    EmptyTrajectory,
    EtaLabel,
    GridSpec,
    SpecMismatch,
    build_grid_sequence,
    cell_index,
    tensor_to_csv,
)
from portsim.ingest import make_weather_field


def _record(ts, lat, lon):
    return validate_ais_record({
        "timestamp": ts, "mmsi": "S", "lat": lat, "lon": lon, "sog": 12.0,
        "cog": 45.0, "heading": 45, "rot": 0.0, "draught": 8.0,
        "ship_type": 52, "ship_length": 200, "ship_width": 30})


def _weather():
    return [make_weather_field(random.Random("wx"),
                               (((34.0, 128.0), (36.0, 130.0)),),
                               valid_at=utc(2021, 1, 1))]


def test_cell_index_center():
    spec = GridSpec(center=(35.0, 129.0), half_extent_cells=2,
                    cell_size_deg=0.1)
    assert cell_index(spec, spec.center) == (2, 2)


def test_cell_index_against_cell_bounds_oracle():
    spec = GridSpec(center=(35.0, 129.0), half_extent_cells=2,
                    cell_size_deg=0.1)
    # brute-force scan over every cell's bounds
    def oracle(p):
        for row in range(spec.side):
            lat_lo = spec.center[0] + (row - spec.half_extent_cells) * 0.1
            for col in range(spec.side):
                lon_lo = spec.center[1] + (col - spec.half_extent_cells) * 0.1
                if lat_lo <= p[0] < lat_lo + 0.1 and lon_lo <= p[1] < lon_lo + 0.1:
                    return (row, col)
        return None

    rng = random.Random("cells")
    probes = [(35.05, 129.15), (35.0, 129.0), (34.81, 128.81)]
    probes += [(35.0 + rng.uniform(-0.4, 0.4), 129.0 + rng.uniform(-0.4, 0.4))
               for _ in range(200)]
    for p in probes:
        assert cell_index(spec, p) == oracle(p), p


def test_cell_index_outside():
    spec = GridSpec(center=(35.0, 129.0), half_extent_cells=2,
                    cell_size_deg=0.1)
    assert cell_index(spec, (35.0, 130.0)) is None


def test_spec_invariants():
    with pytest.raises(SpecMismatch):
        GridSpec(center=(0, 0), half_extent_cells=0)
    with pytest.raises(SpecMismatch):
        GridSpec(center=(0, 0), cell_size_deg=-1.0)
    with pytest.raises(SpecMismatch):
        GridSpec(center=(0, 0), t_steps=0)
    with pytest.raises(SpecMismatch):
        EtaLabel(remaining_minutes=-1.0)


def _trajectory(now, spec):
    # samples every 10 minutes walking toward the centre
    records = []
    for i in range(12):
        ts = now - timedelta(minutes=10 * i)
        records.append(_record(ts, spec.center[0] - 0.002 * i,
                               spec.center[1] - 0.002 * i))
    return records


def test_build_grid_shapes_and_channels():
    spec = GridSpec(center=(35.0, 129.0), half_extent_cells=4,
                    cell_size_deg=0.05, t_steps=4)
    now = utc(2021, 1, 1, 12)
    tensor, label = build_grid_sequence(_trajectory(now, spec), _weather(),
                                        spec, arrival=now + timedelta(hours=3))
    assert tensor.shape == (4, 9, 9, 1 + len(DEFAULT_WEATHER_CHANNELS))
    assert tensor.channels[0] == "occupancy"
    assert label.remaining_minutes == pytest.approx(180.0)
    _, no_label = build_grid_sequence(_trajectory(now, spec), _weather(), spec)
    assert no_label is None


def test_occupancy_conservation():
    """Per-step occupancy sums equal the in-window, in-extent sample counts."""
    spec = GridSpec(center=(35.0, 129.0), half_extent_cells=4,
                    cell_size_deg=0.05, t_steps=4)
    now = utc(2021, 1, 1, 12)
    records = _trajectory(now, spec)
    tensor, _ = build_grid_sequence(records, _weather(), spec)
    occ = tensor.channel("occupancy")
    for k in range(spec.t_steps):
        hi = now - (spec.t_steps - 1 - k) * spec.step_duration
        lo = hi - spec.step_duration
        expected = sum(1 for r in records
                       if lo < r.timestamp <= hi
                       and cell_index(spec, (r.lat, r.lon)) is not None)
        assert occ[k].sum() == expected


def test_binary_occupancy_capped_at_one():
    spec = GridSpec(center=(35.0, 129.0), half_extent_cells=2,
                    cell_size_deg=1.0, t_steps=1,
                    step_duration=timedelta(hours=6))
    now = utc(2021, 1, 1, 12)
    records = [_record(now - timedelta(minutes=m), 35.0, 129.0)
               for m in range(0, 60, 10)]
    tensor, _ = build_grid_sequence(records, _weather(), spec,
                                    binary_occupancy=True)
    assert tensor.channel("occupancy").max() == 1.0


def test_translation_consistency():
    """Shifting trajectory and grid centre together preserves occupancy."""
    spec_a = GridSpec(center=(35.0, 129.0), half_extent_cells=3,
                      cell_size_deg=0.05, t_steps=3)
    spec_b = GridSpec(center=(35.2, 129.2), half_extent_cells=3,
                      cell_size_deg=0.05, t_steps=3)
    now = utc(2021, 1, 1, 12)
    rec_a = _trajectory(now, spec_a)
    rec_b = [_record(r.timestamp, r.lat + 0.2, r.lon + 0.2) for r in rec_a]
    ta, _ = build_grid_sequence(rec_a, _weather(), spec_a)
    tb, _ = build_grid_sequence(rec_b, _weather(), spec_b)
    assert np.array_equal(ta.channel("occupancy"), tb.channel("occupancy"))


def test_empty_trajectory():
    spec = GridSpec(center=(35.0, 129.0), half_extent_cells=2)
    with pytest.raises(EmptyTrajectory):
        build_grid_sequence([], _weather(), spec)
    with pytest.raises(SpecMismatch):
        build_grid_sequence(_trajectory(utc(2021, 1, 1), spec), [], spec)


def test_tensor_to_csv_shape():
    spec = GridSpec(center=(35.0, 129.0), half_extent_cells=1,
                    cell_size_deg=0.1, t_steps=2)
    now = utc(2021, 1, 1, 12)
    tensor, _ = build_grid_sequence(_trajectory(now, spec), _weather(), spec)
    lines = tensor_to_csv(tensor).splitlines()
    assert lines[0] == "t,row,col,occupancy," + ",".join(DEFAULT_WEATHER_CHANNELS)
    assert len(lines) == 1 + 2 * 3 * 3
