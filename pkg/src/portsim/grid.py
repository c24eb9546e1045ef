"""Ship-centred multi-channel spatiotemporal feature grids.

The input block for an ETA predictor: a T-step window of square lat/lon
grids centred on the vessel's current position.  Channel 0 is trajectory
occupancy (visit counts by default); the remaining channels are weather
variables resampled onto the grid by nearest-cell lookup.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import timedelta

import numpy as np

DEFAULT_WEATHER_CHANNELS = ("wind_speed", "humidity")


class GridError(Exception):
    pass


class EmptyTrajectory(GridError):
    pass


class SpecMismatch(GridError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a ship-centred square grid window."""

    center: tuple               # (lat, lon) = vessel's current position
    half_extent_cells: int = 16
    cell_size_deg: float = 0.05
    t_steps: int = 8
    step_duration: timedelta = timedelta(minutes=30)

    def __post_init__(self):
        if self.half_extent_cells < 1:
            raise SpecMismatch("half_extent_cells must be >= 1")
        if self.cell_size_deg <= 0:
            raise SpecMismatch("cell_size_deg must be > 0")
        if self.t_steps < 1:
            raise SpecMismatch("t_steps must be >= 1")

    @property
    def side(self) -> int:
        return 2 * self.half_extent_cells + 1


@dataclass(frozen=True)
class GridTensor:
    """Dense (T, H, W, C) feature block plus its channel names."""

    values: np.ndarray
    channels: tuple             # channel 0 is "occupancy"
    spec: GridSpec

    @property
    def shape(self):
        return self.values.shape

    def channel(self, name) -> np.ndarray:
        return self.values[..., self.channels.index(name)]


@dataclass(frozen=True)
class EtaLabel:
    """Training target: minutes from the window's current instant to arrival."""

    remaining_minutes: float

    def __post_init__(self):
        if self.remaining_minutes < 0:
            raise SpecMismatch("remaining_minutes must be >= 0")


def cell_index(spec: GridSpec, p):
    """(row, col) of the cell containing p, or None when outside the extent.

    Convention: index = floor(offset / cell_size + half_extent) per axis,
    rows increasing northward.  The centre point maps to
    (half_extent, half_extent).
    """
    row = math.floor((p[0] - spec.center[0]) / spec.cell_size_deg
                     + spec.half_extent_cells)
    col = math.floor((p[1] - spec.center[1]) / spec.cell_size_deg
                     + spec.half_extent_cells)
    if 0 <= row < spec.side and 0 <= col < spec.side:
        return (row, col)
    return None


def _field_for(weather_series, instant):
    """Latest field valid at or before the instant; earliest field otherwise."""
    chosen = None
    for f in weather_series:
        if f.valid_at <= instant:
            chosen = f
        else:
            break
    return chosen if chosen is not None else weather_series[0]


def build_grid_sequence(trajectory, weather_series, spec: GridSpec,
                        arrival=None, binary_occupancy=False):
    """Build the (T, H, W, C) tensor for one prediction window.

    The window's current instant is the last record's timestamp; slice k
    covers the half-open interval (now - (T-k)*step, now - (T-k-1)*step],
    so the final slice ends at the current instant.  Out-of-extent samples
    are dropped.  With ``arrival`` given (training mode) the label is the
    minutes from the current instant to arrival.

    Returns (GridTensor, EtaLabel | None).
    """
    records = sorted(trajectory, key=lambda r: r.timestamp)  # stable
    if not records:
        raise EmptyTrajectory("trajectory has no records")
    if not weather_series:
        raise SpecMismatch("weather series is empty")

    now = records[-1].timestamp
    side = spec.side
    channels = ("occupancy",) + tuple(DEFAULT_WEATHER_CHANNELS)
    values = np.zeros((spec.t_steps, side, side, len(channels)))

    window_start = now - spec.t_steps * spec.step_duration
    for rec in records:
        if rec.timestamp <= window_start or rec.timestamp > now:
            continue
        k = spec.t_steps - 1 - int((now - rec.timestamp) / spec.step_duration)
        if rec.timestamp == window_start:  # boundary belongs to no slice
            continue
        k = max(0, min(spec.t_steps - 1, k))
        idx = cell_index(spec, (rec.lat, rec.lon))
        if idx is None:
            continue
        if binary_occupancy:
            values[k, idx[0], idx[1], 0] = 1.0
        else:
            values[k, idx[0], idx[1], 0] += 1.0

    for k in range(spec.t_steps):
        slice_end = now - (spec.t_steps - 1 - k) * spec.step_duration
        fld = _field_for(weather_series, slice_end)
        for row in range(side):
            lat = spec.center[0] + (row - spec.half_extent_cells + 0.5) * spec.cell_size_deg
            for col in range(side):
                lon = spec.center[1] + (col - spec.half_extent_cells + 0.5) * spec.cell_size_deg
                cell = fld.cell_at(lat, lon)
                for ci, name in enumerate(DEFAULT_WEATHER_CHANNELS, start=1):
                    values[k, row, col, ci] = getattr(cell, name)

    tensor = GridTensor(values=values, channels=channels, spec=spec)
    label = None
    if arrival is not None:
        minutes = (arrival - now).total_seconds() / 60.0
        label = EtaLabel(remaining_minutes=max(0.0, minutes))
    return tensor, label


def tensor_to_csv(tensor: GridTensor, out=None) -> str:
    """Flat export: one row per (t, row, col) with one column per channel."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "row", "col", *tensor.channels])
    T, H, W, _ = tensor.values.shape
    for t in range(T):
        for r in range(H):
            for c in range(W):
                w.writerow([t, r, c, *[repr(float(v)) for v in tensor.values[t, r, c]]])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w") as fh:
            fh.write(text)
    return text
