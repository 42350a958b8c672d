"""Activation and repolarization markers, conduction velocity and error metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LAT_THRESHOLD = 0.0


@dataclass(frozen=True, eq=False)
class Trace:
    node: int
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("trace times and values must be 1-D arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0.0):
            raise ValueError("trace times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_ms", "V_mV"])
            for t, v in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path: str | Path, node: int = -1) -> "Trace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(node, data[:, 0], data[:, 1])


@dataclass(frozen=True, eq=False)
class ScalarMap:
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        ok = np.asarray(self.valid, dtype=bool) & np.isfinite(vals)
        object.__setattr__(self, "values", np.where(ok, vals, np.nan))
        object.__setattr__(self, "valid", ok)

    def to_csv(self, path: str | Path, coords: np.ndarray) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "x", "y", "value", "valid"])
            for i, ((x, y), v, ok) in enumerate(zip(coords, self.values, self.valid)):
                w.writerow([i, repr(float(x)), repr(float(y)), repr(float(v)) if ok else "", int(ok)])


def compute_lat(times: np.ndarray, history: np.ndarray, threshold: float = LAT_THRESHOLD) -> ScalarMap:
    """First upward crossing of ``threshold`` per node, linearly interpolated.

    ``history`` has shape (n_samples,) or (n_samples, n_nodes).
    """
    t = np.asarray(times, dtype=np.float64)
    V = np.asarray(history, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    below = V[:-1] < threshold
    above = V[1:] >= threshold
    cross = below & above
    has = cross.any(axis=0)
    idx = np.argmax(cross, axis=0)
    cols = np.arange(V.shape[1])
    v0 = V[idx, cols]
    v1 = V[idx + 1, cols]
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = (threshold - v0) / (v1 - v0)
    lat = t[idx] + frac * (t[idx + 1] - t[idx])
    return ScalarMap(lat, has)


def upstroke_time(times: np.ndarray, values: np.ndarray) -> float:
    """Instant of maximum dV/dt.

    Slopes are forward differences placed at interval midpoints; the peak is
    refined by a parabola through the steepest slope and its neighbours.
    Returns NaN when the trace never rises.
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.size < 2:
        return math.nan
    slope = np.diff(v) / np.diff(t)
    i = int(np.argmax(slope))
    if not slope[i] > 0.0:
        return math.nan
    mid = 0.5 * (t[:-1] + t[1:])
    if 0 < i < slope.size - 1:
        y0, y1, y2 = slope[i - 1], slope[i], slope[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0.0:
            offset = 0.5 * (y0 - y2) / denom
            offset = min(max(offset, -1.0), 1.0)
            step = mid[i + 1] - mid[i] if offset > 0 else mid[i] - mid[i - 1]
            return float(mid[i] + offset * step)
    return float(mid[i])


def compute_apd90(trace: Trace, fraction: float = 0.9) -> float:
    """APD at ``fraction`` repolarization from the max-dV/dt instant; NaN if invalid.

    The rest level is the minimum before the upstroke and the amplitude is
    measured to the peak that follows it.
    """
    t, v = trace.times, trace.values
    start = upstroke_time(t, v)
    if math.isnan(start):
        return math.nan
    i_start = int(np.searchsorted(t, start))
    pre = v[: max(i_start, 1)]
    v_rest = float(pre.min())
    i_peak = i_start + int(np.argmax(v[i_start:])) if i_start < v.size else v.size - 1
    v_peak = float(v[i_peak])
    if v_peak - v_rest <= 0.0:
        return math.nan
    v_x = v_peak - fraction * (v_peak - v_rest)
    tail = v[i_peak:]
    down = np.flatnonzero((tail[:-1] >= v_x) & (tail[1:] < v_x))
    if down.size == 0:
        return math.nan
    j = i_peak + int(down[0])
    frac = (v_x - v[j]) / (v[j + 1] - v[j])
    return float(t[j] + frac * (t[j + 1] - t[j]) - start)


def compute_cv(latmap: ScalarMap, coords: np.ndarray, probe_a: int, probe_b: int) -> float:
    """Distance between the probes over their activation-time difference (cm/ms)."""
    for p in (probe_a, probe_b):
        if not latmap.valid[p]:
            raise ValueError(f"probe node {p} was never activated")
    dlat = abs(float(latmap.values[probe_b] - latmap.values[probe_a]))
    if dlat == 0.0:
        raise ValueError("probes activate simultaneously; conduction velocity is undefined")
    dist = float(np.linalg.norm(np.asarray(coords[probe_b]) - np.asarray(coords[probe_a])))
    return dist / dlat


def nrmse(reference: ScalarMap, candidate: ScalarMap) -> float:
    """RMS difference over valid nodes, normalized by the reference range."""
    if reference.values.shape != candidate.values.shape:
        raise ValueError("maps have different node counts")
    if not np.array_equal(reference.valid, candidate.valid):
        n_diff = int(np.count_nonzero(reference.valid != candidate.valid))
        raise ValueError(f"validity masks differ at {n_diff} nodes")
    mask = reference.valid
    if not mask.any():
        raise ValueError("no valid nodes to compare")
    u = reference.values[mask]
    u_hat = candidate.values[mask]
    span = float(u.max() - u.min())
    if span == 0.0:
        raise ValueError("reference map has zero range")
    return float(np.sqrt(np.mean((u_hat - u) ** 2)) / span)


def align_and_diff(trace_a: Trace, trace_b: Trace) -> float:
    """Max |V_a - V_b| after shifting b so both max-dV/dt instants coincide."""
    ta = upstroke_time(trace_a.times, trace_a.values)
    tb = upstroke_time(trace_b.times, trace_b.values)
    if math.isnan(ta) or math.isnan(tb):
        raise ValueError("no action potential detected in one of the traces")
    shift = ta - tb
    tb_shifted = trace_b.times + shift
    lo = max(trace_a.times[0], tb_shifted[0])
    hi = min(trace_a.times[-1], tb_shifted[-1])
    keep = (trace_a.times >= lo) & (trace_a.times <= hi)
    if not keep.any():
        raise ValueError("traces do not overlap after alignment")
    vb = np.interp(trace_a.times[keep], tb_shifted, trace_b.values)
    return float(np.max(np.abs(trace_a.values[keep] - vb)))
