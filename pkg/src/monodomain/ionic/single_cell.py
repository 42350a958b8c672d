"""Single-cell forward Euler integration, pacing to steady state and dt0 search."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from ..postprocess import Trace, compute_apd90
from .base import CellModel

DIVERGENCE_LIMIT = 1000.0
DT0_V_LIMIT = 200.0
DT0_BRACKET = (1e-5, 1.0)
DT0_RTOL = 0.05


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class StimulusTemplate:
    amplitude: float  # mV/ms
    duration: float = 1.0  # ms
    offset: float = 0.0  # ms from the start of each beat


def rates(model: CellModel, v: float, s: np.ndarray, istim: float = 0.0) -> tuple[float, np.ndarray]:
    """``(dV/dt, dS/dt)`` of ``model`` at one point."""
    s = np.ascontiguousarray(s, dtype=np.float64)
    ds = np.empty_like(s)
    dv = model.rhs(float(v), s, float(istim), model.params, ds, np.zeros_like(s))
    if not (math.isfinite(dv) and np.all(np.isfinite(ds))):
        raise FloatingPointError(f"{model.name}: non-finite rates at V={v}")
    return float(dv), ds


@njit(cache=True, error_model="numpy")
def advance_states(s, ds, tau, h, rush_larsen):
    """``s += h * ds``; with ``rush_larsen`` gates relax exponentially instead."""
    for j in range(s.size):
        if rush_larsen and tau[j] > 0.0:
            s[j] = s[j] - ds[j] * tau[j] * math.expm1(-h / tau[j])
        else:
            s[j] = s[j] + h * ds[j]


@njit(cache=True, error_model="numpy")
def _integrate(rhs, p, v, s, dt, n_steps, stim_on, stim_off, stim_amp, v_limit, stride, out_v,
               rush_larsen):
    """Fixed-step integration from local time 0; returns (v, failed_step or -1). ``s`` is updated in place."""
    ds = np.empty_like(s)
    tau = np.zeros_like(s)
    n_states = s.size
    for n in range(n_steps):
        if stride > 0 and n % stride == 0:
            out_v[n // stride] = v
        t = n * dt
        ist = stim_amp if (t >= stim_on and t < stim_off) else 0.0
        dv = rhs(v, s, ist, p, ds, tau)
        v = v + dt * dv
        bad = not (abs(v) <= v_limit)
        advance_states(s, ds, tau, dt, rush_larsen)
        for j in range(n_states):
            if not np.isfinite(s[j]):
                bad = True
        if bad:
            return v, n
    if stride > 0 and n_steps % stride == 0:
        out_v[n_steps // stride] = v
    return v, -1


def integrate(model: CellModel, v: float, s: np.ndarray, dt: float, duration: float,
              stim: StimulusTemplate | None = None, v_limit: float = DIVERGENCE_LIMIT,
              record_every: int = 0, rush_larsen: bool = False
              ) -> tuple[float, np.ndarray, np.ndarray | None, int]:
    """Integrate one stretch of ``duration`` ms. Returns (v, s, recorded V or None, failed step)."""
    n_steps = int(round(duration / dt))
    s = np.array(s, dtype=np.float64)
    out = np.empty(n_steps // record_every + 1 if record_every > 0 else 1)
    if stim is None or stim.amplitude == 0.0:
        on, off, amp = 0.0, 0.0, 0.0
    else:
        on, off, amp = stim.offset, stim.offset + stim.duration, stim.amplitude
    v, failed = _integrate(model.rhs, model.params, float(v), s, float(dt), n_steps,
                           on, off, amp, v_limit, int(record_every), out, bool(rush_larsen))
    return float(v), s, (out if record_every > 0 else None), int(failed)


@dataclass
class PacingResult:
    v: float
    state: np.ndarray
    beats: int
    state_change: float  # max relative change of the end-diastolic state over the last beat
    apd90: list[float] = field(default_factory=list)

    @property
    def apd_change(self) -> float:
        if len(self.apd90) < 2:
            return math.nan
        return abs(self.apd90[-1] - self.apd90[-2])


def _relative_change(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.maximum(np.abs(a), 1e-12)
    return float(np.max(np.abs(b - a) / scale))


def pace_to_steady_state(model: CellModel, cycle_length: float = 1000.0, n_beats: int = 100,
                         stim_amplitude: float = 0.0, stim_duration: float = 1.0,
                         dt: float | None = None, v0: float | None = None,
                         s0: np.ndarray | None = None, apd_every: int = 1,
                         rush_larsen: bool = False) -> PacingResult:
    """Pace a single cell at fixed step ``dt0 / 2`` and return the last end-diastolic state."""
    if n_beats < 1:
        raise ValueError("n_beats must be at least 1")
    dt = model.dt0 / 2.0 if dt is None else dt
    v = model.rest_v if v0 is None else float(v0)
    s = model.rest_state.copy() if s0 is None else np.array(s0, dtype=np.float64)
    stim = StimulusTemplate(stim_amplitude, stim_duration)
    prev = np.concatenate([[v], s])
    change = math.nan
    apds: list[float] = []
    for beat in range(n_beats):
        record = 1 if (beat % apd_every == 0 or beat >= n_beats - 2) else 0
        v, s, trace, failed = integrate(model, v, s, dt, cycle_length, stim, record_every=record,
                                           rush_larsen=rush_larsen)
        if failed >= 0:
            raise DivergenceError(f"{model.name}: pacing diverged in beat {beat} at t={failed * dt:.4f} ms")
        if trace is not None:
            times = np.arange(trace.size) * dt
            apds.append(compute_apd90(Trace(0, times, trace)))
        cur = np.concatenate([[v], s])
        change = _relative_change(prev, cur)
        prev = cur
    return PacingResult(v, s, n_beats, change, apds)


def _beat_is_stable(model: CellModel, dt: float, stim: StimulusTemplate, beat_length: float) -> bool:
    _, _, _, failed = integrate(model, model.rest_v, model.rest_state, dt, beat_length, stim,
                                v_limit=DT0_V_LIMIT)
    return failed < 0


def estimate_dt0(model: CellModel, stim: StimulusTemplate | None = None, beat_length: float = 1000.0,
                 bracket: tuple[float, float] = DT0_BRACKET, rtol: float = DT0_RTOL) -> float:
    """Largest forward Euler step (to ``rtol``) that completes one paced beat with |V| <= 200 mV.

    Steps down geometrically from the upper bracket until a stable step is
    found, then bisects between the stable and unstable steps.
    """
    stim = stim or StimulusTemplate(0.0)
    lo_limit, hi = bracket
    if _beat_is_stable(model, hi, stim, beat_length):
        return hi
    lo = hi
    while True:
        lo /= 2.0
        if lo < lo_limit:
            raise DivergenceError(f"{model.name}: no stable step found in [{lo_limit}, {bracket[1]}] ms")
        if _beat_is_stable(model, lo, stim, beat_length):
            break
        hi = lo
    while hi / lo > 1.0 + rtol:
        mid = math.sqrt(lo * hi)
        if _beat_is_stable(model, mid, stim, beat_length):
            lo = mid
        else:
            hi = mid
    return lo


def export_trace_csv(model: CellModel, path: str | Path, duration: float, dt: float | None = None,
                     stim: StimulusTemplate | None = None, states: tuple[str, ...] = (),
                     every: int = 1) -> None:
    """Write ``t, V, <states>`` for one stretch integrated from the model's rest state."""
    dt = model.dt0 / 2.0 if dt is None else dt
    idx = [model.state_names.index(name) for name in states]
    n_steps = int(round(duration / dt))
    v, s = model.rest_v, model.rest_state.copy()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ms", "V_mV", *states])
        t = 0.0
        w.writerow([repr(t), repr(v), *(repr(float(s[i])) for i in idx)])
        chunk = max(1, every)
        for n in range(0, n_steps, chunk):
            seg_stim = None
            if stim is not None:
                seg_stim = StimulusTemplate(stim.amplitude, stim.duration, stim.offset - n * dt)
            v, s, _, failed = integrate(model, v, s, dt, chunk * dt, seg_stim)
            if failed >= 0:
                raise DivergenceError(f"{model.name}: trace diverged near t={(n + failed) * dt:.4f} ms")
            t = (n + chunk) * dt
            w.writerow([repr(t), repr(v), *(repr(float(s[i])) for i in idx)])
