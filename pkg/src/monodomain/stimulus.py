"""Stimulation protocols and their compiled per-node lookup tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

# Window edges are compared with this slack (ms) so that sub-step times built
# from t + j*dt/k land on the intended side of a half-open window.
TIME_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class Stimulus:
    nodes: np.ndarray
    t_start: float
    duration: float
    amplitude: float
    period: float | None = None
    label: str = ""

    def __post_init__(self) -> None:
        nodes = np.unique(np.asarray(self.nodes, dtype=np.int64))
        if nodes.size == 0:
            raise ValueError(f"stimulus {self.label!r} selects no nodes")
        if not self.duration > 0.0:
            raise ValueError(f"stimulus {self.label!r}: duration must be positive")
        if not math.isfinite(self.amplitude):
            raise ValueError(f"stimulus {self.label!r}: amplitude must be finite")
        if self.period is not None and not self.period > 0.0:
            raise ValueError(f"stimulus {self.label!r}: period must be positive or None")
        object.__setattr__(self, "nodes", nodes)

    def active(self, t: float) -> bool:
        return _window_active(t, self.t_start, self.duration, -1.0 if self.period is None else self.period)

    def with_amplitude(self, amplitude: float) -> "Stimulus":
        return Stimulus(self.nodes, self.t_start, self.duration, amplitude, self.period, self.label)

    def describe(self) -> dict:
        return {"label": self.label, "n_nodes": int(self.nodes.size), "t_start": self.t_start,
                "duration": self.duration, "amplitude": self.amplitude, "period": self.period}


@dataclass(frozen=True, eq=False)
class Protocol:
    stimuli: tuple[Stimulus, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "stimuli", tuple(self.stimuli))

    def __len__(self) -> int:
        return len(self.stimuli)

    def __iter__(self):
        return iter(self.stimuli)

    def scaled(self, factor: float) -> "Protocol":
        return Protocol(tuple(s.with_amplitude(s.amplitude * factor) for s in self.stimuli))

    def describe(self) -> list[dict]:
        return [s.describe() for s in self.stimuli]

    def compile(self, n_nodes: int) -> "StimulusTable":
        return StimulusTable.build(self, n_nodes)


@njit(cache=True)
def _window_active(t, t_start, duration, period):
    if t < t_start - TIME_EPS:
        return False
    if period > 0.0:
        phase = np.fmod(t - t_start, period)
        if phase < -TIME_EPS:
            phase += period
        if phase > period - TIME_EPS:
            phase -= period
        return phase < duration - TIME_EPS
    return t < t_start + duration - TIME_EPS


def stim_current(protocol: Protocol, node: int, t: float) -> float:
    """Summed amplitude (mV/ms) of every stimulus covering ``node`` at time ``t``."""
    total = 0.0
    for s in protocol.stimuli:
        if not s.active(t):
            continue
        j = np.searchsorted(s.nodes, node)
        if j < s.nodes.size and s.nodes[j] == node:
            total += s.amplitude
    return total


def grouped_delays(groups: Sequence[tuple[Iterable[int], float]], period: float,
                   duration: float = 1.0, amplitude: float = 1.0, t0: float = 0.0,
                   labels: Sequence[str] | None = None) -> Protocol:
    """One periodic stimulus per ``(nodes, delay)`` group, starting at ``t0 + delay``."""
    stimuli = []
    for i, (nodes, delay) in enumerate(groups):
        if delay < 0.0:
            raise ValueError(f"group {i}: delay must be non-negative")
        label = labels[i] if labels else f"group{i}"
        stimuli.append(Stimulus(np.asarray(list(nodes), dtype=np.int64), t0 + delay, duration,
                                amplitude, period, label))
    return Protocol(tuple(stimuli))


@dataclass(frozen=True, eq=False)
class StimulusTable:
    """CSR node -> stimulus table consumed by the reaction kernel."""

    ptr: np.ndarray
    idx: np.ndarray
    t_start: np.ndarray
    duration: np.ndarray
    amplitude: np.ndarray
    period: np.ndarray  # <= 0 marks a single shot

    @classmethod
    def build(cls, protocol: Protocol, n_nodes: int) -> "StimulusTable":
        pairs = [(int(n), k) for k, s in enumerate(protocol.stimuli) for n in s.nodes]
        for n, _ in pairs:
            if n < 0 or n >= n_nodes:
                raise ValueError(f"stimulus node {n} outside mesh of {n_nodes} nodes")
        pairs.sort()
        counts = np.zeros(n_nodes + 1, dtype=np.int64)
        for n, _ in pairs:
            counts[n + 1] += 1
        ptr = np.cumsum(counts)
        idx = np.array([k for _, k in pairs], dtype=np.int64)
        st = protocol.stimuli
        return cls(ptr, idx,
                   np.array([s.t_start for s in st], dtype=np.float64),
                   np.array([s.duration for s in st], dtype=np.float64),
                   np.array([s.amplitude for s in st], dtype=np.float64),
                   np.array([-1.0 if s.period is None else s.period for s in st], dtype=np.float64))

    def arrays(self) -> tuple:
        return self.ptr, self.idx, self.t_start, self.duration, self.amplitude, self.period


@njit(cache=True)
def table_current(node, t, ptr, idx, t_start, duration, amplitude, period):
    total = 0.0
    for q in range(ptr[node], ptr[node + 1]):
        k = idx[q]
        if _window_active(t, t_start[k], duration[k], period[k]):
            total += amplitude[k]
    return total


def diastolic_threshold(mesh, field, model_map, template: Stimulus, probe: int,
                        scheme: str = "DAETI", dt: float = 0.1, window: float = 50.0,
                        rtol: float = 0.05, max_factor: float = 1000.0,
                        gate_integration: str = "forward_euler") -> float:
    """Smallest amplitude (to ``rtol``) whose response reaches 0 mV at ``probe`` within ``window`` ms.

    ``template`` gives the stimulated nodes, onset and duration; its amplitude
    is the initial guess. The probe should lie at least 1 cm from the stimulus.
    """
    from .splitting import propagates

    def fires(amplitude: float) -> bool:
        return propagates(mesh, field, model_map, template.with_amplitude(amplitude), probe,
                          scheme=scheme, dt=dt, t_end=template.t_start + window,
                          gate_integration=gate_integration)

    guess = abs(template.amplitude)
    if guess == 0.0:
        raise ValueError("template amplitude is used as the initial guess and must be non-zero")
    lo, hi = 0.0, guess
    while not fires(hi):
        lo = hi
        hi *= 2.0
        if hi > max_factor * guess:
            raise RuntimeError(f"no propagation up to {max_factor:g} x the initial guess ({hi:g} mV/ms)")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if fires(mid):
            hi = mid
        else:
            lo = mid
    return hi
