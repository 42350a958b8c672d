"""Strang-split explicit drivers: OST, OSTAR and DAETI.

One run over ``n`` global steps applies

    I (half diffusion), A (reaction), then (B, A) repeated, then III (half diffusion)

where B is the merged pair of half steps between two reactions. Reaction
sub-steps adapt per node to the last dV/dt (OSTAR, DAETI) and diffusion
sub-steps adapt to the Gershgorin bound dt_s (DAETI).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numba
import numpy as np
from numba import njit, prange

from .fem import AssembledOperator, _diffuse, assemble
from .ionic.base import CellModel
from .ionic.single_cell import advance_states
from .ionic.state import NodeStateArray
from .postprocess import ScalarMap, Trace
from .stimulus import Protocol, Stimulus, StimulusTable, table_current

log = logging.getLogger(__name__)

SCHEMES = ("OST", "OSTAR", "DAETI")
GATE_INTEGRATIONS = ("forward_euler", "rush_larsen")
DEFAULT_DT = {"OST": 0.01, "OSTAR": 0.1, "DAETI": 0.1}
BLOCK = 256
_FLOOR_EPS = 1e-9


class InstabilityError(RuntimeError):
    def __init__(self, message: str, node: int = -1, t: float = math.nan):
        super().__init__(message)
        self.node = node
        self.t = t


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "DAETI"
    dt: float = 0.1
    T: float = 500.0
    dt0: float | None = None  # defaults to the smallest dt0 among the models in use
    k0_up: int = 5
    k0_down: int = 1
    strict_substeps: bool = False
    record_interval: float = 0.1
    snapshot_interval: float | None = None
    lat_threshold: float = 0.0
    progress_every: int = 0
    gate_integration: str = "forward_euler"

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.T < self.dt:
            raise ValueError("T must be at least dt")
        if not self.k0_up >= self.k0_down >= 1:
            raise ValueError("need k0_up >= k0_down >= 1")
        if self.dt0 is not None and not self.dt0 > 0.0:
            raise ValueError("dt0 must be positive")
        if not self.record_interval > 0.0:
            raise ValueError("record_interval must be positive")
        if self.snapshot_interval is not None and not self.snapshot_interval > 0.0:
            raise ValueError("snapshot_interval must be positive")
        if self.gate_integration not in GATE_INTEGRATIONS:
            raise ValueError(f"gate_integration must be one of {GATE_INTEGRATIONS}")

    @property
    def rush_larsen(self) -> bool:
        return self.gate_integration == "rush_larsen"

    @property
    def adaptive_reaction(self) -> bool:
        return self.scheme != "OST"

    @property
    def k_max(self) -> int:
        if self.dt0 is None:
            raise ValueError("dt0 is not set")
        return k_max_for(self.dt, self.dt0)


def k_max_for(dt: float, dt0: float) -> int:
    """``floor(dt / dt0)``, never below one."""
    return max(1, int(math.floor(dt / dt0 + _FLOOR_EPS)))


def reaction_substeps(dvdt_prev: float, cfg: SchemeConfig) -> int:
    """Reaction sub-step count for one node from its previous dV/dt."""
    if not cfg.adaptive_reaction:
        return 1
    return _k_rule(float(dvdt_prev), cfg.k0_up, cfg.k0_down, cfg.k_max)


@njit(cache=True)
def _k_rule(d, k0_up, k0_down, k_max):
    k0 = k0_up if d > 0.0 else k0_down
    mag = abs(d)
    if mag >= k_max:
        return k_max
    k = k0 + int(math.floor(mag))
    return k if k < k_max else k_max


def diffusion_substeps(dt: float, dt_s: float, strict: bool = False,
                       scheme: str = "DAETI") -> tuple[int, float]:
    """``(l, dt_ad)`` with ``dt_ad = dt / (2 l)``.

    ``l = floor(dt / (2 dt_s))`` when ``dt / 2 > dt_s``, otherwise one. Strict
    mode rounds up instead so that ``dt_ad <= dt_s`` always holds.
    """
    if not (dt > 0.0 and dt_s > 0.0):
        raise ValueError("dt and dt_s must be positive")
    l = 1
    if scheme == "DAETI" and dt / 2.0 > dt_s:
        ratio = dt / (2.0 * dt_s)
        l = math.ceil(ratio - _FLOOR_EPS) if strict else math.floor(ratio + _FLOOR_EPS)
        l = max(1, int(l))
    return l, dt / (2.0 * l)


def effective_dt(cfg: SchemeConfig, dt_s: float) -> float:
    """OSTAR falls back to dt_s when the diffusion bound is the tighter one."""
    if cfg.scheme == "OSTAR":
        return min(cfg.dt, dt_s)
    return cfg.dt


def n_global_steps(T: float, dt: float) -> int:
    return max(1, int(math.ceil(T / dt - _FLOOR_EPS)))


@dataclass(frozen=True, eq=False)
class StepPlan:
    k: np.ndarray
    l: int
    dt_ad: float
    dt: float

    @property
    def dt_ar(self) -> np.ndarray:
        return self.dt / self.k


def plan_step(dvdt_prev: np.ndarray, cfg: SchemeConfig, dt_s: float) -> StepPlan:
    """Sub-step counts a global step would use for the given dV/dt field."""
    dt = effective_dt(cfg, dt_s)
    sub = replace(cfg, dt=dt)
    k = np.array([reaction_substeps(d, sub) for d in np.asarray(dvdt_prev, dtype=float)], dtype=np.int64)
    l, dt_ad = diffusion_substeps(dt, dt_s, cfg.strict_substeps, cfg.scheme)
    return StepPlan(k, l, dt_ad, dt)


def strang_loop(n_steps: int, react: Callable[[int], None], diffuse: Callable[[int], None],
                after_reaction: Callable[[int], None] | None = None) -> None:
    """Drive the split sequence. ``diffuse(h)`` advances ``h`` half steps of diffusion."""
    diffuse(1)
    for n in range(n_steps):
        react(n)
        if after_reaction is not None:
            after_reaction(n)
        diffuse(1 if n == n_steps - 1 else 2)


@njit(parallel=True, cache=True, error_model="numpy")
def _react(rhs, p, nodes, V, S, dvdt, k_used, t, dt, adaptive, k0_up, k0_down, k_max,
           st_ptr, st_idx, st_start, st_dur, st_amp, st_period, fail, rush_larsen):
    n = nodes.size
    n_states = S.shape[1]
    n_blocks = (n + BLOCK - 1) // BLOCK
    for b in prange(n_blocks):
        s = np.empty(n_states)
        ds = np.empty(n_states)
        tau = np.zeros(n_states)
        stop = min(n, (b + 1) * BLOCK)
        for g in range(b * BLOCK, stop):
            i = nodes[g]
            k = _k_rule(dvdt[i], k0_up, k0_down, k_max) if adaptive else 1
            h = dt / k
            v = V[i]
            for j in range(n_states):
                s[j] = S[g, j]
            dv = 0.0
            for sub in range(k):
                tj = t + sub * h
                ist = table_current(i, tj, st_ptr, st_idx, st_start, st_dur, st_amp, st_period)
                dv = rhs(v, s, ist, p, ds, tau)
                v = v + h * dv
                advance_states(s, ds, tau, h, rush_larsen)
            if not np.isfinite(v):
                if fail[b] < 0:
                    fail[b] = i
                continue
            V[i] = v
            for j in range(n_states):
                S[g, j] = s[j]
            dvdt[i] = dv
            k_used[i] = k


@njit(parallel=True, cache=True)
def _stream(v_old, v_new, t_old, t_new, thr, frac, lat, phase, vmin, smax, tup, vpeak, apd):
    """Online activation time and APD detectors fed with consecutive samples."""
    h = t_new - t_old
    for i in prange(v_new.size):
        ph = phase[i]
        if ph == 2:
            continue
        a = v_old[i]
        b = v_new[i]
        slope = (b - a) / h
        if slope > smax[i]:
            smax[i] = slope
            tup[i] = 0.5 * (t_old + t_new)
        if ph == 0:
            if b < vmin[i]:
                vmin[i] = b
            if a < thr <= b:
                lat[i] = t_old + (thr - a) / (b - a) * h
                phase[i] = 1
                vpeak[i] = b
        else:
            if b > vpeak[i]:
                vpeak[i] = b
            else:
                vx = vpeak[i] - frac * (vpeak[i] - vmin[i])
                if a >= vx > b:
                    apd[i] = t_old + (vx - a) / (b - a) * h - tup[i]
                    phase[i] = 2


@dataclass
class Timing:
    reaction: float = 0.0
    diffusion: float = 0.0
    overhead: float = 0.0
    total: float = 0.0

    def as_dict(self) -> dict:
        return {"reaction_s": self.reaction, "diffusion_s": self.diffusion,
                "overhead_s": self.overhead, "total_s": self.total}


@dataclass
class SimulationResult:
    scheme: str
    dt: float
    dt_s: float
    n_steps: int
    l: int
    dt_ad: float
    k_max: int
    record_times: np.ndarray
    traces: dict[int, Trace]
    lat: ScalarMap
    apd90: ScalarMap
    vmax_times: np.ndarray
    vmax: np.ndarray
    k_histogram: np.ndarray
    k_traces: dict[int, np.ndarray]
    snapshots: list[tuple[float, np.ndarray]]
    timing: Timing
    state: NodeStateArray
    stopped_early: bool = False
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"scheme": self.scheme, "dt_effective_ms": self.dt, "dt_s_ms": self.dt_s,
                "n_steps": self.n_steps, "l": self.l, "dt_ad_ms": self.dt_ad, "k_max": self.k_max,
                "k_histogram": {int(k): int(c) for k, c in enumerate(self.k_histogram) if c},
                "timing": self.timing.as_dict(), "stopped_early": self.stopped_early}


def set_workers(workers: int | None) -> int:
    """Use ``workers`` threads (capped at the pool size); returns the count in effect."""
    if workers is not None:
        numba.set_num_threads(max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()


class Simulation:
    """One split integration of a tissue state. Mutates ``state`` in place."""

    def __init__(self, op: AssembledOperator, state: NodeStateArray, protocol: Protocol,
                 cfg: SchemeConfig, probes: Sequence[int] = (), workers: int | None = None):
        state.check()
        if state.n_nodes != op.n:
            raise ValueError("state and operator have different node counts")
        if cfg.dt0 is None:
            cfg = replace(cfg, dt0=min(g.model.dt0 for g in state.groups))
        self.op = op
        self.state = state
        self.cfg = cfg
        self.protocol = protocol
        self.table = StimulusTable.build(protocol, op.n)
        self.probes = [int(p) for p in probes]
        self.workers = set_workers(workers)

        self.dt = effective_dt(cfg, op.dt_s)
        self.n_steps = n_global_steps(cfg.T, self.dt)
        self.k_max = k_max_for(self.dt, cfg.dt0)
        self.l, self.dt_ad = diffusion_substeps(self.dt, op.dt_s, cfg.strict_substeps, cfg.scheme)
        self.timing = Timing()
        self._k_used = np.ones(op.n, dtype=np.int64)
        self._fail = np.empty(0, dtype=np.int64)

    # -- operators -----------------------------------------------------
    def diffuse(self, halves: int) -> None:
        t0 = time.perf_counter()
        K = self.op.K
        self.state.V = _diffuse(K.indptr, K.indices, K.data, self.op.m, self.state.V,
                                self.dt_ad, halves * self.l)
        self.timing.diffusion += time.perf_counter() - t0

    def react(self, n: int) -> None:
        t0 = time.perf_counter()
        st = self.state
        t = n * self.dt
        cfg = self.cfg
        for g in st.groups:
            fail = np.full(max(1, (g.nodes.size + BLOCK - 1) // BLOCK), -1, dtype=np.int64)
            _react(g.model.rhs, g.model.params, g.nodes, st.V, g.S, st.last_dvdt, self._k_used,
                   t, self.dt, cfg.adaptive_reaction, cfg.k0_up, cfg.k0_down, self.k_max,
                   *self.table.arrays(), fail, cfg.rush_larsen)
            if np.any(fail >= 0):
                node = int(fail[fail >= 0].min())
                raise InstabilityError(
                    f"non-finite membrane potential at node {node} ({g.model.name}) "
                    f"during step {n} (t = {t:.4f} ms, dt = {self.dt} ms, k_max = {self.k_max})",
                    node, t)
        st.t = (n + 1) * self.dt
        self.timing.reaction += time.perf_counter() - t0

    def warm_up(self) -> None:
        """Load or compile kernels outside the timed region."""
        empty = np.empty(0, dtype=np.int64)
        for g in self.state.groups:
            _react(g.model.rhs, g.model.params, empty, self.state.V, g.S[:0], self.state.last_dvdt,
                   self._k_used, 0.0, self.dt, True, 1, 1, 1, *self.table.arrays(),
                   np.full(1, -1, dtype=np.int64), self.cfg.rush_larsen)
        K = self.op.K
        _diffuse(K.indptr, K.indices, K.data, self.op.m, self.state.V, self.dt_ad, 0)
        z = np.zeros(0)
        zi = np.zeros(0, dtype=np.int8)
        _stream(z, z, 0.0, 1.0, 0.0, 0.9, z, zi, z, z, z, z, z)

    # -- driver --------------------------------------------------------
    def run(self, stop: Callable[["Simulation", int], bool] | None = None) -> SimulationResult:
        cfg = self.cfg
        st = self.state
        n_nodes = st.n_nodes
        self.warm_up()

        lat = np.full(n_nodes, np.nan)
        phase = np.zeros(n_nodes, dtype=np.int8)
        vmin = st.V.copy()
        smax = np.full(n_nodes, -np.inf)
        tup = np.full(n_nodes, np.nan)
        vpeak = np.full(n_nodes, -np.inf)
        apd = np.full(n_nodes, np.nan)

        t_end = self.n_steps * self.dt
        ri = cfg.record_interval
        n_rec = int(math.floor(t_end / ri + _FLOOR_EPS)) + 1
        rec_t = np.arange(n_rec) * ri
        probes = np.array(self.probes, dtype=np.int64)
        rec = np.full((n_rec, probes.size), np.nan)
        if probes.size:
            rec[0] = st.V[probes]
        next_rec = 1

        snaps: list[tuple[float, np.ndarray]] = []
        snap_times: list[float] = []
        if cfg.snapshot_interval:
            n_snap = int(math.floor(cfg.T / cfg.snapshot_interval + _FLOOR_EPS)) + 1
            snap_times = [i * cfg.snapshot_interval for i in range(n_snap)]
            snaps.append((0.0, st.V.copy()))
        next_snap = 1

        vmax_t = np.empty(self.n_steps)
        vmax_v = np.empty(self.n_steps)
        k_hist = np.zeros(self.k_max + 1, dtype=np.int64)
        k_traces = {int(p): np.empty(self.n_steps, dtype=np.int64) for p in probes}
        prev_v = st.V.copy()
        stopped = [False]
        steps_done = [0]

        def after(n: int) -> None:
            nonlocal next_rec, next_snap
            t_old = n * self.dt
            t_new = (n + 1) * self.dt
            v = st.V
            _stream(prev_v, v, t_old, t_new, cfg.lat_threshold, 0.9, lat, phase, vmin, smax, tup, vpeak, apd)
            while next_rec < n_rec and rec_t[next_rec] <= t_new + _FLOOR_EPS:
                w = (rec_t[next_rec] - t_old) / self.dt
                rec[next_rec] = (1.0 - w) * prev_v[probes] + w * v[probes]
                next_rec += 1
            while next_snap < len(snap_times) and t_new >= snap_times[next_snap] - 0.5 * self.dt:
                snaps.append((snap_times[next_snap], v.copy()))
                next_snap += 1
            vmax_t[n] = t_new
            vmax_v[n] = v.max()
            k_hist[:] += np.bincount(self._k_used, minlength=self.k_max + 1)[: self.k_max + 1]
            for p in k_traces:
                k_traces[p][n] = self._k_used[p]
            prev_v[:] = v
            steps_done[0] = n + 1
            if cfg.progress_every and (n + 1) % cfg.progress_every == 0:
                log.info("step=%d t=%.4f wall_ms=%.1f reaction_ms=%.1f diffusion_ms=%.1f",
                         n + 1, t_new, 1e3 * (time.perf_counter() - t_start),
                         1e3 * self.timing.reaction, 1e3 * self.timing.diffusion)
            if stop is not None and stop(self, n):
                stopped[0] = True
                raise _Stop

        t_start = time.perf_counter()
        try:
            strang_loop(self.n_steps, self.react, self.diffuse, after)
        except _Stop:
            pass
        self.timing.total = time.perf_counter() - t_start
        self.timing.overhead = self.timing.total - self.timing.reaction - self.timing.diffusion

        done = steps_done[0]
        traces = {int(p): Trace(int(p), rec_t[:next_rec], rec[:next_rec, j]) for j, p in enumerate(probes)}
        return SimulationResult(
            scheme=cfg.scheme, dt=self.dt, dt_s=self.op.dt_s, n_steps=self.n_steps, l=self.l,
            dt_ad=self.dt_ad, k_max=self.k_max, record_times=rec_t[:next_rec], traces=traces,
            lat=ScalarMap(lat, ~np.isnan(lat)), apd90=ScalarMap(apd, ~np.isnan(apd)),
            vmax_times=vmax_t[:done], vmax=vmax_v[:done], k_histogram=k_hist,
            k_traces={p: k[:done] for p, k in k_traces.items()}, snapshots=snaps,
            timing=self.timing, state=st, stopped_early=stopped[0],
        )


class _Stop(Exception):
    pass


def strang_advance(sim: Simulation, step_index: int, n_steps: int) -> NodeStateArray:
    """Advance ``sim.state`` by global step ``step_index`` of ``n_steps``."""
    if not 0 <= step_index < n_steps:
        raise ValueError("step_index out of range")
    if step_index == 0:
        sim.diffuse(1)
    sim.react(step_index)
    sim.diffuse(1 if step_index == n_steps - 1 else 2)
    return sim.state


def node_models_for(tags: np.ndarray, assignment: Mapping[str, CellModel]) -> Mapping[str, CellModel]:
    present = set(np.asarray(tags).astype(str))
    missing = sorted(present - set(assignment))
    if missing:
        raise KeyError(f"no cell model assigned to node tag(s) {missing}")
    return {t: assignment[t] for t in present}


def run_simulation(mesh, field, models: Mapping[str, CellModel], protocol: Protocol, cfg: SchemeConfig,
                   probes: Sequence[int] = (), workers: int | None = None,
                   op: AssembledOperator | None = None,
                   stop: Callable[[Simulation, int], bool] | None = None) -> SimulationResult:
    """Assemble (unless ``op`` is given), start every node at rest and integrate.

    ``models`` maps node tag -> cell model. OST stability is the caller's
    responsibility: its step is never reduced.
    """
    t0 = time.perf_counter()
    if op is None:
        op = assemble(mesh, field)
    t_assembly = time.perf_counter() - t0
    state = NodeStateArray.at_rest(node_models_for(mesh.node_tags, models), mesh.node_tags)
    sim = Simulation(op, state, protocol, cfg, probes, workers)
    result = sim.run(stop)
    result.extra["assembly_s"] = t_assembly
    result.extra["workers"] = sim.workers
    return result


def propagates(mesh, field, models: Mapping[str, CellModel], stimulus: Stimulus, probe: int,
               scheme: str = "DAETI", dt: float = 0.1, t_end: float = 50.0,
               gate_integration: str = "forward_euler") -> bool:
    """Does ``stimulus`` drive ``probe`` above 0 mV before ``t_end``?"""
    cfg = SchemeConfig(scheme=scheme, dt=dt, T=t_end, record_interval=t_end,
                       gate_integration=gate_integration)

    def reached(sim: Simulation, n: int) -> bool:
        return sim.state.V[probe] > 0.0

    result = run_simulation(mesh, field, models, Protocol((stimulus,)), cfg, stop=reached)
    return result.stopped_early
