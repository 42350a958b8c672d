"""Independent verification oracles.

* ``spectral_bound``: power iteration for the largest eigenvalue of
  diag(m)^-1 K, the true explicit diffusion stability limit.
* ``reference_solution``: a fine-step OST run used as ground truth.
* ``LinearTestProblem`` and ``splitting_order``: a linear reaction-diffusion
  problem with closed-form and matrix-exponential solutions, used to measure
  the temporal order of the Strang sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.linalg import expm_multiply

from .fem import AssembledOperator, assemble, build_diffusion_field
from .ionic.base import CellModel
from .ionic.state import NodeStateArray
from .mesh import Mesh, build_regular_sheet
from .splitting import (SchemeConfig, Simulation, SimulationResult, node_models_for,
                        strang_loop)
from .stimulus import Protocol

POWER_TOL = 1e-6
POWER_MAX_ITER = 100_000


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralBound:
    lam_max: float  # 1/ms
    iterations: int

    @property
    def critical_step(self) -> float:
        """Largest forward Euler diffusion step, 2 / lambda_max (ms)."""
        return 2.0 / self.lam_max


def spectral_bound(op: AssembledOperator, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER,
                   seed: int = 0) -> SpectralBound:
    """Largest eigenvalue of diag(m)^-1 K by power iteration.

    Iterates on the similar symmetric matrix B = M^-1/2 K M^-1/2 and stops
    once the residual ||B x - lam x|| falls below ``tol * lam``; for a
    symmetric matrix that bounds the distance from ``lam`` to an eigenvalue.
    """
    s = 1.0 / np.sqrt(op.m)
    B = (sp.diags(s) @ op.K @ sp.diags(s)).tocsr()
    x = np.random.default_rng(seed).standard_normal(op.n)
    x /= np.linalg.norm(x)
    for it in range(1, max_iter + 1):
        y = B @ x
        lam = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            raise OracleError("operator annihilated the iterate; K has no positive spectrum")
        if lam > 0.0 and np.linalg.norm(y - lam * x) <= tol * lam:
            return SpectralBound(lam, it)
        x = y / norm
    raise OracleError(f"power iteration did not converge in {max_iter} iterations")


# -- fine-step reference ----------------------------------------------------

def _dividing_step(T: float, target: float) -> float:
    """Largest step not above ``target`` that divides ``T`` into whole steps."""
    return T / math.ceil(T / target - 1e-9)


def reference_solution(mesh: Mesh, field, models: Mapping[str, CellModel], protocol: Protocol,
                       T: float, probes: Sequence[int] = (), refine: float = 10.0,
                       record_interval: float | None = None, snapshot_interval: float | None = None,
                       op: AssembledOperator | None = None) -> SimulationResult | np.ndarray:
    """OST at dt0/refine with diffusion sub-steps no longer than dt_s/refine.

    ``T == 0`` returns the initial membrane potential unchanged.
    """
    op = assemble(mesh, field) if op is None else op
    state = NodeStateArray.at_rest(node_models_for(mesh.node_tags, models), mesh.node_tags)
    if T == 0.0:
        return state.V.copy()
    dt0 = min(g.model.dt0 for g in state.groups)
    dt = _dividing_step(T, dt0 / refine)
    cfg = SchemeConfig(scheme="OST", dt=dt, T=T, dt0=dt0,
                       record_interval=record_interval or max(dt, T / 1000.0),
                       snapshot_interval=snapshot_interval)
    sim = Simulation(op, state, protocol, cfg, probes)
    sim.l = max(1, math.ceil(0.5 * sim.dt / (op.dt_s / refine) - 1e-9))
    sim.dt_ad = sim.dt / (2 * sim.l)
    try:
        result = sim.run()
    except RuntimeError as exc:
        raise OracleError(f"reference run became unstable: {exc}") from exc
    result.extra["reference_l"] = sim.l
    return result


# -- linear test problem ----------------------------------------------------

@njit(cache=True)
def _linear_rhs(v, s, istim, p, ds, tau):
    ds[0] = 0.0
    return -p[0] * v + istim


def linear_decay_model(a: float) -> CellModel:
    """dV/dt = -a V as a cell model; forward Euler is stable for steps below 2/a."""
    return CellModel("linear_decay", ("unused",), 0.0, np.zeros(1), np.array([a]), _linear_rhs,
                     dt0=1.0 / a if a > 0 else 1.0, rest_tolerance=0.0,
                     description="linear decay oracle")


@dataclass(frozen=True)
class LinearTestProblem:
    """u_t = -a(x) u + d Lap u on [0, Lx] x [0, Ly] with zero flux.

    The initial field is a sum of cosine modes ``(p, q, amplitude)``. With
    ``a_variation == 0`` the decay is uniform and every mode decays as
    exp(-(a + d lambda) t), lambda = (p pi / Lx)^2 + (q pi / Ly)^2. A non-zero
    ``a_variation`` makes a(x) = a (1 + a_variation cos(pi x / Lx)), so the
    reaction and diffusion operators no longer commute and the splitting
    error becomes visible.
    """

    a: float = 0.05
    d: float = 0.001
    Lx: float = 1.0
    Ly: float = 1.0
    h: float = 0.1
    modes: tuple[tuple[int, int, float], ...] = ((1, 0, 1.0), (2, 1, 0.5))
    a_variation: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def mesh(self) -> Mesh:
        if "mesh" not in self._cache:
            self._cache["mesh"] = build_regular_sheet(self.Lx, self.Ly, self.h)
        return self._cache["mesh"]

    @property
    def operator(self) -> AssembledOperator:
        if "op" not in self._cache:
            self._cache["op"] = assemble(self.mesh, build_diffusion_field(self.mesh, self.d, rho=1.0))
        return self._cache["op"]

    def decay(self, xy: np.ndarray | None = None) -> np.ndarray:
        xy = self.mesh.node_coords if xy is None else xy
        return self.a * (1.0 + self.a_variation * np.cos(np.pi * xy[:, 0] / self.Lx))

    def mode_eigenvalue(self, p: int, q: int) -> float:
        return (p * np.pi / self.Lx) ** 2 + (q * np.pi / self.Ly) ** 2

    def initial(self, xy: np.ndarray | None = None) -> np.ndarray:
        xy = self.mesh.node_coords if xy is None else xy
        u = np.zeros(xy.shape[0])
        for p, q, amp in self.modes:
            u += amp * np.cos(p * np.pi * xy[:, 0] / self.Lx) * np.cos(q * np.pi * xy[:, 1] / self.Ly)
        return u

    def analytic(self, t: float, xy: np.ndarray | None = None) -> np.ndarray:
        """Continuous solution; only defined for uniform decay."""
        if self.a_variation != 0.0:
            raise ValueError("closed form exists only for uniform decay")
        xy = self.mesh.node_coords if xy is None else xy
        u = np.zeros(xy.shape[0])
        for p, q, amp in self.modes:
            rate = self.a + self.d * self.mode_eigenvalue(p, q)
            u += (amp * math.exp(-rate * t) * np.cos(p * np.pi * xy[:, 0] / self.Lx)
                  * np.cos(q * np.pi * xy[:, 1] / self.Ly))
        return u

    def semi_discrete(self, t: float) -> np.ndarray:
        """Exact solution of the spatially discrete system u' = -(A + M^-1 K) u."""
        op = self.operator
        L = sp.diags(self.decay()) + sp.diags(1.0 / op.m) @ op.K
        return expm_multiply(-t * L.tocsc(), self.initial())

    def cell_models(self) -> dict[str, CellModel]:
        if self.a_variation != 0.0:
            raise ValueError("the cell-model form of the problem needs uniform decay")
        return {tag: linear_decay_model(self.a) for tag in np.unique(self.mesh.node_tags)}

    def reference(self, T: float, refine: float = 10.0) -> np.ndarray:
        """Fine-step reference field at ``T`` computed through the solver."""
        return _run_linear(self, T, refine)


def _run_linear(problem: LinearTestProblem, T: float, refine: float) -> np.ndarray:
    """reference_solution with the problem's cosine field as initial condition."""
    op = problem.operator
    models = problem.cell_models()
    mesh = problem.mesh
    state = NodeStateArray.at_rest(node_models_for(mesh.node_tags, models), mesh.node_tags)
    state.V[:] = problem.initial()
    if T == 0.0:
        return state.V.copy()
    dt0 = min(g.model.dt0 for g in state.groups)
    dt = _dividing_step(T, dt0 / refine)
    cfg = SchemeConfig(scheme="OST", dt=dt, T=T, dt0=dt0, record_interval=T)
    sim = Simulation(op, state, Protocol(), cfg)
    sim.l = max(1, math.ceil(0.5 * sim.dt / (op.dt_s / refine) - 1e-9))
    sim.dt_ad = sim.dt / (2 * sim.l)
    sim.run()
    return sim.state.V.copy()


# -- splitting order ----------------------------------------------------------

@dataclass(frozen=True)
class OrderStudy:
    integrator: str
    dts: np.ndarray
    errors: np.ndarray

    @property
    def pairwise_orders(self) -> np.ndarray:
        return np.log(self.errors[:-1] / self.errors[1:]) / np.log(self.dts[:-1] / self.dts[1:])

    @property
    def order(self) -> float:
        """Least-squares slope of log(error) against log(dt)."""
        return float(np.polyfit(np.log(self.dts), np.log(self.errors), 1)[0])


def split_solve(problem: LinearTestProblem, T: float, n_steps: int, integrator: str = "exact") -> np.ndarray:
    """Run the Strang sequence on ``problem`` with exact or forward Euler sub-integrators."""
    if integrator not in ("exact", "euler"):
        raise ValueError("integrator must be 'exact' or 'euler'")
    op = problem.operator
    a = problem.decay()
    dt = T / n_steps
    u = problem.initial()
    Minv_K = (sp.diags(1.0 / op.m) @ op.K).tocsc()
    half = 0.5 * dt

    def react(n: int) -> None:
        nonlocal u
        u = u * np.exp(-a * dt) if integrator == "exact" else u * (1.0 - a * dt)

    def diffuse(halves: int) -> None:
        nonlocal u
        for _ in range(halves):
            if integrator == "exact":
                u = expm_multiply(-half * Minv_K, u)
            else:
                u = u - half * (Minv_K @ u)

    strang_loop(n_steps, react, diffuse)
    return u


def splitting_order(problem: LinearTestProblem | None = None, T: float = 10.0,
                    steps: Sequence[int] = (4, 8, 16, 32), integrator: str = "exact") -> OrderStudy:
    """Errors of the split solution against the semi-discrete exact solution at ``T``."""
    problem = problem or LinearTestProblem(a=0.2, d=0.01, a_variation=0.8)
    exact = problem.semi_discrete(T)
    errors = [float(np.max(np.abs(split_solve(problem, T, n, integrator) - exact))) for n in steps]
    return OrderStudy(integrator, T / np.asarray(steps, dtype=float), np.asarray(errors))
