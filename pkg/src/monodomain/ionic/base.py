"""Cell model container shared by every ionic model.

A model is a numba-compiled right-hand side with the signature::

    rhs(v, s, istim, p, ds, tau) -> dvdt

where ``v`` is the membrane potential (mV), ``s`` the model state vector
(V excluded), ``istim`` the applied stimulus (mV/ms, positive depolarizes),
``p`` a float64 parameter vector, and ``ds`` an output buffer receiving
``ds/dt``. The return value is ``-I_ion + istim`` in mV/ms (capacitance is
fixed at 1 uF/cm^2 so currents are already normalized).

States whose derivative has the relaxation form ``(x_inf - x) / tau_x``
also write ``tau_x`` (ms) into ``tau``; every other entry is left untouched,
so callers pass a zero-initialized buffer. Forward Euler ignores ``tau``;
the optional Rush-Larsen gate update uses it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class CellModel:
    name: str
    state_names: tuple[str, ...]
    rest_v: float
    rest_state: np.ndarray
    params: np.ndarray
    rhs: Callable = field(repr=False)
    dt0: float
    rest_tolerance: float = 1e-3
    description: str = ""

    def __post_init__(self) -> None:
        if len(self.state_names) < 1:
            raise ValueError(f"{self.name}: a cell model needs at least one state")
        if self.dt0 <= 0.0:
            raise ValueError(f"{self.name}: dt0 must be positive")
        rest = np.asarray(self.rest_state, dtype=np.float64)
        if rest.shape != (len(self.state_names),):
            raise ValueError(
                f"{self.name}: rest_state has shape {rest.shape}, "
                f"expected ({len(self.state_names)},)"
            )
        if not (np.all(np.isfinite(rest)) and np.isfinite(self.rest_v)):
            raise ValueError(f"{self.name}: rest state must be finite")
        object.__setattr__(self, "rest_state", rest)
        object.__setattr__(self, "params", np.asarray(self.params, dtype=np.float64))

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    def with_dt0(self, dt0: float) -> "CellModel":
        return replace(self, dt0=float(dt0))

    def with_rest(self, rest_v: float, rest_state: np.ndarray) -> "CellModel":
        return replace(self, rest_v=float(rest_v), rest_state=np.array(rest_state, dtype=np.float64))

