"""Aliev-Panfilov (1996) two-variable excitable model in physical units.

The dimensionless potential ``u`` maps to ``V = 100 u - 80`` mV and one
model time unit to 12.9 ms.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .base import CellModel

V_REST = -80.0
V_SCALE = 100.0
TIME_SCALE = 12.9

K = 8.0
A = 0.15
EPS0 = 0.002
MU1 = 0.2
MU2 = 0.3


@njit(cache=True, error_model="numpy")
def rhs(v, s, istim, p, ds, tau):
    u = (v - V_REST) / V_SCALE
    w = s[0]
    dudt = -K * u * (u - A) * (u - 1.0) - u * w
    eps = EPS0 + MU1 * w / (u + MU2)
    ds[0] = eps * (-w - K * u * (u - A - 1.0)) / TIME_SCALE
    return V_SCALE * dudt / TIME_SCALE + istim


def make_model(dt0: float = 0.1) -> CellModel:
    return CellModel(
        name="aliev_panfilov",
        state_names=("w",),
        rest_v=V_REST,
        rest_state=np.zeros(1),
        params=np.zeros(1),
        rhs=rhs,
        dt0=dt0,
        rest_tolerance=1e-12,
        description="Aliev-Panfilov two-variable model, V = 100u - 80 mV, 12.9 ms per time unit",
    )
