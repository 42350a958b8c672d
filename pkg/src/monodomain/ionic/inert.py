"""A passive placeholder with no ionic current; reaction only adds the stimulus."""

from __future__ import annotations

import numpy as np
from numba import njit

from .base import CellModel


@njit(cache=True, error_model="numpy")
def rhs(v, s, istim, p, ds, tau):
    ds[0] = 0.0
    return istim


def make_model(rest_v: float = 0.0, dt0: float = 1.0) -> CellModel:
    return CellModel(
        name="inert",
        state_names=("unused",),
        rest_v=rest_v,
        rest_state=np.zeros(1),
        params=np.zeros(1),
        rhs=rhs,
        dt0=dt0,
        rest_tolerance=0.0,
        description="I_ion = 0; isolates the diffusion operator",
    )
