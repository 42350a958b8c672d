"""MacCannell et al. (2007) active human ventricular fibroblast model.

Time- and voltage-dependent K+ current (I_Kv), inward rectifier (I_K1),
Na+/K+ pump (I_NaK) and background Na+ current (I_bNa). Intracellular
concentrations are held fixed. Currents are in pA/pF, i.e. mV/ms.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .base import CellModel

G_KV = 0.25
G_K1 = 0.4822
G_BNA = 0.0095
I_NAK_MAX = 2.002
K_MK = 1.0
K_MNA = 11.0
V_REV = -150.0

KO = 5.4
KI = 129.4349
NAO = 130.0110
NAI = 8.5547

RTF = 8314.0 * 306.15 / 96485.0
E_K = RTF * math.log(KO / KI)
E_NA = RTF * math.log(NAO / NAI)
_NAK_CONC = KO / (KO + K_MK) * NAI**1.5 / (NAI**1.5 + K_MNA**1.5)


@njit(cache=True, error_model="numpy")
def rhs(v, s, istim, p, ds, tau):
    r = s[0]
    q = s[1]
    r_inf = 1.0 / (1.0 + math.exp(-(v + 20.0) / 11.0))
    tau_r = 20.3 + 138.0 * math.exp(-(((v + 20.0) / 25.9) ** 2))
    s_inf = 1.0 / (1.0 + math.exp((v + 23.0) / 7.0))
    tau_s = 1574.0 + 5268.0 * math.exp(-(((v + 23.0) / 22.7) ** 2))
    ds[0] = (r_inf - r) / tau_r
    ds[1] = (s_inf - q) / tau_s
    tau[0] = tau_r
    tau[1] = tau_s

    i_kv = G_KV * r * r * r * q * (v - E_K)
    dv = v - E_K
    alpha = 0.1 / (1.0 + math.exp(0.06 * (dv - 200.0)))
    beta = (3.0 * math.exp(0.0002 * (dv + 100.0)) + math.exp(0.1 * (dv - 10.0))) / (1.0 + math.exp(-0.5 * dv))
    i_k1 = G_K1 * alpha / (alpha + beta) * dv
    i_nak = I_NAK_MAX * _NAK_CONC * (v + 200.0) / (v - V_REV)
    i_bna = G_BNA * (v - E_NA)
    return -(i_kv + i_k1 + i_nak + i_bna) + istim


INITIAL_V = -49.6
INITIAL_STATE = np.array([0.0, 1.0])


def make_model(rest_v: float | None = None, rest_state: np.ndarray | None = None,
               dt0: float = 1.0) -> CellModel:
    return CellModel(
        name="maccannell_fibroblast",
        state_names=("r_kv", "s_kv"),
        rest_v=INITIAL_V if rest_v is None else rest_v,
        rest_state=INITIAL_STATE.copy() if rest_state is None else rest_state,
        params=np.zeros(1),
        rhs=rhs,
        dt0=dt0,
        rest_tolerance=1e-3,
        description="MacCannell 2007 active fibroblast",
    )
