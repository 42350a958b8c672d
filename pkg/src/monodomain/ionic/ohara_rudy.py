"""O'Hara-Rudy (2011) human ventricular action potential model.

Undiseased human ventricle, with the endocardial, epicardial and
midmyocardial variants selected by ``p[0]`` (0 endo, 1 epi, 2 mid). The
equations and constants follow the authors' reference code. Every state,
gates included, is advanced by the caller's explicit integrator; no
exponential gate update is used here.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .base import CellModel

STATE_NAMES = (
    "nai", "nass", "ki", "kss", "cai", "cass", "cansr", "cajsr",
    "m", "hf", "hs", "j", "hsp", "jp", "mL", "hL", "hLp",
    "a", "iF", "iS", "ap", "iFp", "iSp",
    "d", "ff", "fs", "fcaf", "fcas", "jca", "nca", "ffp", "fcafp",
    "xrf", "xrs", "xs1", "xs2", "xk1", "Jrelnp", "Jrelp", "CaMKt",
)

ENDO, EPI, MID = 0, 1, 2

# extracellular concentrations (mM)
NAO = 140.0
CAO = 1.8
KO = 5.4

R = 8314.0
T = 310.0
F = 96485.0
RTF = R * T / F
FRT = F / (R * T)

# cell geometry, reference code uses 3.14 rather than pi
_L = 0.01
_RAD = 0.0011
VCELL = 1000.0 * 3.14 * _RAD * _RAD * _L
AGEO = 2.0 * 3.14 * _RAD * _RAD + 2.0 * 3.14 * _RAD * _L
ACAP = 2.0 * AGEO
VMYO = 0.68 * VCELL
VNSR = 0.0552 * VCELL
VJSR = 0.0048 * VCELL
VSS = 0.02 * VCELL

_SQRT_KO = math.sqrt(KO)
_SQRT_KO_54 = math.sqrt(KO / 5.4)


@njit(cache=True, error_model="numpy", inline="always")
def _x_over_expm1(x):
    if abs(x) < 1e-9:
        return 1.0 - 0.5 * x
    return x / math.expm1(x)


@njit(cache=True, error_model="numpy")
def _naca(na, ca, hna, hca):
    """Normalized Na/Ca exchanger turnover (JncxNa, JncxCa, allosteric term)."""
    kna1 = 15.0
    kna2 = 5.0
    kna3 = 88.12
    kasymm = 12.5
    wna = 6.0e4
    wca = 6.0e4
    wnaca = 5.0e3
    kcaon = 1.5e6
    kcaoff = 5.0e3
    h1 = 1.0 + na / kna3 * (1.0 + hna)
    h2 = (na * hna) / (kna3 * h1)
    h3 = 1.0 / h1
    h4 = 1.0 + na / kna1 * (1.0 + na / kna2)
    h5 = na * na / (h4 * kna1 * kna2)
    h6 = 1.0 / h4
    h7 = 1.0 + NAO / kna3 * (1.0 + 1.0 / hna)
    h8 = NAO / (kna3 * hna * h7)
    h9 = 1.0 / h7
    h10 = kasymm + 1.0 + NAO / kna1 * (1.0 + NAO / kna2)
    h11 = NAO * NAO / (h10 * kna1 * kna2)
    h12 = 1.0 / h10
    k1 = h12 * CAO * kcaon
    k2 = kcaoff
    k3p = h9 * wca
    k3pp = h8 * wnaca
    k3 = k3p + k3pp
    k4p = h3 * wca / hca
    k4pp = h2 * wnaca
    k4 = k4p + k4pp
    k5 = kcaoff
    k6 = h6 * ca * kcaon
    k7 = h5 * h2 * wna
    k8 = h8 * h11 * wna
    x1 = k2 * k4 * (k7 + k6) + k5 * k7 * (k2 + k3)
    x2 = k1 * k7 * (k4 + k5) + k4 * k6 * (k1 + k8)
    x3 = k1 * k3 * (k7 + k6) + k8 * k6 * (k2 + k3)
    x4 = k2 * k8 * (k4 + k5) + k3 * k5 * (k1 + k8)
    xs = x1 + x2 + x3 + x4
    e1 = x1 / xs
    e2 = x2 / xs
    e3 = x3 / xs
    e4 = x4 / xs
    km_ca_act = 150.0e-6
    allo = 1.0 / (1.0 + (km_ca_act / ca) ** 2)
    jncx_na = 3.0 * (e4 * k7 - e1 * k8) + e3 * k4pp - e2 * k3pp
    jncx_ca = e2 * k2 - e1 * k1
    return jncx_na, jncx_ca, allo


@njit(cache=True, error_model="numpy")
def rhs(v, s, istim, p, ds, tau):
    celltype = p[0]
    epi = celltype == 1.0
    mid = celltype == 2.0

    nai = s[0]
    nass = s[1]
    ki = s[2]
    kss = s[3]
    cai = s[4]
    cass = s[5]
    cansr = s[6]
    cajsr = s[7]
    m = s[8]
    hf = s[9]
    hs = s[10]
    j = s[11]
    hsp = s[12]
    jp = s[13]
    mL = s[14]
    hL = s[15]
    hLp = s[16]
    a = s[17]
    iF = s[18]
    iS = s[19]
    ap = s[20]
    iFp = s[21]
    iSp = s[22]
    d = s[23]
    ff = s[24]
    fs = s[25]
    fcaf = s[26]
    fcas = s[27]
    jca = s[28]
    nca = s[29]
    ffp = s[30]
    fcafp = s[31]
    xrf = s[32]
    xrs = s[33]
    xs1 = s[34]
    xs2 = s[35]
    xk1 = s[36]
    Jrelnp = s[37]
    Jrelp = s[38]
    CaMKt = s[39]

    vfrt = v * FRT

    # CaMK
    KmCaMK = 0.15
    aCaMK = 0.05
    bCaMK = 0.00068
    CaMKo = 0.05
    KmCaM = 0.0015
    CaMKb = CaMKo * (1.0 - CaMKt) / (1.0 + KmCaM / cass)
    CaMKa = CaMKb + CaMKt
    dCaMKt = aCaMK * CaMKb * (CaMKb + CaMKt) - bCaMK * CaMKt
    fp_camk = 1.0 / (1.0 + KmCaMK / CaMKa)

    ENa = RTF * math.log(NAO / nai)
    EK = RTF * math.log(KO / ki)
    PKNa = 0.01833
    EKs = RTF * math.log((KO + PKNa * NAO) / (ki + PKNa * nai))

    # INa
    mss = 1.0 / (1.0 + math.exp(-(v + 39.57) / 9.871))
    tm = 1.0 / (6.765 * math.exp((v + 11.64) / 34.77) + 8.552 * math.exp(-(v + 77.42) / 5.955))
    hss = 1.0 / (1.0 + math.exp((v + 82.90) / 6.086))
    thf = 1.0 / (1.432e-5 * math.exp(-(v + 1.196) / 6.285) + 6.149 * math.exp((v + 0.5096) / 20.27))
    ths = 1.0 / (0.009794 * math.exp(-(v + 17.95) / 28.05) + 0.3343 * math.exp((v + 5.730) / 56.66))
    Ahf = 0.99
    Ahs = 1.0 - Ahf
    h = Ahf * hf + Ahs * hs
    jss = hss
    tj = 2.038 + 1.0 / (0.02136 * math.exp(-(v + 100.6) / 8.281) + 0.3052 * math.exp((v + 0.9941) / 38.45))
    hssp = 1.0 / (1.0 + math.exp((v + 89.1) / 6.086))
    thsp = 3.0 * ths
    hp = Ahf * hf + Ahs * hsp
    tjp = 1.46 * tj
    GNa = 75.0
    INa = GNa * (v - ENa) * m * m * m * ((1.0 - fp_camk) * h * j + fp_camk * hp * jp)

    # INaL
    mLss = 1.0 / (1.0 + math.exp(-(v + 42.85) / 5.264))
    tmL = tm
    hLss = 1.0 / (1.0 + math.exp((v + 87.61) / 7.488))
    thL = 200.0
    hLssp = 1.0 / (1.0 + math.exp((v + 93.81) / 7.488))
    thLp = 3.0 * thL
    GNaL = 0.0075
    if epi:
        GNaL *= 0.6
    INaL = GNaL * (v - ENa) * mL * ((1.0 - fp_camk) * hL + fp_camk * hLp)

    # Ito
    ass = 1.0 / (1.0 + math.exp(-(v - 14.34) / 14.82))
    ta = 1.0515 / (
        1.0 / (1.2089 * (1.0 + math.exp(-(v - 18.4099) / 29.3814)))
        + 3.5 / (1.0 + math.exp((v + 100.0) / 29.3814))
    )
    iss = 1.0 / (1.0 + math.exp((v + 43.94) / 5.711))
    if epi:
        delta_epi = 1.0 - 0.95 / (1.0 + math.exp((v + 70.0) / 5.0))
    else:
        delta_epi = 1.0
    tiF = 4.562 + 1.0 / (0.3933 * math.exp(-(v + 100.0) / 100.0) + 0.08004 * math.exp((v + 50.0) / 16.59))
    tiS = 23.62 + 1.0 / (0.001416 * math.exp(-(v + 96.52) / 59.05) + 1.780e-8 * math.exp((v + 114.1) / 8.079))
    tiF *= delta_epi
    tiS *= delta_epi
    AiF = 1.0 / (1.0 + math.exp((v - 213.6) / 151.2))
    AiS = 1.0 - AiF
    i_inact = AiF * iF + AiS * iS
    assp = 1.0 / (1.0 + math.exp(-(v - 24.34) / 14.82))
    dti_develop = 1.354 + 1.0e-4 / (math.exp((v - 167.4) / 15.89) + math.exp(-(v - 12.23) / 0.2154))
    dti_recover = 1.0 - 0.5 / (1.0 + math.exp((v + 70.0) / 20.0))
    tiFp = dti_develop * dti_recover * tiF
    tiSp = dti_develop * dti_recover * tiS
    ip = AiF * iFp + AiS * iSp
    Gto = 0.02
    if epi or mid:
        Gto *= 4.0
    Ito = Gto * (v - EK) * ((1.0 - fp_camk) * a * i_inact + fp_camk * ap * ip)

    # ICaL, ICaNa, ICaK
    dss = 1.0 / (1.0 + math.exp(-(v + 3.940) / 4.230))
    td = 0.6 + 1.0 / (math.exp(-0.05 * (v + 6.0)) + math.exp(0.09 * (v + 14.0)))
    fss = 1.0 / (1.0 + math.exp((v + 19.58) / 3.696))
    tff = 7.0 + 1.0 / (0.0045 * math.exp(-(v + 20.0) / 10.0) + 0.0045 * math.exp((v + 20.0) / 10.0))
    tfs = 1000.0 + 1.0 / (0.000035 * math.exp(-(v + 5.0) / 4.0) + 0.000035 * math.exp((v + 5.0) / 6.0))
    Aff = 0.6
    Afs = 1.0 - Aff
    f = Aff * ff + Afs * fs
    fcass = fss
    tfcaf = 7.0 + 1.0 / (0.04 * math.exp(-(v - 4.0) / 7.0) + 0.04 * math.exp((v - 4.0) / 7.0))
    tfcas = 100.0 + 1.0 / (0.00012 * math.exp(-v / 3.0) + 0.00012 * math.exp(v / 7.0))
    Afcaf = 0.3 + 0.6 / (1.0 + math.exp((v - 10.0) / 10.0))
    Afcas = 1.0 - Afcaf
    fca = Afcaf * fcaf + Afcas * fcas
    tjca = 75.0
    tffp = 2.5 * tff
    fp = Aff * ffp + Afs * fs
    tfcafp = 2.5 * tfcaf
    fcap = Afcaf * fcafp + Afcas * fcas
    Kmn = 0.002
    k2n = 1000.0
    km2n = jca * 1.0
    anca = 1.0 / (k2n / km2n + (1.0 + Kmn / cass) ** 4)
    dnca = anca * k2n - nca * km2n

    e1 = math.exp(vfrt)
    e2 = e1 * e1
    g1 = F * _x_over_expm1(vfrt)
    g2 = 2.0 * F * _x_over_expm1(2.0 * vfrt)
    PhiCaL = g2 * (cass * e2 - 0.341 * CAO)
    PhiCaNa = g1 * (0.75 * nass * e1 - 0.75 * NAO)
    PhiCaK = g1 * (0.75 * kss * e1 - 0.75 * KO)
    PCa = 0.0001
    if epi:
        PCa *= 1.2
    elif mid:
        PCa *= 2.5
    PCap = 1.1 * PCa
    PCaNa = 0.00125 * PCa
    PCaK = 3.574e-4 * PCa
    PCaNap = 0.00125 * PCap
    PCaKp = 3.574e-4 * PCap
    gate_np = d * (f * (1.0 - nca) + jca * fca * nca)
    gate_p = d * (fp * (1.0 - nca) + jca * fcap * nca)
    ICaL = (1.0 - fp_camk) * PCa * PhiCaL * gate_np + fp_camk * PCap * PhiCaL * gate_p
    ICaNa = (1.0 - fp_camk) * PCaNa * PhiCaNa * gate_np + fp_camk * PCaNap * PhiCaNa * gate_p
    ICaK = (1.0 - fp_camk) * PCaK * PhiCaK * gate_np + fp_camk * PCaKp * PhiCaK * gate_p

    # IKr
    xrss = 1.0 / (1.0 + math.exp(-(v + 8.337) / 6.789))
    txrf = 12.98 + 1.0 / (0.3652 * math.exp((v - 31.66) / 3.869) + 4.123e-5 * math.exp(-(v - 47.78) / 20.38))
    txrs = 1.865 + 1.0 / (0.06629 * math.exp((v - 34.70) / 7.355) + 1.128e-5 * math.exp(-(v - 29.74) / 25.94))
    Axrf = 1.0 / (1.0 + math.exp((v + 54.81) / 38.21))
    Axrs = 1.0 - Axrf
    xr = Axrf * xrf + Axrs * xrs
    rkr = 1.0 / (1.0 + math.exp((v + 55.0) / 75.0)) * 1.0 / (1.0 + math.exp((v - 10.0) / 30.0))
    GKr = 0.046
    if epi:
        GKr *= 1.3
    elif mid:
        GKr *= 0.8
    IKr = GKr * _SQRT_KO_54 * xr * rkr * (v - EK)

    # IKs
    xs1ss = 1.0 / (1.0 + math.exp(-(v + 11.60) / 8.932))
    txs1 = 817.3 + 1.0 / (2.326e-4 * math.exp((v + 48.28) / 17.80) + 0.001292 * math.exp(-(v + 210.0) / 230.0))
    xs2ss = xs1ss
    txs2 = 1.0 / (0.01 * math.exp((v - 50.0) / 20.0) + 0.0193 * math.exp(-(v + 66.54) / 31.0))
    KsCa = 1.0 + 0.6 / (1.0 + (3.8e-5 / cai) ** 1.4)
    GKs = 0.0034
    if epi:
        GKs *= 1.4
    IKs = GKs * KsCa * xs1 * xs2 * (v - EKs)

    # IK1
    xk1ss = 1.0 / (1.0 + math.exp(-(v + 2.5538 * KO + 144.59) / (1.5692 * KO + 3.8115)))
    txk1 = 122.2 / (math.exp(-(v + 127.2) / 20.36) + math.exp((v + 236.8) / 69.33))
    rk1 = 1.0 / (1.0 + math.exp((v + 105.8 - 2.6 * KO) / 9.493))
    GK1 = 0.1908
    if epi:
        GK1 *= 1.2
    elif mid:
        GK1 *= 1.3
    IK1 = GK1 * _SQRT_KO * rk1 * xk1 * (v - EK)

    # INaCa
    hca = math.exp(0.1670 * vfrt)
    hna = math.exp(0.5224 * vfrt)
    Gncx = 0.0008
    if epi:
        Gncx *= 1.1
    elif mid:
        Gncx *= 1.4
    jna_i, jca_i, allo_i = _naca(nai, cai, hna, hca)
    INaCa_i = 0.8 * Gncx * allo_i * (jna_i + 2.0 * jca_i)
    jna_ss, jca_ss, allo_ss = _naca(nass, cass, hna, hca)
    INaCa_ss = 0.2 * Gncx * allo_ss * (jna_ss + 2.0 * jca_ss)

    # INaK
    k1p = 949.5
    k1m = 182.4
    k2p = 687.2
    k2m = 39.4
    k3p = 1899.0
    k3m = 79300.0
    k4p = 639.0
    k4m = 40.0
    Knai0 = 9.073
    Knao0 = 27.78
    delta = -0.1550
    Knai = Knai0 * math.exp(delta * vfrt / 3.0)
    Knao = Knao0 * math.exp((1.0 - delta) * vfrt / 3.0)
    Kki = 0.5
    Kko = 0.3582
    MgADP = 0.05
    MgATP = 9.8
    Kmgatp = 1.698e-7
    H = 1.0e-7
    eP = 4.2
    Khp = 1.698e-7
    Knap = 224.0
    Kxkur = 292.0
    P = eP / (1.0 + H / Khp + nai / Knap + ki / Kxkur)
    ri = nai / Knai
    ro = NAO / Knao
    denom_i = (1.0 + ri) ** 3 + (1.0 + ki / Kki) ** 2 - 1.0
    denom_o = (1.0 + ro) ** 3 + (1.0 + KO / Kko) ** 2 - 1.0
    a1 = k1p * ri * ri * ri / denom_i
    b1 = k1m * MgADP
    a2 = k2p
    b2 = k2m * ro * ro * ro / denom_o
    a3 = k3p * (KO / Kko) ** 2 / denom_o
    b3 = k3m * P * H / (1.0 + MgATP / Kmgatp)
    a4 = k4p * MgATP / Kmgatp / (1.0 + MgATP / Kmgatp)
    b4 = k4m * (ki / Kki) ** 2 / denom_i
    x1 = a4 * a1 * a2 + b2 * b4 * b3 + a2 * b4 * b3 + b3 * a1 * a2
    x2 = b2 * b1 * b4 + a1 * a2 * a3 + a3 * b1 * b4 + a2 * a3 * b4
    x3 = a2 * a3 * a4 + b3 * b2 * b1 + b2 * b1 * a4 + a3 * a4 * b1
    x4 = b4 * b3 * b2 + a3 * a4 * a1 + b2 * a4 * a1 + b3 * b2 * a1
    xsum = x1 + x2 + x3 + x4
    E1 = x1 / xsum
    E2 = x2 / xsum
    E3 = x3 / xsum
    E4 = x4 / xsum
    JnakNa = 3.0 * (E1 * a3 - E2 * b3)
    JnakK = 2.0 * (E4 * b1 - E3 * a1)
    Pnak = 30.0
    if epi:
        Pnak *= 0.9
    elif mid:
        Pnak *= 0.7
    INaK = Pnak * (JnakNa + JnakK)

    # background currents
    xkb = 1.0 / (1.0 + math.exp(-(v - 14.48) / 18.34))
    GKb = 0.003
    if epi:
        GKb *= 0.6
    IKb = GKb * xkb * (v - EK)
    PNab = 3.75e-10
    INab = PNab * g1 * (nai * e1 - NAO)
    PCab = 2.5e-8
    ICab = PCab * g2 * (cai * e2 - 0.341 * CAO)
    GpCa = 0.0005
    IpCa = GpCa * cai / (0.0005 + cai)

    # diffusion fluxes
    JdiffNa = (nass - nai) / 2.0
    JdiffK = (kss - ki) / 2.0
    Jdiff = (cass - cai) / 0.2

    # SR release
    bt = 4.75
    a_rel = 0.5 * bt
    ca_drive = 1.0 + (1.5 / cajsr) ** 8
    Jrel_inf = a_rel * (-ICaL) / ca_drive
    if mid:
        Jrel_inf *= 1.7
    tau_rel = bt / (1.0 + 0.0123 / cajsr)
    if tau_rel < 0.001:
        tau_rel = 0.001
    btp = 1.25 * bt
    a_relp = 0.5 * btp
    Jrel_infp = a_relp * (-ICaL) / ca_drive
    if mid:
        Jrel_infp *= 1.7
    tau_relp = btp / (1.0 + 0.0123 / cajsr)
    if tau_relp < 0.001:
        tau_relp = 0.001
    Jrel = (1.0 - fp_camk) * Jrelnp + fp_camk * Jrelp

    # SERCA uptake
    Jupnp = 0.004375 * cai / (cai + 0.00092)
    Jupp = 2.75 * 0.004375 * cai / (cai + 0.00092 - 0.00017)
    if epi:
        Jupnp *= 1.3
        Jupp *= 1.3
    Jleak = 0.0039375 * cansr / 15.0
    Jup = (1.0 - fp_camk) * Jupnp + fp_camk * Jupp - Jleak
    Jtr = (cansr - cajsr) / 100.0

    # buffers
    cmdnmax = 0.05
    if epi:
        cmdnmax *= 1.3
    kmcmdn = 0.00238
    trpnmax = 0.07
    kmtrpn = 0.0005
    BSRmax = 0.047
    KmBSR = 0.00087
    BSLmax = 1.124
    KmBSL = 0.0087
    csqnmax = 10.0
    kmcsqn = 0.8
    Bcai = 1.0 / (1.0 + cmdnmax * kmcmdn / (kmcmdn + cai) ** 2 + trpnmax * kmtrpn / (kmtrpn + cai) ** 2)
    Bcass = 1.0 / (1.0 + BSRmax * KmBSR / (KmBSR + cass) ** 2 + BSLmax * KmBSL / (KmBSL + cass) ** 2)
    Bcajsr = 1.0 / (1.0 + csqnmax * kmcsqn / (kmcsqn + cajsr) ** 2)

    Ist = -istim
    ds[0] = -(INa + INaL + 3.0 * INaCa_i + 3.0 * INaK + INab) * ACAP / (F * VMYO) + JdiffNa * VSS / VMYO
    ds[1] = -(ICaNa + 3.0 * INaCa_ss) * ACAP / (F * VSS) - JdiffNa
    ds[2] = -(Ito + IKr + IKs + IK1 + IKb + Ist - 2.0 * INaK) * ACAP / (F * VMYO) + JdiffK * VSS / VMYO
    ds[3] = -ICaK * ACAP / (F * VSS) - JdiffK
    ds[4] = Bcai * (-(IpCa + ICab - 2.0 * INaCa_i) * ACAP / (2.0 * F * VMYO) - Jup * VNSR / VMYO + Jdiff * VSS / VMYO)
    ds[5] = Bcass * (-(ICaL - 2.0 * INaCa_ss) * ACAP / (2.0 * F * VSS) + Jrel * VJSR / VSS - Jdiff)
    ds[6] = Jup - Jtr * VJSR / VNSR
    ds[7] = Bcajsr * (Jtr - Jrel)
    ds[8] = (mss - m) / tm
    tau[8] = tm
    ds[9] = (hss - hf) / thf
    tau[9] = thf
    ds[10] = (hss - hs) / ths
    tau[10] = ths
    ds[11] = (jss - j) / tj
    tau[11] = tj
    ds[12] = (hssp - hsp) / thsp
    tau[12] = thsp
    ds[13] = (jss - jp) / tjp
    tau[13] = tjp
    ds[14] = (mLss - mL) / tmL
    tau[14] = tmL
    ds[15] = (hLss - hL) / thL
    tau[15] = thL
    ds[16] = (hLssp - hLp) / thLp
    tau[16] = thLp
    ds[17] = (ass - a) / ta
    tau[17] = ta
    ds[18] = (iss - iF) / tiF
    tau[18] = tiF
    ds[19] = (iss - iS) / tiS
    tau[19] = tiS
    ds[20] = (assp - ap) / ta
    tau[20] = ta
    ds[21] = (iss - iFp) / tiFp
    tau[21] = tiFp
    ds[22] = (iss - iSp) / tiSp
    tau[22] = tiSp
    ds[23] = (dss - d) / td
    tau[23] = td
    ds[24] = (fss - ff) / tff
    tau[24] = tff
    ds[25] = (fss - fs) / tfs
    tau[25] = tfs
    ds[26] = (fcass - fcaf) / tfcaf
    tau[26] = tfcaf
    ds[27] = (fcass - fcas) / tfcas
    tau[27] = tfcas
    ds[28] = (fcass - jca) / tjca
    tau[28] = tjca
    ds[29] = dnca
    ds[30] = (fss - ffp) / tffp
    tau[30] = tffp
    ds[31] = (fcass - fcafp) / tfcafp
    tau[31] = tfcafp
    ds[32] = (xrss - xrf) / txrf
    tau[32] = txrf
    ds[33] = (xrss - xrs) / txrs
    tau[33] = txrs
    ds[34] = (xs1ss - xs1) / txs1
    tau[34] = txs1
    ds[35] = (xs2ss - xs2) / txs2
    tau[35] = txs2
    ds[36] = (xk1ss - xk1) / txk1
    tau[36] = txk1
    ds[37] = (Jrel_inf - Jrelnp) / tau_rel
    tau[37] = tau_rel
    ds[38] = (Jrel_infp - Jrelp) / tau_relp
    tau[38] = tau_relp
    ds[39] = dCaMKt

    Iion = (
        INa + INaL + Ito + ICaL + ICaNa + ICaK + IKr + IKs + IK1
        + INaCa_i + INaCa_ss + INaK + INab + IKb + IpCa + ICab
    )
    return -Iion + istim


# initial conditions of the reference code, used before pacing
INITIAL_V = -87.0
INITIAL_STATE = np.array([
    7.0, 7.0, 145.0, 145.0, 1.0e-4, 1.0e-4, 1.2, 1.2,
    0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0,
    0.0, 1.0, 1.0, 0.0, 1.0, 1.0,
    0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0,
    0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
])

VARIANTS = {"endo": ENDO, "epi": EPI, "mid": MID}


def make_model(variant: str = "epi", rest_v: float | None = None,
               rest_state: np.ndarray | None = None, dt0: float = 0.01) -> CellModel:
    if variant not in VARIANTS:
        raise ValueError(f"unknown O'Hara-Rudy variant {variant!r}; expected one of {sorted(VARIANTS)}")
    return CellModel(
        name=f"ohara_rudy_{variant}",
        state_names=STATE_NAMES,
        rest_v=INITIAL_V if rest_v is None else rest_v,
        rest_state=INITIAL_STATE.copy() if rest_state is None else rest_state,
        params=np.array([float(VARIANTS[variant])]),
        rhs=rhs,
        dt0=dt0,
        rest_tolerance=1e-3,
        description=f"O'Hara-Rudy 2011 human ventricular, {variant}cardial",
    )
