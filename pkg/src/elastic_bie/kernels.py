"""Elastodynamic layer-potential kernels and their singularity splits.

Displacement field of a time-harmonic point force in 2D (wavenumbers
k_p = omega sqrt(rho/(lam + 2 mu)), k_s = omega sqrt(rho/mu), r = x - y):

    G(x, y) = (i/(4 mu)) { H_0(k_s r) I
              + (1/k_s^2) (k_s^2 H_2(k_s r) - k_p^2 H_2(k_p r)) rr^T/r^2
              + (1/k_s^2) (-k_s H_1(k_s r) + k_p H_1(k_p r)) I / r }.

Applying the traction operator T = 2 mu d/dn + lam n div - mu tau curl in the
source point gives, with eta = lam/(lam + 2 mu),

    T_y G = (i/4) { k_s H_1(k_s r)/r L1 + eta k_p H_1(k_p r)/r L2
            + (2/k_s^2) [ (k_s^3 H_3(k_s r) - k_p^3 H_3(k_p r))/r^3 L3
                          - (k_s^2 H_2(k_s r) - k_p^2 H_2(k_p r))/r^2 L4 ] },

    L1 = 2 (n.r) I - tau (x) r_perp,   L2 = n (x) r,
    L3 = (n.r) r (x) r,                L4 = (n.r) I + n (x) r + r (x) n,

with n = n(y), tau = tau(y), r_perp = (-r_2, r_1).  The double-layer kernel
is D = (T_y G)^T; its adjoint Sigma = T_x G is minus the same expression
with the frame taken at the target.  Each kernel splits into

    K = static + ln(r) F + R,

where the static part is the corresponding Kelvin (zero-frequency) kernel,
F is an entire Bessel-J combination, and R is analytic with R -> 0 on the
diagonal for the traction kernels.  For quadrature the split is recast in
the source panel's chart coordinate, K = ln|dhat| K1 + K2/dhat + K3, where
K2 captures exactly the Cauchy term  -+ (mu/(lam+2mu)) (tau.r)/(2 pi r^2) L
of the static kernel and K3 is smooth.

Below ``Z_SMALL`` = 0.1 in z = k_s r, Hankel evaluations are replaced by
pole-removed ascending series (module ``special``), which keeps every split
piece finite and cancellation-free down to r = 0 (the diagonal values drop
out automatically).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special as sps

from . import special as sf

Z_SMALL = 0.1

_I2 = np.eye(2)
_LROT = np.array([[0.0, 1.0], [-1.0, 0.0]])  # L = n (x) tau - tau (x) n


@dataclass(frozen=True)
class ElasticParams:
    """Lame moduli, density, and angular frequency of the ambient solid."""

    lam: float = 1.0
    mu: float = 2.0
    rho: float = 1.0
    omega: float = 3.0

    @property
    def kp(self) -> float:
        return self.omega * math.sqrt(self.rho / (self.lam + 2.0 * self.mu))

    @property
    def ks(self) -> float:
        return self.omega * math.sqrt(self.rho / self.mu)

    @property
    def xi(self) -> float:
        return self.lam / (2.0 * (self.lam + self.mu))

    @property
    def eta(self) -> float:
        return self.lam / (self.lam + 2.0 * self.mu)

    @property
    def big_xi(self) -> float:
        """(lam + mu)/(lam + 2 mu) = (k_s^2 - k_p^2)/k_s^2."""
        return (self.lam + self.mu) / (self.lam + 2.0 * self.mu)

    @property
    def mu_frac(self) -> float:
        return self.mu / (self.lam + 2.0 * self.mu)


# ----------------------------------------------------------------------------
# pair data: stable geometric primitives for one target vs. source nodes
# ----------------------------------------------------------------------------

@dataclass
class PairData:
    """Geometric quantities for kernel evaluation, all cancellation-free.

    Shapes are (m, ...) over source nodes.  ``nu_*`` = n.r / r^2 and
    ``q2_*`` = dhat (tau.r)/r^2 stay finite on the diagonal; ``lnratio`` =
    ln(r / |dhat|) is the smooth mismatch between geometric and chart
    distance used by the ln-split.
    """

    rvec: np.ndarray
    r2: np.ndarray
    r: np.ndarray
    M: np.ndarray                 # r (x) r / r^2 (tangent dyad on the diagonal)
    n_y: np.ndarray
    tau_y: np.ndarray
    nr_y: np.ndarray              # n(y) . r
    nu_y: np.ndarray              # n(y) . r / r^2
    n_x: np.ndarray
    tau_x: np.ndarray
    nr_x: np.ndarray
    nu_x: np.ndarray
    delta_hat: np.ndarray = None  # chart distance target-to-node
    q2_y: np.ndarray = None       # dhat * (tau_y . r)/r^2
    q2_x: np.ndarray = None
    lnratio: np.ndarray = None
    tr_y: np.ndarray = None       # tau(y) . r
    tr_x: np.ndarray = None


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _lmats(pd: PairData, frame: str):
    """L1..L4 and companions for the y- or x-frame."""
    if frame == "y":
        n, tau, nr = pd.n_y, pd.tau_y, pd.nr_y
    else:
        n, tau, nr = pd.n_x, pd.tau_x, pd.nr_x
    rvec = pd.rvec
    rperp = np.stack([-rvec[..., 1], rvec[..., 0]], axis=-1)
    nrI = nr[..., None, None] * _I2
    L1 = 2.0 * nrI - _outer(tau, rperp)
    L2 = _outer(n, rvec)
    rr = _outer(rvec, rvec)
    L3 = nr[..., None, None] * rr
    L4 = nrI + L2 + _outer(rvec, n)
    return L1, L2, L3, L4


def _combine_t(p: ElasticParams, a_s, a_p, b3, c4, L1, L2, L3, L4, extraM=None, M=None, nr=None):
    """(i/4)[a_s L1 + eta a_p L2 + (2/ks^2)(b3 L3 + i extraM (n.r) M - c4 L4)]."""
    ks2 = p.ks ** 2
    a_s, a_p, b3, c4 = (np.asarray(v) for v in (a_s, a_p, b3, c4))
    core = (a_s[..., None, None] * L1
            + p.eta * a_p[..., None, None] * L2
            + (2.0 / ks2) * (b3[..., None, None] * L3 - c4[..., None, None] * L4))
    if extraM is not None:
        core = core + (2.0 / ks2) * np.asarray(1j * extraM * nr)[..., None, None] * M
    return 0.25j * core


def _static_t(p: ElasticParams, nu, q_anti, M):
    """Kelvin traction kernel via stable ratios.

    q_anti is (tau.r)/(2 pi r^2) scaled by mu/(lam+2mu); returns
    (nu/2pi)(1-Xi) I + (Xi nu/pi) M - q_anti L.
    """
    Xi = p.big_xi
    return ((nu * (1.0 - Xi) / (2.0 * math.pi))[..., None, None] * _I2
            + (nu * (Xi / math.pi))[..., None, None] * M
            - q_anti[..., None, None] * _LROT)


# ----------------------------------------------------------------------------
# scalar coefficient families
# ----------------------------------------------------------------------------

def _hankel_chain(z):
    h0 = sps.hankel1(0, z)
    h1 = sps.hankel1(1, z)
    h2 = 2.0 * h1 / z - h0
    h3 = 4.0 * h2 / z - h1
    return h0, h1, h2, h3


def _t_scalars_direct(p: ElasticParams, r):
    zs = p.ks * r
    zp = p.kp * r
    _, h1s, h2s, h3s = _hankel_chain(zs)
    _, h1p, h2p, h3p = _hankel_chain(zp)
    ha_s = p.ks * h1s / r
    ha_p = p.kp * h1p / r
    hb = (p.ks ** 3 * h3s - p.kp ** 3 * h3p) / r ** 3
    hc = (p.ks ** 2 * h2s - p.kp ** 2 * h2p) / r ** 2
    return ha_s, ha_p, hb, hc


def _t_scalars_f_direct(p: ElasticParams, r):
    zs = p.ks * r
    zp = p.kp * r
    fa_s = p.ks * sps.jv(1, zs) / r
    fa_p = p.kp * sps.jv(1, zp) / r
    fb = (p.ks ** 3 * sps.jv(3, zs) - p.kp ** 3 * sps.jv(3, zp)) / r ** 3
    fc = (p.ks ** 2 * sps.jv(2, zs) - p.kp ** 2 * sps.jv(2, zp)) / r ** 2
    return fa_s, fa_p, fb, fc


def _t_scalars_series(p: ElasticParams, r):
    """Smooth scalar families below Z_SMALL, finite at r = 0.

    Returns F-parts (fa_s, fa_p, fb, fc) and remainder parts
    (aS, aP, bA, bB, c): the remainder tensor is
    (i/4)[aS L1 + eta aP L2 + (2/ks^2)(bA L3 + i bB (n.r) M - c L4)].
    """
    ks, kp = p.ks, p.kp
    zs = ks * r
    zp = kp * r
    cs = 1.0 + 2.0j * math.log(0.5 * ks) / math.pi
    cp = 1.0 + 2.0j * math.log(0.5 * kp) / math.pi
    j1s, j1p = sf.jn_scaled(1, zs), sf.jn_scaled(1, zp)
    j2s, j2p = sf.jn_scaled(2, zs), sf.jn_scaled(2, zp)
    j3s, j3p = sf.jn_scaled(3, zs), sf.jn_scaled(3, zp)
    fa_s = ks ** 2 * j1s
    fa_p = kp ** 2 * j1p
    fb = ks ** 6 * j3s - kp ** 6 * j3p
    fc = ks ** 4 * j2s - kp ** 4 * j2p
    aS = ks ** 2 * (j1s * cs + 1j * sf.q1_reg_over_z(zs))
    aP = kp ** 2 * (j1p * cp + 1j * sf.q1_reg_over_z(zp))
    bA = ks ** 6 * j3s * cs - kp ** 6 * j3p * cp
    bB = ks ** 4 * sf.q3_reg_over_z(zs) - kp ** 4 * sf.q3_reg_over_z(zp)
    c = (ks ** 4 * (j2s * cs + 1j * sf.q2_reg_over_z2(zs))
         - kp ** 4 * (j2p * cp + 1j * sf.q2_reg_over_z2(zp)))
    return (fa_s, fa_p, fb, fc), (aS, aP, bA, bB, c)


def _g_scalars_direct(p: ElasticParams, r):
    zs = p.ks * r
    zp = p.kp * r
    h0s, h1s, h2s, _ = _hankel_chain(zs)
    _, h1p, h2p, _ = _hankel_chain(zp)
    A = h0s + (-p.ks * h1s + p.kp * h1p) / (p.ks ** 2 * r)
    B = (p.ks ** 2 * h2s - p.kp ** 2 * h2p) / p.ks ** 2
    return A, B


def _g_scalars_series(p: ElasticParams, r):
    """(A_J, Y_A, B_J, Y_B): G = (i/4mu)[(A_J + i((2/pi) ln r A_J ...)) ...].

    A = A_J (1 + i (2/pi) ln r) + i Y_A and likewise for B, so that
    F_G = -(1/(2 pi mu)) (A_J I + B_J M) and
    R_G = (i/(4 mu)) [(A_J + i Y_A) I + (B_J + i Y_B) M].
    """
    ks, kp = p.ks, p.kp
    zs, zp = ks * r, kp * r
    twopi = 2.0 / math.pi
    lks, lkp = math.log(0.5 * ks), math.log(0.5 * kp)
    j0s = sf.jn_scaled(0, zs)
    j1s, j1p = sf.jn_scaled(1, zs), sf.jn_scaled(1, zp)
    j2s, j2p = sf.jn_scaled(2, zs), sf.jn_scaled(2, zp)
    A_J = j0s + (kp ** 2 * j1p - ks ** 2 * j1s) / ks ** 2
    Y_A = (twopi * lks * j0s + sf.q0(zs)
           + (twopi * (kp ** 2 * lkp * j1p - ks ** 2 * lks * j1s)
              + (kp ** 2 * sf.q1_reg_over_z(zp) - ks ** 2 * sf.q1_reg_over_z(zs)))
           / ks ** 2)
    r2 = r * r
    B_J = r2 * (ks ** 4 * j2s - kp ** 4 * j2p) / ks ** 2
    Y_B = (twopi * r2 * (ks ** 4 * lks * j2s - kp ** 4 * lkp * j2p)
           + r2 * (ks ** 4 * sf.q2_reg_over_z2(zs) - kp ** 4 * sf.q2_reg_over_z2(zp))
           - (ks ** 2 - kp ** 2) / math.pi) / ks ** 2
    return A_J, Y_A, B_J, Y_B


# ----------------------------------------------------------------------------
# point-kernel API (x, y given as coordinates; no chart information)
# ----------------------------------------------------------------------------

def _point_pairdata(x, y, n_y=None, tau_y=None, n_x=None, tau_x=None):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rvec = x - y
    r2 = np.einsum("...i,...i->...", rvec, rvec)
    if np.any(r2 == 0.0):
        raise ValueError("coincident source and target")
    r = np.sqrt(r2)
    M = _outer(rvec, rvec) / r2[..., None, None]
    z = np.zeros_like(r2)
    zv = np.zeros(r2.shape + (2,))
    pd = PairData(rvec=rvec, r2=r2, r=r, M=M,
                  n_y=n_y if n_y is not None else zv,
                  tau_y=tau_y if tau_y is not None else zv,
                  nr_y=z, nu_y=z, n_x=n_x if n_x is not None else zv,
                  tau_x=tau_x if tau_x is not None else zv, nr_x=z, nu_x=z)
    if n_y is not None:
        pd.nr_y = np.einsum("...i,...i->...", np.broadcast_to(n_y, rvec.shape), rvec)
        pd.nu_y = pd.nr_y / r2
        pd.tr_y = np.einsum("...i,...i->...", np.broadcast_to(tau_y, rvec.shape), rvec)
    if n_x is not None:
        pd.nr_x = np.einsum("...i,...i->...", np.broadcast_to(n_x, rvec.shape), rvec)
        pd.nu_x = pd.nr_x / r2
        pd.tr_x = np.einsum("...i,...i->...", np.broadcast_to(tau_x, rvec.shape), rvec)
    return pd


def greens_tensor(pd: PairData, p: ElasticParams):
    """G on arbitrary (separated or near) pairs, series branch below Z_SMALL."""
    r = pd.r
    out = np.empty(r.shape + (2, 2), dtype=complex)
    ser = p.ks * r < Z_SMALL
    dire = ~ser
    if np.any(dire):
        A, B = _g_scalars_direct(p, r[dire])
        out[dire] = (0.25j / p.mu) * (A[..., None, None] * _I2
                                      + B[..., None, None] * pd.M[dire])
    if np.any(ser):
        rs = r[ser]
        A_J, Y_A, B_J, Y_B = _g_scalars_series(p, rs)
        lnr = np.log(rs)
        A = A_J * (1.0 + 2.0j * lnr / math.pi) + 1.0j * Y_A
        B = B_J * (1.0 + 2.0j * lnr / math.pi) + 1.0j * Y_B
        out[ser] = (0.25j / p.mu) * (A[..., None, None] * _I2
                                     + B[..., None, None] * pd.M[ser])
    return out


def traction_tensor(pd: PairData, p: ElasticParams, frame: str):
    """T_y G (frame='y') or T_x G (frame='x') with automatic branching."""
    sign = 1.0 if frame == "y" else -1.0
    nu = pd.nu_y if frame == "y" else pd.nu_x
    tr = pd.tr_y if frame == "y" else pd.tr_x
    nr = pd.nr_y if frame == "y" else pd.nr_x
    r = pd.r
    out = np.empty(r.shape + (2, 2), dtype=complex)
    ser = p.ks * r < Z_SMALL
    dire = ~ser
    L1, L2, L3, L4 = _lmats(pd, frame)
    if np.any(dire):
        ha_s, ha_p, hb, hc = _t_scalars_direct(p, r[dire])
        out[dire] = sign * _combine_t(p, ha_s, ha_p, hb, hc,
                                      L1[dire], L2[dire], L3[dire], L4[dire])
    if np.any(ser):
        rs = r[ser]
        (fa_s, fa_p, fb, fc), (aS, aP, bA, bB, c) = _t_scalars_series(p, rs)
        lnr = np.log(rs)
        stat = _static_t(p, nu[ser], p.mu_frac * tr[ser] / (2.0 * math.pi * pd.r2[ser]),
                         pd.M[ser])
        F = -(1.0 / (2.0 * math.pi)) * (
            fa_s[..., None, None] * L1[ser] + p.eta * fa_p[..., None, None] * L2[ser]
            + (2.0 / p.ks ** 2) * (fb[..., None, None] * L3[ser]
                                   - fc[..., None, None] * L4[ser]))
        R = _combine_t(p, aS, aP, bA, c, L1[ser], L2[ser], L3[ser], L4[ser],
                       extraM=bB, M=pd.M[ser], nr=nr[ser])
        out[ser] = sign * (stat + lnr[..., None, None] * F + R)
    return out


def green_G(x, y, p: ElasticParams):
    """Displacement Green's tensor G(x, y), shape (..., 2, 2)."""
    return greens_tensor(_point_pairdata(x, y), p)


def lame_E(x, y, p: ElasticParams):
    """Static (Kelvin) fundamental solution E(x, y)."""
    pd = _point_pairdata(x, y)
    pref = (p.lam + 3.0 * p.mu) / (4.0 * math.pi * p.mu * (p.lam + 2.0 * p.mu))
    frac = (p.lam + p.mu) / (p.lam + 3.0 * p.mu)
    lnr = 0.5 * np.log(pd.r2)
    return pref * (-lnr[..., None, None] * _I2 + frac * pd.M)


def traction_Ty_E(x, y, n_y, tau_y, p: ElasticParams):
    """Source-traction of the Kelvin tensor, T_y E."""
    pd = _point_pairdata(x, y, n_y=n_y, tau_y=tau_y)
    return _static_t(p, pd.nu_y, p.mu_frac * pd.tr_y / (2.0 * math.pi * pd.r2), pd.M)


def traction_Tx_E(x, y, n_x, tau_x, p: ElasticParams):
    """Target-traction of the Kelvin tensor, T_x E = -T_y E with the x-frame."""
    pd = _point_pairdata(x, y, n_x=n_x, tau_x=tau_x)
    return -_static_t(p, pd.nu_x, p.mu_frac * pd.tr_x / (2.0 * math.pi * pd.r2), pd.M)


def split_G(x, y, p: ElasticParams):
    """(F, R) with G = ln(r) F + R on separated pairs."""
    pd = _point_pairdata(x, y)
    return _split_g_tensors(pd, p)


def _split_g_tensors(pd, p):
    r = pd.r
    F = np.empty(r.shape + (2, 2))
    R = np.empty(r.shape + (2, 2), dtype=complex)
    ser = p.ks * r < Z_SMALL
    dire = ~ser
    if np.any(ser):
        A_J, Y_A, B_J, Y_B = _g_scalars_series(p, r[ser])
        F[ser] = -(1.0 / (2.0 * math.pi * p.mu)) * (
            A_J[..., None, None] * _I2 + B_J[..., None, None] * pd.M[ser])
        R[ser] = (0.25j / p.mu) * ((A_J + 1.0j * Y_A)[..., None, None] * _I2
                                   + (B_J + 1.0j * Y_B)[..., None, None] * pd.M[ser])
    if np.any(dire):
        zs = p.ks * r[dire]
        zp = p.kp * r[dire]
        A_J = (sps.jv(0, zs)
               + (-p.ks * sps.jv(1, zs) + p.kp * sps.jv(1, zp)) / (p.ks ** 2 * r[dire]))
        B_J = (p.ks ** 2 * sps.jv(2, zs) - p.kp ** 2 * sps.jv(2, zp)) / p.ks ** 2
        F[dire] = -(1.0 / (2.0 * math.pi * p.mu)) * (
            A_J[..., None, None] * _I2 + B_J[..., None, None] * pd.M[dire])
        A, B = _g_scalars_direct(p, r[dire])
        lnr = np.log(r[dire])[..., None, None]
        Gd = (0.25j / p.mu) * (A[..., None, None] * _I2 + B[..., None, None] * pd.M[dire])
        R[dire] = Gd - lnr * F[dire]
    return F, R


def split_D(x, y, n_y, tau_y, p: ElasticParams):
    """(static, F, R) with D = (T_y G)^T = static + ln(r) F + R."""
    pd = _point_pairdata(x, y, n_y=n_y, tau_y=tau_y)
    stat = _static_t(p, pd.nu_y, p.mu_frac * pd.tr_y / (2.0 * math.pi * pd.r2), pd.M)
    F, R = _split_t_tensors(pd, p, "y")
    sw = lambda a: np.swapaxes(a, -1, -2)
    return sw(stat), sw(F), sw(R)


def split_Sigma(x, y, n_x, tau_x, p: ElasticParams):
    """(static, F, R) with Sigma = T_x G = static + ln(r) F + R."""
    pd = _point_pairdata(x, y, n_x=n_x, tau_x=tau_x)
    stat = -_static_t(p, pd.nu_x, p.mu_frac * pd.tr_x / (2.0 * math.pi * pd.r2), pd.M)
    F, R = _split_t_tensors(pd, p, "x")
    return stat, -F, -R


def _split_t_tensors(pd, p, frame):
    """(F, R) of the y- or x-frame traction tensor (unsigned, untransposed)."""
    nu = pd.nu_y if frame == "y" else pd.nu_x
    tr = pd.tr_y if frame == "y" else pd.tr_x
    nr = pd.nr_y if frame == "y" else pd.nr_x
    r = pd.r
    L1, L2, L3, L4 = _lmats(pd, frame)
    F = np.empty(r.shape + (2, 2))
    R = np.empty(r.shape + (2, 2), dtype=complex)
    ser = p.ks * r < Z_SMALL
    dire = ~ser
    if np.any(ser):
        (fa_s, fa_p, fb, fc), (aS, aP, bA, bB, c) = _t_scalars_series(p, r[ser])
        F[ser] = -(1.0 / (2.0 * math.pi)) * (
            fa_s[..., None, None] * L1[ser] + p.eta * fa_p[..., None, None] * L2[ser]
            + (2.0 / p.ks ** 2) * (fb[..., None, None] * L3[ser]
                                   - fc[..., None, None] * L4[ser]))
        R[ser] = _combine_t(p, aS, aP, bA, c, L1[ser], L2[ser], L3[ser], L4[ser],
                            extraM=bB, M=pd.M[ser], nr=nr[ser])
    if np.any(dire):
        rd = r[dire]
        fa_s, fa_p, fb, fc = _t_scalars_f_direct(p, rd)
        F[dire] = -(1.0 / (2.0 * math.pi)) * (
            fa_s[..., None, None] * L1[dire] + p.eta * fa_p[..., None, None] * L2[dire]
            + (2.0 / p.ks ** 2) * (fb[..., None, None] * L3[dire]
                                   - fc[..., None, None] * L4[dire]))
        ha_s, ha_p, hb, hc = _t_scalars_direct(p, rd)
        full = _combine_t(p, ha_s, ha_p, hb, hc, L1[dire], L2[dire], L3[dire], L4[dire])
        stat = _static_t(p, nu[dire], p.mu_frac * tr[dire] / (2.0 * math.pi * pd.r2[dire]),
                         pd.M[dire])
        R[dire] = full - stat - np.log(rd)[..., None, None] * F[dire]
    return F, R


# ----------------------------------------------------------------------------
# chart split K = ln|dhat| K1 + K2/dhat + K3 for panel quadrature
# ----------------------------------------------------------------------------

def param_split(pd: PairData, kind: str, p: ElasticParams):
    """Split kernel blocks in the source panel's chart coordinate.

    ``pd`` must carry ``delta_hat``, ``lnratio`` and the stable ratios
    ``q2_*``; the diagonal node of a self-panel interaction is handled
    transparently (delta_hat = 0 there, and K2's Cauchy weight C_j is finite
    at interior targets).  ``kind`` is one of 'S', 'D', 'Dadj', 'comb'.
    """
    if kind == "comb":
        k1d, k2d, k3d = param_split(pd, "D", p)
        k1s, k2s, k3s = param_split(pd, "S", p)
        return k1d - 1j * k1s, k2d - 1j * k2s, k3d - 1j * k3s
    if kind == "S":
        F, R = _split_g_tensors(pd, p)
        K1 = F.astype(complex)
        K2 = np.zeros_like(K1)
        K3 = pd.lnratio[..., None, None] * F + R
        return K1, K2, K3
    frame = "y" if kind == "D" else "x"
    sign = 1.0 if kind == "D" else -1.0
    nu = pd.nu_y if frame == "y" else pd.nu_x
    q2 = pd.q2_y if frame == "y" else pd.q2_x
    nr = pd.nr_y if frame == "y" else pd.nr_x
    r = pd.r
    L1, L2, L3, L4 = _lmats(pd, frame)
    F = np.empty(r.shape + (2, 2))
    K3 = np.empty(r.shape + (2, 2), dtype=complex)
    gq = (p.mu_frac / (2.0 * math.pi)) * q2
    K2 = -(gq[..., None, None] * _LROT)  # times sign and transpose below
    ser = p.ks * r < Z_SMALL
    dire = ~ser
    Xi = p.big_xi
    if np.any(ser):
        (fa_s, fa_p, fb, fc), (aS, aP, bA, bB, c) = _t_scalars_series(p, r[ser])
        F[ser] = -(1.0 / (2.0 * math.pi)) * (
            fa_s[..., None, None] * L1[ser] + p.eta * fa_p[..., None, None] * L2[ser]
            + (2.0 / p.ks ** 2) * (fb[..., None, None] * L3[ser]
                                   - fc[..., None, None] * L4[ser]))
        sym = ((nu[ser] * (1.0 - Xi) / (2.0 * math.pi))[..., None, None] * _I2
               + (nu[ser] * (Xi / math.pi))[..., None, None] * pd.M[ser])
        R = _combine_t(p, aS, aP, bA, c, L1[ser], L2[ser], L3[ser], L4[ser],
                       extraM=bB, M=pd.M[ser], nr=nr[ser])
        K3[ser] = pd.lnratio[ser][..., None, None] * F[ser] + sym + R
    if np.any(dire):
        rd = r[dire]
        fa_s, fa_p, fb, fc = _t_scalars_f_direct(p, rd)
        F[dire] = -(1.0 / (2.0 * math.pi)) * (
            fa_s[..., None, None] * L1[dire] + p.eta * fa_p[..., None, None] * L2[dire]
            + (2.0 / p.ks ** 2) * (fb[..., None, None] * L3[dire]
                                   - fc[..., None, None] * L4[dire]))
        ha_s, ha_p, hb, hc = _t_scalars_direct(p, rd)
        full = _combine_t(p, ha_s, ha_p, hb, hc, L1[dire], L2[dire], L3[dire], L4[dire])
        dh = pd.delta_hat[dire]
        K3[dire] = (full
                    - np.log(np.abs(dh))[..., None, None] * F[dire]
                    + (gq[dire] / dh)[..., None, None] * _LROT)
    K1 = sign * F.astype(complex)
    K2 = sign * K2
    K3 = sign * K3
    if kind == "D":
        K1 = np.swapaxes(K1, -1, -2)
        K2 = np.swapaxes(K2, -1, -2)
        K3 = np.swapaxes(K3, -1, -2)
    return K1, K2, K3


def full_kernel(pd: PairData, kind: str, p: ElasticParams):
    """Plain kernel blocks for separated pairs (any branch)."""
    if kind == "S":
        return greens_tensor(pd, p)
    if kind == "D":
        return np.swapaxes(traction_tensor(pd, p, "y"), -1, -2)
    if kind == "Dadj":
        return traction_tensor(pd, p, "x")
    if kind == "comb":
        return (np.swapaxes(traction_tensor(pd, p, "y"), -1, -2)
                - 1j * greens_tensor(pd, p))
    raise ValueError(f"unknown kernel kind: {kind}")


# ----------------------------------------------------------------------------
# traction of a displacement field
# ----------------------------------------------------------------------------

def traction_of_field(grad_u, n, tau, p: ElasticParams):
    """T u = 2 mu (grad u) n + lam (div u) n - mu (curl u) tau.

    ``grad_u[..., i, j]`` = d u_i / d x_j; ``n``, ``tau`` shape (..., 2).
    Works for complex-valued fields.
    """
    grad_u = np.asarray(grad_u)
    dun = np.einsum("...ij,...j->...i", grad_u, n)
    div = grad_u[..., 0, 0] + grad_u[..., 1, 1]
    curl = grad_u[..., 1, 0] - grad_u[..., 0, 1]
    return 2.0 * p.mu * dun + p.lam * div[..., None] * n - p.mu * curl[..., None] * tau
