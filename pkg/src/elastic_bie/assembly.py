"""Nystrom discretization of the elastic boundary integral operators.

A boundary operator with kernel K acting on a panel mesh is discretized as
a dense matrix of 2x2 node blocks.  Panel pairs that are neither identical
nor neighbors use plain Gauss-Legendre quadrature; the self panel and the
two neighbors of each target node use the kernel split

    K(t, s) = ln|that - shat| K1 + K2/(that - shat) + K3

in the source panel's chart together with analytic Legendre moments
(module ``quadrature``).  Neighbor relations may cross a corner, in which
case the chart is continued by parameter measure across the corner and the
chord between the two sides is formed corner-relatively, which stays exact
during deep dyadic refinement.

``build_system`` packages the operator for one of the five boundary-value
formulations in normalized second-kind form (I + Khat) phi = ghat:

    dnd_int / dnd_ext : displacement BIE,   (-+ 1/2 I + D) phi = g
    snn_int / snn_ext : traction BIE,       (+- 1/2 I + D') phi = g
    comb_ext          : combined-field Dirichlet, (1/2 I + D - i S) phi = g
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.special as sps

from . import kernels as kn
from . import quadrature as qd
from . import special as sf
from .geometry import Mesh, TAYLOR_DELTA, gauss_legendre
from .kernels import ElasticParams, PairData

# formulation -> (operator kernel, sigma, representation kernel)
FORMULATIONS = {
    "dnd_int": ("D", -1.0, "D"),
    "dnd_ext": ("D", +1.0, "D"),
    "snn_int": ("Dadj", +1.0, "S"),
    "snn_ext": ("Dadj", -1.0, "S"),
    "comb_ext": ("comb", +1.0, "comb"),
}

_FACTORIALS = np.array([math.factorial(k) for k in range(2, 10)])


@dataclass
class OperatorMatrix:
    """Normalized second-kind system (I + Khat) phi = ghat."""

    mesh: Mesh
    formulation: str
    kind: str
    sigma: float
    khat: np.ndarray


# ----------------------------------------------------------------------------
# pair construction
# ----------------------------------------------------------------------------

def _taylor_nr(nd_row, delta, sign_alternate=False):
    """sum_{k>=2} delta^(k-2) (n . x^(k))/k!, the stable (n.r)/delta^2."""
    acc = 0.0
    for i in range(nd_row.shape[-1] - 1, -1, -1):
        term = nd_row[..., i] / _FACTORIALS[i]
        if sign_alternate and i % 2 == 0:
            term = -term
        acc = acc * delta + term
    return acc


def pair_same_side(mesh: Mesh, tp: int, ti: int, sp: int, wrap: float = 0.0) -> PairData:
    """PairData for target node (tp, ti) against source panel sp, same side."""
    geom = mesh.geom
    pt, ps = mesh.panels[tp], mesh.panels[sp]
    side = geom.sides[ps.side]
    zt = mesh.offsets[tp, ti]
    zs = mesh.offsets[sp]
    dref = (pt.ref + wrap) - ps.ref
    delta = dref + (zt - zs)
    m = ps.ref + 0.5 * (dref + zt + zs)
    cod = side.chord_over_delta(m, delta)
    acod2 = np.einsum("ij,ij->i", cod, cod)
    rvec = delta[:, None] * cod
    r2 = delta ** 2 * acod2
    r = np.abs(delta) * np.sqrt(acod2)
    M = cod[:, :, None] * cod[:, None, :] / acod2[:, None, None]
    n_y, tau_y = mesh.nrm[sp], mesh.tau[sp]
    n_x, tau_x = mesh.nrm[tp, ti], mesh.tau[tp, ti]
    small = np.abs(delta) < TAYLOR_DELTA
    nu_y = np.where(small,
                    _taylor_nr(mesh.nd[sp], delta) / acod2,
                    np.einsum("ij,ij->i", n_y, cod) / np.where(small, 1.0, delta * acod2))
    nu_x = np.where(small,
                    _taylor_nr(mesh.nd[tp, ti], delta, sign_alternate=True) / acod2,
                    (cod @ n_x) / np.where(small, 1.0, delta * acod2))
    d_s = ps.halfwidth
    pd = PairData(
        rvec=rvec, r2=r2, r=r, M=M, n_y=n_y, tau_y=tau_y,
        nr_y=nu_y * r2, nu_y=nu_y,
        n_x=np.broadcast_to(n_x, rvec.shape), tau_x=np.broadcast_to(tau_x, rvec.shape),
        nr_x=nu_x * r2, nu_x=nu_x,
        delta_hat=delta / d_s,
        q2_y=np.einsum("ij,ij->i", tau_y, cod) / (d_s * acod2),
        q2_x=(cod @ tau_x) / (d_s * acod2),
        lnratio=math.log(d_s) + 0.5 * np.log(acod2),
        tr_y=np.einsum("ij,ij->i", tau_y, rvec),
        tr_x=rvec @ tau_x,
    )
    return pd


def pair_cross_corner(mesh: Mesh, tp: int, ti: int, sp: int) -> PairData:
    """PairData for a target and source panel on opposite sides of a corner.

    Both panels must be referenced at the shared corner; offsets double as
    the concatenated chart coordinate (negative before, positive after).
    """
    ps = mesh.panels[sp]
    zt = mesh.offsets[tp, ti]
    zs = mesh.offsets[sp]
    rvec = mesh.xrel[tp, ti] - mesh.xrel[sp]
    r2 = np.einsum("ij,ij->i", rvec, rvec)
    r = np.sqrt(r2)
    M = rvec[:, :, None] * rvec[:, None, :] / r2[:, None, None]
    n_y, tau_y = mesh.nrm[sp], mesh.tau[sp]
    n_x, tau_x = mesh.nrm[tp, ti], mesh.tau[tp, ti]
    d_s = ps.halfwidth
    delta_hat = (zt - zs) / d_s
    nr_y = np.einsum("ij,ij->i", n_y, rvec)
    nr_x = rvec @ n_x
    tr_y = np.einsum("ij,ij->i", tau_y, rvec)
    tr_x = rvec @ tau_x
    pd = PairData(
        rvec=rvec, r2=r2, r=r, M=M, n_y=n_y, tau_y=tau_y,
        nr_y=nr_y, nu_y=nr_y / r2,
        n_x=np.broadcast_to(n_x, rvec.shape), tau_x=np.broadcast_to(tau_x, rvec.shape),
        nr_x=nr_x, nu_x=nr_x / r2,
        delta_hat=delta_hat,
        q2_y=delta_hat * tr_y / r2,
        q2_x=delta_hat * tr_x / r2,
        lnratio=0.5 * np.log(r2) - np.log(np.abs(delta_hat)),
        tr_y=tr_y, tr_x=tr_x,
    )
    return pd


def _corner_oriented(mesh, tp, sp):
    """True if panels tp, sp lie on opposite sides of a shared corner."""
    pt, ps = mesh.panels[tp], mesh.panels[sp]
    # offsets have opposite signs across a corner (before < 0 < after)
    return (pt.oa + pt.ob) * (ps.oa + ps.ob) < 0.0 or pt.side != ps.side


def split_block(mesh: Mesh, tp: int, ti: int, sp: int, rel, kind: str,
                p: ElasticParams) -> np.ndarray:
    """Modified-weight matrix block: (nq, 2, 2) weights for source panel sp."""
    ps = mesh.panels[sp]
    if rel == "self" or rel is None:
        pd = pair_same_side(mesh, tp, ti, sp)
        that = (mesh.offsets[tp, ti] + (mesh.panels[tp].ref - ps.ref) - ps.center) / ps.halfwidth
    elif rel[0] == "wrap":
        pt = mesh.panels[tp]
        draw = (pt.ref + mesh.offsets[tp, ti]) - (ps.ref + ps.center)
        wrap = -rel[1] * round(draw / rel[1])
        pd = pair_same_side(mesh, tp, ti, sp, wrap=wrap)
        that = ((pt.ref + wrap) - ps.ref + mesh.offsets[tp, ti] - ps.center) / ps.halfwidth
    elif rel[0] == "corner" and _corner_oriented(mesh, tp, sp):
        pd = pair_cross_corner(mesh, tp, ti, sp)
        that = (mesh.offsets[tp, ti] - ps.center) / ps.halfwidth
    elif rel[0] == "corner":
        # same side through the corner's far end cannot happen for neighbors
        raise ValueError("corner relation between same-side panels")
    else:
        raise ValueError(f"unknown relation {rel}")
    K1, K2, K3 = kn.param_split(pd, kind, p)
    wL, wC, wI = qd.modified_weights_cached(mesh.nq, float(that))
    jac = ps.halfwidth * mesh.speed[sp]
    return ((wL * jac)[:, None, None] * K1
            + (wC * jac)[:, None, None] * K2
            + (wI * jac)[:, None, None] * K3)


def _endpoint_rel(mesh: Mesh, sp: int):
    """Corner-relative complex endpoints of panel sp."""
    ps = mesh.panels[sp]
    side = mesh.geom.sides[ps.side]
    ends = []
    for o in (ps.oa, ps.ob):
        if o == 0.0:
            ends.append(0.0 + 0.0j)
            continue
        xe = o * side.chord_over_delta(ps.ref + 0.5 * o, np.array([o]))[0]
        ends.append(complex(xe[0], xe[1]))
    return ends[0], ends[1]


def _chord_moments(tau_t: np.ndarray, nmom: int):
    """Analytic segment moments over [-1, 1] for targets off the segment.

    For each complex target tau the families are

        p_k = int u^k / (u - tau) du          (k = 0 .. nmom)
        q_k = int u^k / (u - tau)^2 du        (k = 0 .. nmom-1)
        R_k = int u^k Log(u - tau) du         (k = 0 .. nmom-1)
        W_k = int u^k Log(u - tau)/(u - tau) du
        X_k = int u^k Log(u - conj(tau))/(u - tau) du

    all on the principal log branch, which is continuous along the real
    segment for any target off the real axis.  X_0 needs the dilogarithm;
    its arguments (u - tau)/(conj(tau) - tau) have real part 1/2 for real
    u, so no branch of Log or Li2 is ever crossed.  The upward recursions
    amplify roundoff like |tau|^k and are intended for |tau| ~ 1; far
    targets should use plain quadrature instead.
    """
    tau = tau_t
    T = tau.shape[0]
    ints = np.array([(1.0 - (-1.0) ** (k + 1)) / (k + 1) for k in range(nmom + 1)])
    pk = np.empty((nmom + 1, T), dtype=complex)
    L1 = np.log(1.0 - tau)
    Lm1 = np.log(-1.0 - tau)
    pk[0] = L1 - Lm1
    for k in range(nmom):
        pk[k + 1] = tau * pk[k] + ints[k]
    q = np.empty((nmom, T), dtype=complex)
    q[0] = 1.0 / (tau - 1.0) - 1.0 / (tau + 1.0)
    for k in range(1, nmom):
        q[k] = pk[k - 1] + tau * q[k - 1]
    R = np.empty((nmom, T), dtype=complex)
    for k in range(nmom):
        R[k] = (L1 - (-1.0) ** (k + 1) * Lm1 - pk[k + 1]) / (k + 1)
    W = np.empty((nmom, T), dtype=complex)
    W[0] = 0.5 * (L1 ** 2 - Lm1 ** 2)
    for k in range(1, nmom):
        W[k] = R[k - 1] + tau * W[k - 1]
    b = np.conj(tau)
    d = b - tau
    X = np.empty((nmom, T), dtype=complex)
    X[0] = (np.conj(L1) * np.log((1.0 - tau) / d)
            - np.conj(Lm1) * np.log((-1.0 - tau) / d)
            + sps.spence(1.0 - (b - 1.0) / d) - sps.spence(1.0 - (b + 1.0) / d))
    for k in range(1, nmom):
        X[k] = np.conj(R[k - 1]) + tau * X[k - 1]
    return pk, q, R, W, X


# Decomposition M_ab = 1/2 delta_ab + 1/2 Re[_CAB[a, b] w / conj(w)] of the
# direction dyad M = rhat (x) rhat in the complex variable w = z_t - z.
_CAB = np.array([[1.0, -1.0j], [-1.0j, -1.0]])

# Targets mapped beyond this |tau| in the source chord variable are far
# enough from the panel for plain Gauss-Legendre rows; the upward moment
# recursions would amplify roundoff like |tau|^nq there.
_TAU_FAR = 1.6


def _cre(wrow, f):
    """Quadrature of G(s) f(s) Re[A(w(s))] given complex weights for A.

    ``wrow`` carries the (real-quadrature x complex-basis) node weights and
    ``f`` a smooth complex factor; the real part is taken against the real
    and imaginary parts of f separately, entrywise per node.
    """
    f = np.asarray(f)
    return (wrow * f.real).real + 1j * (wrow * f.imag).real


def _mfold(wrow_bar, coef):
    """(nq, 2, 2) weights for int G coef(s) Re[c_ab w/conj(w)] terms.

    ``wrow_bar`` are complex node weights for a basis with the folded
    conj(w) numerator already built into the analytic moments.
    """
    out = np.empty(wrow_bar.shape + (2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            out[:, a, b] = _cre(wrow_bar * np.conj(_CAB[a, b]), coef)
    return out


def cross_corner_chord_block(mesh: Mesh, tp: int, sp: int, kind: str,
                             p: ElasticParams) -> np.ndarray:
    """Product-integration block for two panels meeting across a corner.

    The kernel seen from a target on the other side of the corner has no
    real singularity on the open source panel, but it is nearly singular at
    the scale of the target's distance to the corner.  Every nonsmooth
    structure reduces to moments of the complex chord variable u of the
    source panel:

        ln|w|             log moments            (W kernels' log part)
        nu = Re[n/w]      Cauchy moments         (static traction, I part)
        nu M              Cauchy + 1/w^2 moments (static traction, M part)
        (tau.r)/r^2       Cauchy moments         (static traction, L part)
        g(s) M            Cauchy moments, conj(w) folded into the numerator
        g(s) M ln|w|      log-over-Cauchy moments (dilogarithm)

    with w = z_t - z(s) and the smooth factors interpolated through the
    mapped nodes.  The remainder after subtracting these structures is
    analytic and integrated plainly.  The construction is exact for
    straight panels; on curved panels the residual error scales with the
    deviation of the panel from its chord and decays under refinement
    toward the corner.  Returns (nq, nq, 2, 2) final weights (jacobian
    included) for all target nodes.
    """
    if kind == "comb":
        return (cross_corner_chord_block(mesh, tp, sp, "D", p)
                - 1j * cross_corner_chord_block(mesh, tp, sp, "S", p))
    nq = mesh.nq
    ps = mesh.panels[sp]
    za, zb = _endpoint_rel(mesh, sp)
    zs = mesh.xrel[sp]
    z_j = zs[:, 0] + 1j * zs[:, 1]
    spd = mesh.speed[sp]
    zp_j = ps.halfwidth * spd * (mesh.tau[sp][:, 0] + 1j * mesh.tau[sp][:, 1])
    # chord map u = (2z - za - zb)/(zb - za); affine, so u - tau is an exact
    # rescaling of z - z_t and ln|z - z_t| = ln|u - tau| + ln(|zb - za|/2)
    u_j = (2.0 * z_j - za - zb) / (zb - za)
    dsdu = (zb - za) / (2.0 * zp_j)
    xt = mesh.xrel[tp]
    zt_c = xt[:, 0] + 1j * xt[:, 1]
    tau_t = (2.0 * zt_c - za - zb) / (zb - za)
    near = np.abs(tau_t) <= _TAU_FAR
    pk, q, R, W, X = _chord_moments(tau_t, nq + 1)
    V = np.vander(u_j, nq, increasing=True)
    msolve = lambda mom: np.linalg.solve(V.T, mom).T  # noqa: E731
    wxi = mesh.w[sp] / ps.halfwidth        # plain weights, [-1, 1] measure
    lnhalf = math.log(abs(zb - za) / 2.0)
    pref = -2.0 / (zb - za)                # 1/(z_t - z) = pref/(u - tau)
    G5 = 0.5 * (W + X)                     # moments of u^k ln|u - tau|/(u - tau)
    wL = (msolve(R[:nq]) * dsdu).real + lnhalf * wxi   # int G ln|z - z_t|
    wC = pref * msolve(pk[:nq]) * dsdu                 # int G/(z_t - z)
    wB5 = pref * msolve(G5[:nq]) * dsdu + lnhalf * wC
    # conj(w) folded into the moments: conj(w) = abar - bbar u exactly on the
    # chord, so the numerator keeps polynomial degree within the node count
    abar = np.conj(zt_c)[:, None] - np.conj(0.5 * (za + zb))
    bbar = np.conj(0.5 * (zb - za))
    fold = lambda mom: abar.T * mom[:nq] - bbar * mom[1:nq + 1]  # noqa: E731
    wCb = pref * msolve(fold(pk)) * dsdu               # int G conj(w)/(z_t - z)
    wQb = pref ** 2 * msolve(fold(q)) * dsdu           # int G conj(w)/(z_t - z)^2
    wB5b = pref * msolve(fold(G5)) * dsdu + lnhalf * wCb
    jac = ps.halfwidth * spd
    kap = p.mu_frac / (2.0 * math.pi)
    Xi = p.big_xi
    c_nu_i = (1.0 - Xi) / (2.0 * math.pi)
    c_nu_m = Xi / math.pi
    n_src = mesh.nrm[sp][:, 0] + 1j * mesh.nrm[sp][:, 1]
    t_src = mesh.tau[sp][:, 0] + 1j * mesh.tau[sp][:, 1]
    wpl = wxi * jac
    out = np.empty((nq, nq, 2, 2), dtype=complex)
    for ti in range(nq):
        pd = pair_cross_corner(mesh, tp, ti, sp)
        full = kn.full_kernel(pd, kind, p)
        if not near[ti]:
            out[ti] = wpl[:, None, None] * full
            continue
        K1 = kn.param_split(pd, kind, p)[0]
        lnr = 0.5 * np.log(pd.r2)
        wl = wL[ti] * jac
        wc = wC[ti] * jac
        wcb = wCb[ti] * jac
        wqb = wQb[ti] * jac
        wb5b = wB5b[ti] * jac
        blk = np.zeros((nq, 2, 2), dtype=complex)
        if kind == "S":
            # G = FI I + FM M ln r + RI I + RM M exactly; project the I/M
            # coefficients from the matrices (tr Z = 2a + b, Z:M = a + b)
            trF = K1[:, 0, 0] + K1[:, 1, 1]
            FdM = np.einsum("jab,jab->j", K1, pd.M)
            FI, FM = trF - FdM, 2.0 * FdM - trF
            Rm = full - lnr[:, None, None] * K1
            trR = Rm[:, 0, 0] + Rm[:, 1, 1]
            RdM = np.einsum("jab,jab->j", Rm, pd.M)
            RI, RM = trR - RdM, 2.0 * RdM - trR
            diag = wl * (FI + 0.5 * FM) + wpl * (RI + 0.5 * RM)
            blk[:, 0, 0] = diag
            blk[:, 1, 1] = diag
            blk += 0.5 * (_mfold(wb5b, FM) + _mfold(wcb, RM))
        else:
            frame = "y" if kind == "D" else "x"
            sgn = 1.0 if kind == "D" else -1.0
            if frame == "y":
                nu_f, tr_f, nr_f = pd.nu_y, pd.tr_y, pd.nr_y
                n_c, t_c = n_src, t_src
            else:
                nu_f, tr_f, nr_f = pd.nu_x, pd.tr_x, pd.nr_x
                n_c = complex(mesh.nrm[tp][ti, 0], mesh.nrm[tp][ti, 1])
                t_c = complex(mesh.tau[tp][ti, 0], mesh.tau[tp][ti, 1])
            # static (Kelvin) traction, in the operator's final orientation
            stat = kn._static_t(p, nu_f, kap * tr_f / pd.r2, pd.M)
            if kind == "D":
                stat = np.swapaxes(stat, -1, -2)
            else:
                stat = -stat
            # bounded direction-dyad correction bB (n.r) M of the remainder
            bBv = (p.ks ** 4 * sf.q3_reg_over_z_any(p.ks * pd.r)
                   - p.kp ** 4 * sf.q3_reg_over_z_any(p.kp * pd.r))
            cM = sgn * (-0.5 / p.ks ** 2) * bBv * nr_f
            Rm = full - stat - lnr[:, None, None] * K1 - cM[:, None, None] * pd.M
            # nu I and the delta part of nu M: nu = Re[n/w]
            wnu = (wc * n_c).real
            diag = sgn * (c_nu_i + 0.5 * c_nu_m) * wnu + 0.5 * wpl * cM
            blk[:, 0, 0] = diag
            blk[:, 1, 1] = diag
            # remaining nu M parts: 1/4 Re[cab' conj(n)/w] + 1/4 Re[cab' n conj(w)/w^2]
            for a in range(2):
                for b in range(2):
                    cab = np.conj(_CAB[a, b])
                    blk[:, a, b] += sgn * c_nu_m * 0.25 * (
                        (wc * cab * np.conj(n_c)).real
                        + (wqb * cab * n_c).real)
            # rotational part (tau.r)/r^2 = Re[t/w]; same final sign for both
            blk += kap * (wc * t_c).real[:, None, None] * kn._LROT
            # smooth M correction and the log part
            blk += 0.5 * _mfold(wcb, cM)
            blk += wl[:, None, None] * K1 + wpl[:, None, None] * Rm
        out[ti] = blk
    return out


def cross_corner_panel_block(mesh: Mesh, tp: int, sp: int, kind: str,
                             p: ElasticParams, depth: int = 30,
                             nq_fine: int = 24) -> np.ndarray:
    """Quadrature block for the two panels meeting across a corner.

    Between points on different sides of a corner the kernel is smooth on
    the open source panel: instead of a real singularity it has a complex
    one at the scale of the target's distance to the corner.  The chart
    split does not model this, so the block is integrated plainly on a
    dyadic subdivision of the source panel graded toward the corner, with
    the density interpolated from its Legendre expansion.  Returns
    (nq, nq, 2, 2) final weights (jacobian included) for all target nodes.
    """
    nq = mesh.nq
    ps = mesh.panels[sp]
    side = mesh.geom.sides[ps.side]
    gx, gw = gauss_legendre(nq_fine)
    U = qd.interp_matrix_cached(nq)
    xt = mesh.xrel[tp]
    n_t, tau_t = mesh.nrm[tp], mesh.tau[tp]
    lo, hi = ps.oa, ps.ob
    toward_lo = abs(lo) < abs(hi)  # corner at the lo end of the interval
    zs, ws = [], []
    for k in range(depth + 1):
        f0 = 0.0 if k == depth else 2.0 ** (-k - 1)
        f1 = 2.0 ** (-k)
        if toward_lo:
            a, b = lo + (hi - lo) * f0, lo + (hi - lo) * f1
        else:
            a, b = hi - (hi - lo) * f1, hi - (hi - lo) * f0
        zs.append(0.5 * (a + b) + 0.5 * (b - a) * gx)
        ws.append(gw * (0.5 * (b - a)))
    z = np.concatenate(zs)
    w = np.concatenate(ws)
    cod = side.chord_over_delta(ps.ref + 0.5 * z, z)
    xs = z[:, None] * cod  # corner-relative source positions
    d1 = side.deriv(1, ps.ref + z)
    spd = np.hypot(d1[:, 0], d1[:, 1])
    tau = d1 / spd[:, None]
    nrm = np.stack([d1[:, 1], -d1[:, 0]], axis=-1) / spd[:, None]
    K = kernel_matrix_points(xt, n_t, tau_t, xs, nrm, tau, kind, p)
    L = qd.legendre_vandermonde(nq, (z - ps.center) / ps.halfwidth) @ U
    return np.einsum("q,tqij,qk->tkij", w * spd, K, L)


# ----------------------------------------------------------------------------
# matrix assembly
# ----------------------------------------------------------------------------

def _interleave(blocks):
    """(T, S, 2, 2) node blocks -> (2T, 2S) matrix."""
    T, S = blocks.shape[0], blocks.shape[1]
    out = np.empty((2 * T, 2 * S), dtype=blocks.dtype)
    out[0::2, 0::2] = blocks[:, :, 0, 0]
    out[0::2, 1::2] = blocks[:, :, 0, 1]
    out[1::2, 0::2] = blocks[:, :, 1, 0]
    out[1::2, 1::2] = blocks[:, :, 1, 1]
    return out


def kernel_matrix_points(x, n_x, tau_x, y, n_y, tau_y, kind, p):
    """Plain kernel blocks K(x_i, y_j), shape (T, S, 2, 2)."""
    T = x.shape[0]
    S = y.shape[0]
    rvec = x[:, None, :] - y[None, :, :]
    r2 = np.einsum("tsj,tsj->ts", rvec, rvec)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(r2)
        M = rvec[..., :, None] * rvec[..., None, :] / r2[..., None, None]
        nr_y = np.einsum("sj,tsj->ts", n_y, rvec) if n_y is not None else None
        pd = PairData(
            rvec=rvec, r2=r2, r=r, M=M,
            n_y=np.broadcast_to(n_y, rvec.shape) if n_y is not None else None,
            tau_y=np.broadcast_to(tau_y, rvec.shape) if tau_y is not None else None,
            nr_y=nr_y, nu_y=nr_y / r2 if nr_y is not None else None,
            n_x=np.broadcast_to(n_x[:, None, :], rvec.shape) if n_x is not None else None,
            tau_x=np.broadcast_to(tau_x[:, None, :], rvec.shape) if tau_x is not None else None,
            nr_x=None, nu_x=None,
        )
        if n_x is not None:
            pd.nr_x = np.einsum("tj,tsj->ts", n_x, rvec)
            pd.nu_x = pd.nr_x / r2
            pd.tr_x = np.einsum("tj,tsj->ts", tau_x, rvec)
        if tau_y is not None:
            pd.tr_y = np.einsum("sj,tsj->ts", tau_y, rvec)
        return kn.full_kernel(pd, kind, p)


def assemble(mesh: Mesh, kind: str, p: ElasticParams) -> np.ndarray:
    """Dense operator matrix (2 nnodes x 2 nnodes) for kernel ``kind``.

    Distant panel pairs use the plain rule; each node's self panel and two
    neighbor panels use split quadrature.  Assembly is deterministic.
    """
    nq = mesh.nq
    P = mesh.npanels
    xs = mesh.x.reshape(-1, 2)
    ns = mesh.nrm.reshape(-1, 2)
    ts = mesh.tau.reshape(-1, 2)
    wj = (mesh.w * mesh.speed).reshape(-1)
    A = np.empty((2 * P * nq, 2 * P * nq), dtype=complex)
    for tp in range(P):
        blocks = kernel_matrix_points(mesh.x[tp], mesh.nrm[tp], mesh.tau[tp],
                                      xs, ns, ts, kind, p)
        blocks = blocks * wj[None, :, None, None]
        A[2 * nq * tp:2 * nq * (tp + 1)] = _interleave(blocks)
    for tp in range(P):
        (prv, prel), (nxt, nrel) = mesh.adj[tp]
        near = [(tp, "self"), (prv, prel if prel is not None else None),
                (nxt, nrel if nrel is not None else None)]
        # deduplicate (a 2-panel closed mesh would repeat)
        seen = set()
        near = [t for t in near if not (t[0] in seen or seen.add(t[0]))]
        row = 2 * nq * tp
        for sp, rel in near:
            col = 2 * nq * sp
            if rel is not None and rel != "self" and rel[0] == "corner" \
                    and _corner_oriented(mesh, tp, sp):
                A[row:row + 2 * nq, col:col + 2 * nq] = _interleave(
                    cross_corner_chord_block(mesh, tp, sp, kind, p))
                continue
            for ti in range(nq):
                blk = split_block(mesh, tp, ti, sp, rel, kind, p)
                A[row + 2 * ti:row + 2 * ti + 2, col:col + 2 * nq] = \
                    _interleave(blk[None])[:2]
    return A


def build_system(mesh: Mesh, formulation: str, p: ElasticParams) -> OperatorMatrix:
    """Assemble (I + Khat) for a formulation; Khat = (2/sigma) K."""
    if formulation not in FORMULATIONS:
        raise ValueError(f"unknown formulation: {formulation}")
    kind, sigma, _ = FORMULATIONS[formulation]
    K = assemble(mesh, kind, p)
    return OperatorMatrix(mesh=mesh, formulation=formulation, kind=kind,
                          sigma=sigma, khat=(2.0 / sigma) * K)


# ----------------------------------------------------------------------------
# layer-potential evaluation
# ----------------------------------------------------------------------------

def potential(mesh: Mesh, density: np.ndarray, targets: np.ndarray, kind: str,
              p: ElasticParams, n_t=None, tau_t=None) -> np.ndarray:
    """Evaluate the representation integral at well-separated targets."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    xs = mesh.x.reshape(-1, 2)
    ns = mesh.nrm.reshape(-1, 2)
    ts = mesh.tau.reshape(-1, 2)
    wj = (mesh.w * mesh.speed).reshape(-1)
    blocks = kernel_matrix_points(targets, n_t, tau_t, xs, ns, ts, kind, p)
    phi = density.reshape(-1, 2)
    return np.einsum("tsij,sj,s->ti", blocks, phi, wj)


def potential_adaptive(mesh: Mesh, density: np.ndarray, x: np.ndarray, kind: str,
                       p: ElasticParams, n_t=None, tau_t=None, nq_fine: int = 32,
                       max_depth: int = 48) -> np.ndarray:
    """Representation integral at a target arbitrarily close to the curve.

    Panels too close to the target are subdivided dyadically toward it until
    each piece is well separated relative to its own length, then integrated
    with an upsampled rule on the panel's polynomial density interpolant.
    """
    x = np.asarray(x, dtype=float)
    gx, gw = gauss_legendre(nq_fine)
    U = qd.interp_matrix_cached(mesh.nq)
    phi = density.reshape(mesh.npanels, mesh.nq, 2)
    out = np.zeros(2, dtype=complex)
    n_t2 = None if n_t is None else np.asarray(n_t, dtype=float)[None, :]
    tau_t2 = None if tau_t is None else np.asarray(tau_t, dtype=float)[None, :]
    for sp in range(mesh.npanels):
        ps = mesh.panels[sp]
        side = mesh.geom.sides[ps.side]
        coef = U @ phi[sp]  # Legendre coefficients per component
        stack = [(-1.0, 1.0, 0)]
        while stack:
            a, b, depth = stack.pop()
            mid = 0.5 * (a + b)
            hw = 0.5 * (b - a)
            zloc = ps.center + ps.halfwidth * (mid + hw * gx)
            s = ps.ref + zloc
            pos = side.position(np.array(ps.ref)) + (
                zloc[:, None] * side.chord_over_delta(ps.ref + 0.5 * zloc, zloc))
            d1 = side.deriv(1, s)
            sp_speed = np.hypot(d1[:, 0], d1[:, 1])
            seg_len = ps.halfwidth * hw * 2.0 * sp_speed.max()
            dist = np.min(np.hypot(pos[:, 0] - x[0], pos[:, 1] - x[1]))
            if dist < 1.5 * seg_len and depth < max_depth:
                stack.append((a, mid, depth + 1))
                stack.append((mid, b, depth + 1))
                continue
            tau_s = d1 / sp_speed[:, None]
            n_s = np.stack([d1[:, 1], -d1[:, 0]], axis=-1) / sp_speed[:, None]
            V = qd.legendre_vandermonde(mesh.nq, mid + hw * gx)
            phi_loc = V @ coef
            blocks = kernel_matrix_points(x[None, :], n_t2, tau_t2,
                                          pos, n_s, tau_s, kind, p)[0]
            wloc = gw * hw * ps.halfwidth * sp_speed
            out += np.einsum("sij,sj,s->i", blocks, phi_loc, wloc)
    return out


def jump_check(mesh: Mesh, p: ElasticParams, t_param: float, eps: float,
               kind: str = "D", density=None):
    """One-sided limits of a layer potential at x(t) +- eps n(t).

    ``kind`` 'D' checks the displacement double layer (jump +phi across the
    boundary with the limit from the n-side larger by +1/2 phi); 'Dadj'
    checks the traction of the single layer (jump -phi).  Returns
    (u_plus, u_minus, phi_at_t).
    """
    geom = mesh.geom
    side_idx = geom.side_index_of(t_param)
    side = geom.sides[side_idx]
    t_arr = np.array(t_param)
    x0 = side.position(t_arr)
    d1 = side.deriv(1, t_arr)
    speed = float(np.hypot(d1[0], d1[1]))
    tau0 = d1 / speed
    n0 = np.array([d1[1], -d1[0]]) / speed
    if density is None:
        density = lambda s, pos: np.stack(
            [np.cos(s), 0.5 * np.sin(2.0 * s)], axis=-1).astype(complex)
    params = np.array([mesh.panels[ip].ref for ip in range(mesh.npanels)])[:, None] + mesh.offsets
    dens = density(params, mesh.x)
    if kind == "S":
        evalkind, n_t, tau_t = "S", None, None
    elif kind == "D":
        evalkind, n_t, tau_t = "D", None, None
    elif kind == "Dadj":
        evalkind, n_t, tau_t = "Dadj", n0, tau0
    else:
        raise ValueError(kind)
    up = potential_adaptive(mesh, dens, x0 + eps * n0, evalkind, p,
                            n_t=n_t, tau_t=tau_t)
    um = potential_adaptive(mesh, dens, x0 - eps * n0, evalkind, p,
                            n_t=n_t, tau_t=tau_t)
    phi0 = density(np.array([[t_param]]), x0[None, None, :])[0, 0]
    return up, um, phi0
