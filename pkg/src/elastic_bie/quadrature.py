"""Product-integration rules for kernels with log and Cauchy singularities.

On a reference panel [-1, 1] carrying an n-point Gauss-Legendre rule, a
kernel written as

    K(t, s) = ln|t - s| K1(s) + K2(s)/(t - s) + K3(s)

is integrated exactly against polynomial interpolants of K1, K2, K3 times
the density, using the Legendre moments

    C_j(t) = p.v. int_-1^1 P_j(s)/(t - s) ds,
    L_j(t) = int_-1^1 P_j(s) ln|t - s| ds,
    I_j    = int_-1^1 P_j(s) ds = 2 delta_j0.

C_j obeys j C_j = (2j - 1) t C_{j-1} - (j - 1) C_{j-2}.  For targets inside
the panel the recursion is run forward; for exterior targets (|t| > 1,
adjacent-panel interactions) C_j is the recessive solution, so it is
generated by backward recursion normalized against the closed form
C_0 = ln|(t + 1)/(t - 1)|.  L_j follows from C_j via

    L_0 = (t+1) ln|t+1| - (t-1) ln|t-1| - 2,
    L_1 = t L_0 - ((t+1)^2 ln|t+1| - (t-1)^2 ln|t-1|)/2 + t,
    3 L_2 = t (C_2 - C_0) + 2,
    (j+1) L_j = -(j-2) L_{j-2} + t (C_j - C_{j-2}),   j > 2.

``modified_weights`` folds the moments with the node->coefficient map into
per-node weight factors, so a singular panel integral becomes a plain
weighted sum of kernel-part samples at the original nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import gauss_legendre

# forward recursion is used for |t| < 1; backward (Miller) beyond _T_BACKWARD
_T_BACKWARD = 1.0
_GUARD = 1e-10
_EXTRA_BACKWARD = 40


@dataclass
class LegendreTable:
    """Moment vectors C_j, L_j, I_j, j = 0..n-1, for one target t."""

    t: float
    C: np.ndarray
    L: np.ndarray
    I: np.ndarray


def cauchy_table(n: int, t: float) -> np.ndarray:
    """C_j(t), j = 0..n-1 (principal value for -1 < t < 1)."""
    if abs(abs(t) - 1.0) < _GUARD:
        raise ValueError("target parameter too close to a panel endpoint")
    C = np.empty(n)
    c0 = math.log(abs((t + 1.0) / (t - 1.0)))
    if abs(t) < 1.0:
        C[0] = c0
        if n > 1:
            C[1] = t * c0 - 2.0
        for j in range(2, n):
            C[j] = ((2 * j - 1) * t * C[j - 1] - (j - 1) * C[j - 2]) / j
        return C
    # exterior target: backward recursion on the recessive solution.  The
    # dominant solution grows by e^(2 acosh|t|) per step, so the start index
    # is chosen to suppress the trial-value contamination below 1e-18.
    theta = math.acosh(abs(t))
    extra = _EXTRA_BACKWARD + int(45.0 / max(2.0 * theta, 4.5e-4))
    m = n + extra
    cj1 = 0.0   # trial C_{m+1}
    cj = 1.0    # trial C_m
    tail = []
    for j in range(m, 0, -1):
        # from (j+1) C_{j+1} = (2j + 1) t C_j - j C_{j-1}
        cjm1 = ((2 * j + 1) * t * cj - (j + 1) * cj1) / j
        if j - 1 < n:
            tail.append(cjm1)
        cj1, cj = cj, cjm1
        if abs(cj) > 1e250:
            cj1 *= 1e-250
            cj *= 1e-250
            tail = [v * 1e-250 for v in tail]
    Ctrial = np.array(tail[::-1])
    C[:] = Ctrial * (c0 / Ctrial[0])
    return C


def log_table(n: int, t: float) -> np.ndarray:
    """L_j(t), j = 0..n-1."""
    C = cauchy_table(n, t)
    L = np.empty(n)
    ap = abs(t + 1.0)
    am = abs(t - 1.0)
    la = math.log(ap)
    lm = math.log(am)
    L[0] = (t + 1.0) * la - (t - 1.0) * lm - 2.0
    if n > 1:
        L[1] = t * L[0] - 0.5 * ((t + 1.0) ** 2 * la - (t - 1.0) ** 2 * lm) + t
    if n > 2:
        L[2] = (t * (C[2] - C[0]) + 2.0) / 3.0
    for j in range(3, n):
        L[j] = (-(j - 2) * L[j - 2] + t * (C[j] - C[j - 2])) / (j + 1)
    return L


def legendre_tables(n: int, t: float) -> LegendreTable:
    I = np.zeros(n)
    I[0] = 2.0
    return LegendreTable(t=t, C=cauchy_table(n, t), L=log_table(n, t), I=I)


def interp_matrix(n: int) -> np.ndarray:
    """Map node values to Legendre coefficients: u[j, k] = (2j+1)/2 w_k P_j(x_k).

    The inverse map is Vandermonde evaluation; both directions round-trip
    polynomials of degree < n to machine precision.
    """
    x, w = gauss_legendre(n)
    V = legendre_vandermonde(n, x)
    return ((np.arange(n)[:, None] + 0.5) * w[None, :]) * V.T


def legendre_vandermonde(n: int, x: np.ndarray) -> np.ndarray:
    """V[k, j] = P_j(x_k) for j = 0..n-1."""
    x = np.asarray(x, dtype=float)
    V = np.empty((x.size, n))
    V[:, 0] = 1.0
    if n > 1:
        V[:, 1] = x
    for j in range(2, n):
        V[:, j] = ((2 * j - 1) * x * V[:, j - 1] - (j - 1) * V[:, j - 2]) / j
    return V


def modified_weights(n: int, t: float):
    """Per-node weight factors (wL, wC, wI) for one target at chart position t.

    The panel integral of ln|t-s| K1 phi + K2 phi/(t-s) + K3 phi against the
    interpolant through the n Gauss-Legendre nodes equals

        sum_k (wL[k] K1(s_k) + wC[k] K2(s_k) + wI[k] K3(s_k)) phi(s_k),

    up to the chart Jacobian, which the caller multiplies in.
    """
    U = interp_matrix(n)
    tab = legendre_tables(n, t)
    wL = U.T @ tab.L
    wC = U.T @ tab.C
    wI = U.T @ tab.I
    return wL, wC, wI


# cache of interpolation matrices by size
_U_CACHE: dict = {}


def interp_matrix_cached(n: int) -> np.ndarray:
    if n not in _U_CACHE:
        _U_CACHE[n] = interp_matrix(n)
    return _U_CACHE[n]


def modified_weights_cached(n: int, t: float):
    U = interp_matrix_cached(n)
    tab = legendre_tables(n, t)
    return U.T @ tab.L, U.T @ tab.C, U.T @ tab.I
