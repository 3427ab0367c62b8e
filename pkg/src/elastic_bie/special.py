"""Cylinder functions of orders 0..3 and their log-analytic decomposition.

The outgoing cylinder wave H_n(z) = J_n(z) + i Y_n(z) (Hankel function of the
first kind) contains a logarithmic singularity at z = 0,

    Y_n(z) = (2/pi) ln(z/2) J_n(z) + Q_n(z),

where Q_n collects a finite pole part and an entire power series,

    Q_n(z) = -(1/pi) sum_{k=0}^{n-1} (n-k-1)!/k! (z/2)^(2k-n)
             -(1/pi) (z/2)^n sum_{k>=0} (psi(k+1) + psi(n+k+1))
                                        (-z^2/4)^k / (k! (n+k)!).

Kernel-split quadrature needs the three pieces of H_n separately: the
coefficient of ln z, the pole part, and the remaining analytic function.
This module provides

* ``bessel_j`` / ``hankel1``: plain evaluations (scipy-backed),
* ``hankel_smooth_parts``: H_n(z) = analytic + (2/pi) ln z * (i J_n(z)),
* scaled helpers ``jn_scaled`` (J_n(z)/z^n) and pole-removed ``Q_n`` series
  (``q0``, ``q1_reg_over_z``, ``q2_reg_over_z2``, ``q3_reg_over_z``) that stay
  finite at z = 0 and are used to evaluate kernel remainders near the
  diagonal without cancellation.

The series helpers are valid for z below ``SERIES_RADIUS``; coefficients are
truncated so the relative truncation error is far below 1e-15 there.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.special as sps

# Validity radius of the truncated ascending series used by the *_reg helpers
# and hankel_smooth_parts.
SERIES_RADIUS = 0.5

# Number of ascending-series terms.  At z = 0.5 the k-th term carries
# (z^2/4)^k / (k! (n+k)!) <= 0.0625^k / k!^2; 14 terms leave < 1e-30.
_NTERMS = 14

_EULER_GAMMA = float(sps.digamma(1.0) * -1.0) if False else 0.5772156649015328606

# psi(m) = -gamma + H_{m-1} for integer m >= 1.
_PSI = [float("nan")] + [
    -_EULER_GAMMA + sum(1.0 / j for j in range(1, m)) for m in range(1, _NTERMS + 8)
]


def _check_z(z, radius=None):
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0.0):
        raise ValueError("argument must be positive")
    if radius is not None and np.any(z > radius):
        raise ValueError(f"argument exceeds series validity radius {radius}")
    return z


def bessel_j(n: int, z):
    """J_n(z) for n in 0..3, z > 0 (scalar or array)."""
    if n not in (0, 1, 2, 3):
        raise ValueError("order must be one of 0, 1, 2, 3")
    z = _check_z(z)
    return sps.jv(n, z)


def hankel1(n: int, z):
    """H_n(z) = J_n(z) + i Y_n(z) for n in 0..3, z > 0 (scalar or array)."""
    if n not in (0, 1, 2, 3):
        raise ValueError("order must be one of 0, 1, 2, 3")
    z = _check_z(z)
    return sps.hankel1(n, z)


# ----------------------------------------------------------------------------
# ascending-series helpers (finite at z = 0)
# ----------------------------------------------------------------------------

def _poly_in_u(coeffs, z):
    """Evaluate sum_k coeffs[k] * (-z^2/4)^k by Horner's rule."""
    u = -0.25 * np.asarray(z, dtype=float) ** 2
    acc = np.zeros_like(u) + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * u + c
    return acc


def _jn_scaled_coeffs(n):
    return [2.0 ** (-n) / (math.factorial(k) * math.factorial(n + k))
            for k in range(_NTERMS)]


_JS_COEFFS = {n: _jn_scaled_coeffs(n) for n in range(4)}

_QSUM_COEFFS = {
    n: [-(1.0 / math.pi) * (_PSI[k + 1] + _PSI[n + k + 1])
        / (math.factorial(k) * math.factorial(n + k))
        for k in range(_NTERMS)]
    for n in range(4)
}


def jn_scaled(n: int, z):
    """J_n(z) / z^n via the ascending series; finite at z = 0.

    jn_scaled(0, 0) = 1, jn_scaled(1, 0) = 1/2, jn_scaled(2, 0) = 1/8,
    jn_scaled(3, 0) = 1/48.  Valid for 0 <= z <= SERIES_RADIUS.
    """
    if n not in (0, 1, 2, 3):
        raise ValueError("order must be one of 0, 1, 2, 3")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0) or np.any(z > SERIES_RADIUS):
        raise ValueError("argument outside series validity range")
    return _poly_in_u(_JS_COEFFS[n], z)


def q0(z):
    """Q_0(z): the non-logarithmic part of Y_0; Q_0(0) = 2*gamma/pi."""
    z = np.asarray(z, dtype=float)
    return _poly_in_u(_QSUM_COEFFS[0], z)


def q1_reg_over_z(z):
    """(Q_1(z) + 2/(pi z)) / z, analytic and even; value -(1-2*gamma)/(2 pi) at 0."""
    z = np.asarray(z, dtype=float)
    return 0.5 * _poly_in_u(_QSUM_COEFFS[1], z)


def q2_reg_over_z2(z):
    """(Q_2(z) + 4/(pi z^2) + 1/pi) / z^2, analytic and even."""
    z = np.asarray(z, dtype=float)
    return 0.25 * _poly_in_u(_QSUM_COEFFS[2], z)


def q3_reg_over_z(z):
    """(Q_3(z) + 16/(pi z^3) + 2/(pi z)) / z, analytic and even; -1/(4 pi) at 0."""
    z = np.asarray(z, dtype=float)
    return -1.0 / (4.0 * math.pi) + 0.125 * z * z * _poly_in_u(_QSUM_COEFFS[3], z)


def q3_reg_over_z_any(z):
    """``q3_reg_over_z`` on all z > 0: series below the radius, Y_3-based above.

    Above the series radius the pole subtraction loses at most ~3 digits to
    cancellation, which is harmless there (the quantity multiplies a small
    smooth correction, not a singular one).
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z <= SERIES_RADIUS
    if np.any(small):
        out[small] = q3_reg_over_z(z[small])
    big = ~small
    if np.any(big):
        zb = z[big]
        Q3 = sps.yv(3, zb) - (2.0 / math.pi) * np.log(0.5 * zb) * sps.jv(3, zb)
        out[big] = (Q3 + 16.0 / (math.pi * zb ** 3) + 2.0 / (math.pi * zb)) / zb
    return out


def _q_full(n, z):
    """Q_n(z) including the pole part, for 0 < z <= SERIES_RADIUS."""
    s = (0.5 * z) ** n * _poly_in_u(_QSUM_COEFFS[n], z)
    if n == 0:
        pole = 0.0
    elif n == 1:
        pole = -2.0 / (math.pi * z)
    elif n == 2:
        pole = -4.0 / (math.pi * z * z) - 1.0 / math.pi
    else:
        pole = -16.0 / (math.pi * z ** 3) - 2.0 / (math.pi * z) - z / (4.0 * math.pi)
    return pole + s


def hankel_smooth_parts(n: int, z):
    """Split H_n(z) = analytic_part + log_coefficient * ln(z) * (i J_n(z)).

    Returns ``(analytic_part, log_coefficient)`` with log_coefficient = 2/pi.
    The analytic part is J_n(z) (1 - i (2/pi) ln 2) + i Q_n(z); it carries the
    pole of Y_n but no logarithm.  Valid for 0 < z <= SERIES_RADIUS.
    """
    if n not in (0, 1, 2, 3):
        raise ValueError("order must be one of 0, 1, 2, 3")
    z = _check_z(z, radius=SERIES_RADIUS)
    jn = (z ** n) * _poly_in_u(_JS_COEFFS[n], z)
    analytic = jn * (1.0 - 2.0j * math.log(2.0) / math.pi) + 1.0j * _q_full(n, z)
    return analytic, 2.0 / math.pi
