"""Product-integration moment tables against principal-value/log oracles."""

import mpmath as mp
import numpy as np
import pytest

from elastic_bie import quadrature as qd
from elastic_bie.geometry import gauss_legendre

mp.mp.dps = 30

RNG = np.random.default_rng(111)

# 50 targets spanning interior and exterior (adjacent-panel) positions
TARGETS = np.concatenate([
    RNG.uniform(-0.999, 0.999, size=30),
    np.sign(RNG.standard_normal(20)) * (1.0 + 10.0 ** RNG.uniform(-3, 1, 20)),
])


def _legendre(j, s):
    return mp.legendre(j, s)


def _cauchy_oracle(j, t):
    """p.v. int_-1^1 P_j(s)/(t-s) ds in extended precision."""
    tm = mp.mpf(float(t))
    f = lambda s: _legendre(j, s) / (tm - s)
    if abs(t) < 1.0:
        # symmetric principal value around the pole
        eps = mp.mpf("1e-20")
        return float(mp.quad(f, [-1, tm - eps]) + mp.quad(f, [tm + eps, 1]))
    return float(mp.quad(f, [-1, 1]))


def _log_oracle(j, t):
    tm = mp.mpf(float(t))
    f = lambda s: _legendre(j, s) * mp.log(abs(tm - s))
    if abs(t) < 1.0:
        return float(mp.quad(f, [-1, tm]) + mp.quad(f, [tm, 1]))
    return float(mp.quad(f, [-1, 1]))


@pytest.mark.parametrize("t", TARGETS[::5])
def test_cauchy_and_log_tables_oracle(t):
    n = 16
    C = qd.cauchy_table(n, float(t))
    L = qd.log_table(n, float(t))
    for j in range(n):
        cref = _cauchy_oracle(j, t)
        lref = _log_oracle(j, t)
        assert abs(C[j] - cref) <= 1e-11 * max(1.0, abs(cref)), (t, j)
        assert abs(L[j] - lref) <= 1e-11 * max(1.0, abs(lref)), (t, j)


def test_all_50_targets_low_orders():
    # cheaper full sweep: orders 0..5 at all 50 targets
    for t in TARGETS:
        C = qd.cauchy_table(16, float(t))
        L = qd.log_table(16, float(t))
        for j in range(6):
            assert abs(C[j] - _cauchy_oracle(j, t)) <= 1e-11 * max(1.0, abs(C[j]))
            assert abs(L[j] - _log_oracle(j, t)) <= 1e-11 * max(1.0, abs(L[j]))


def test_modified_weights_integrate_polynomials():
    """wL/wC/wI applied to smooth factors reproduce singular integrals."""
    n = 16
    x, w = gauss_legendre(n)
    for t in (-0.62, 0.055, 0.93, 1.31, -2.4):
        wL, wC, wI = qd.modified_weights(n, t)
        # f(s) = polynomial of degree 9 with random coefficients
        coef = RNG.standard_normal(10)
        f = np.polyval(coef, x)
        got_log = wL @ f
        got_cau = wC @ f
        got_pln = wI @ f
        fm = lambda s: mp.polyval([mp.mpf(c) for c in coef], s)
        tm = mp.mpf(t)
        if abs(t) < 1.0:
            eps = mp.mpf("1e-20")
            ref_cau = float(mp.quad(lambda s: fm(s) / (tm - s), [-1, tm - eps])
                            + mp.quad(lambda s: fm(s) / (tm - s), [tm + eps, 1]))
            ref_log = float(mp.quad(lambda s: fm(s) * mp.log(abs(tm - s)), [-1, tm])
                            + mp.quad(lambda s: fm(s) * mp.log(abs(tm - s)), [tm, 1]))
        else:
            ref_cau = float(mp.quad(lambda s: fm(s) / (tm - s), [-1, 1]))
            ref_log = float(mp.quad(lambda s: fm(s) * mp.log(abs(tm - s)), [-1, 1]))
        ref_pln = float(mp.quad(fm, [-1, 1]))
        assert abs(got_cau - ref_cau) <= 1e-11 * max(1.0, abs(ref_cau))
        assert abs(got_log - ref_log) <= 1e-11 * max(1.0, abs(ref_log))
        assert abs(got_pln - ref_pln) <= 1e-12 * max(1.0, abs(ref_pln))


def test_interp_matrix_roundtrip():
    n = 16
    x, _ = gauss_legendre(n)
    U = qd.interp_matrix(n)
    V = qd.legendre_vandermonde(n, x)
    assert np.abs(V @ U - np.eye(n)).max() <= 1e-13
    # polynomial reproduction at off-node points
    xx = np.linspace(-1, 1, 37)
    coef = RNG.standard_normal(n)
    vals = qd.legendre_vandermonde(n, x) @ coef
    interp = qd.legendre_vandermonde(n, xx) @ (U @ vals)
    exact = qd.legendre_vandermonde(n, xx) @ coef
    assert np.abs(interp - exact).max() <= 1e-12


def test_endpoint_guard():
    with pytest.raises(ValueError):
        qd.cauchy_table(16, 1.0 + 1e-12)
