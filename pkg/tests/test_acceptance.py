"""End-to-end acceptance gate.

Each test exercises one numbered claim about the finished solver at its
stated tolerance and prints a single machine-readable verdict line

    CRITERION <k>: PASS|FAIL  <measurements>

so a log scrape shows the full scorecard even on partial failure.  The
experiments mirror the library's intended use: manufactured point-source
solutions on the four geometries, refinement-depth sweeps with the
compressed corner solver, the high-frequency sector table, the corner
exponent fit, and the oracle-backed property suites.
"""

import time

import mpmath as mp
import numpy as np
import pytest

from elastic_bie import assembly as asm
from elastic_bie import driver
from elastic_bie import kernels as kn
from elastic_bie import quadrature as qd
from elastic_bie import rcip
from elastic_bie import special as sf
from elastic_bie.geometry import (build_coarse_mesh, make_geometry,
                                  refine_dyadic)
from elastic_bie.kernels import ElasticParams

mp.mp.dps = 30

P = driver.DEFAULT_PARAMS


def _verdict(k: int, ok: bool, detail: str):
    print(f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {k}: {detail}"


def test_criterion_1_smooth_machine_precision():
    """Circle N=12 and ellipse (alpha=2) N=24, DND_ext and SNN_ext: both
    error components <= 1e-12, each solve < 10 s."""
    ok = True
    parts = []
    for geometry, npanels, alpha in (("circle", 12, 1.0), ("ellipse", 24, 2.0)):
        for form in ("dnd_ext", "snn_ext"):
            r = driver.solve_problem(geometry, form, npanels, alpha=alpha)
            ok &= max(r.errors) <= 1e-12 and r.elapsed < 10.0
            parts.append(f"{geometry}/{form}: {max(r.errors):.2e} "
                         f"({r.elapsed:.1f}s)")
    _verdict(1, ok, "; ".join(parts))


def test_criterion_2_corner_pollution_without_refinement():
    """Droplet, uniform mesh, no compression, N=48, DND_ext: error lands in
    [1e-7, 1e-4] -- the scheme must NOT spuriously converge at a corner."""
    r = driver.solve_problem("droplet", "dnd_ext", 48, n_sub=0)
    ok = bool(np.all((r.errors >= 1e-7) & (r.errors <= 1e-4)))
    _verdict(2, ok, f"errors {r.errors[0]:.2e} {r.errors[1]:.2e} "
                    "(required within [1e-7, 1e-4])")


@pytest.mark.slow
def test_criterion_3_rcip_plateau_all_formulations():
    """Droplet, {DND,SNN} x {int,ext}, n_sub = 0..80 step 4: error curves
    non-increasing down to a plateau <= 1e-12, full sweep < 15 min."""
    t0 = time.perf_counter()
    ok = True
    parts = []
    for form in ("dnd_int", "dnd_ext", "snn_int", "snn_ext"):
        rs = driver.nsub_sweep("droplet", form, 48, range(0, 81, 4))
        errs = [max(r.errors) for r in rs]
        final_ok = errs[-1] <= 1e-12
        # non-increasing until the plateau; round-off wiggle below the
        # plateau tolerance does not count against monotonicity
        mono_ok = all(b <= a or a <= 1e-12 for a, b in zip(errs, errs[1:]))
        ok &= final_ok and mono_ok
        parts.append(f"{form}: {errs[0]:.1e}->{errs[-1]:.1e} "
                     f"monotone={mono_ok}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 900.0
    _verdict(3, ok, "; ".join(parts) + f"; sweep {elapsed:.0f}s (< 900s)")


@pytest.mark.slow
def test_criterion_4_sector_frequency_table():
    """Combined-layer Dirichlet exterior on the sector: (N, n_sub, omega) in
    {(24,20,3), (36,20,30), (72,20,100)}, error <= 1e-11 each; the
    omega=100 case solves dense in < 20 min."""
    ok = True
    parts = []
    for npanels, n_sub, omega in ((24, 20, 3.0), (36, 20, 30.0),
                                  (72, 20, 100.0)):
        p = ElasticParams(lam=P.lam, mu=P.mu, rho=P.rho, omega=omega)
        r = driver.solve_problem("sector", "comb_ext", npanels, p=p,
                                 n_sub=n_sub)
        case_ok = max(r.errors) <= 1e-11
        if omega == 100.0:
            case_ok &= r.elapsed < 1200.0
        ok &= case_ok
        parts.append(f"w={omega:g}: {max(r.errors):.2e} ({r.elapsed:.0f}s)")
    _verdict(4, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_5_corner_exponent():
    """Sector corner asymptotics: fitted interior Neumann alpha within 0.01
    of -0.34613 and exterior within 0.01 of 0.54081; wedge roots nu1, nu2
    reproduced to 1e-10."""
    theta = 1.5 * np.pi
    xi = P.lam / (2.0 * (P.lam + P.mu))
    nu1 = driver.singular_exponent(theta, 1.0 / (3.0 - 4.0 * xi) ** 2)
    nu2 = driver.singular_exponent(theta, 1.0)
    roots_ok = (abs(nu1 - 0.61049131527757) <= 1e-10
                and abs(nu2 - 0.54448373678246) <= 1e-10)
    a_int = driver.corner_exponent("interior")
    a_ext = driver.corner_exponent("exterior")
    fits_ok = abs(a_int - (-0.34613)) <= 0.01 and abs(a_ext - 0.54081) <= 0.01
    _verdict(5, roots_ok and fits_ok,
             f"alpha_int={a_int:.5f} (target -0.34613+-0.01), "
             f"alpha_ext={a_ext:.5f} (target 0.54081+-0.01), "
             f"nu1={nu1:.14f}, nu2={nu2:.14f}")


def _check_special_functions() -> tuple:
    rng = np.random.default_rng(3)
    z = 10.0 ** rng.uniform(-3, 1.5, size=1000)
    worst = 0.0
    for n in range(4):
        hv = sf.hankel1(n, z)
        for zi, hi in zip(z, hv):
            ref = complex(mp.hankel1(n, mp.mpf(zi)))
            worst = max(worst, abs(hi - ref) / abs(ref))
    return worst <= 1e-12, f"special {worst:.1e}<=1e-12"


def _check_moment_tables() -> tuple:
    rng = np.random.default_rng(4)
    targets = np.concatenate([
        rng.uniform(-0.99, 0.99, 30),
        np.sign(rng.standard_normal(20)) * (1.0 + 10.0 ** rng.uniform(-3, 1, 20))])
    worst = 0.0
    for t in targets:
        C = qd.cauchy_table(16, float(t))
        L = qd.log_table(16, float(t))
        tm = mp.mpf(float(t))
        pts = [-1, tm, 1] if abs(t) < 1 else [-1, 1]
        for j in range(16):
            fC = lambda s: mp.legendre(j, s) / (tm - s)
            fL = lambda s: mp.legendre(j, s) * mp.log(abs(tm - s))
            if abs(t) < 1:
                eps = mp.mpf("1e-20")
                cref = float(mp.quad(fC, [-1, tm - eps])
                             + mp.quad(fC, [tm + eps, 1]))
            else:
                cref = float(mp.quad(fC, pts))
            lref = float(mp.quad(fL, pts))
            worst = max(worst, abs(C[j] - cref) / max(1.0, abs(cref)),
                        abs(L[j] - lref) / max(1.0, abs(lref)))
    return worst <= 1e-11, f"moments {worst:.1e}<=1e-11"


def _check_kernel_split() -> tuple:
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(500):
        x = rng.uniform(-1, 1, 2)
        ang, ty, tx = rng.uniform(0, 2 * np.pi, 3)
        r = 10.0 ** rng.uniform(-4, 0.3)
        y = x + r * np.array([np.cos(ang), np.sin(ang)])
        tau_y = np.array([np.cos(ty), np.sin(ty)])
        n_y = np.array([tau_y[1], -tau_y[0]])
        tau_x = np.array([np.cos(tx), np.sin(tx)])
        n_x = np.array([tau_x[1], -tau_x[0]])
        lnr = np.log(r)
        G = kn.green_G(x, y, P)
        FG, RG = kn.split_G(x, y, P)
        D = np.swapaxes(kn.traction_tensor(
            kn._point_pairdata(x, y, n_y=n_y, tau_y=tau_y), P, "y"), -1, -2)
        sD, FD, RD = kn.split_D(x, y, n_y, tau_y, P)
        S = kn.traction_tensor(
            kn._point_pairdata(x, y, n_x=n_x, tau_x=tau_x), P, "x")
        sS, FS, RS = kn.split_Sigma(x, y, n_x, tau_x, P)
        comb = D - 1.0j * G
        for full, recon in (
                (G, lnr * FG + RG),
                (D, sD + lnr * FD + RD),
                (S, sS + lnr * FS + RS),
                (comb, sD + lnr * (FD - 1.0j * FG) + RD - 1.0j * RG)):
            worst = max(worst,
                        np.abs(recon - full).max() / np.abs(full).max())
    return worst <= 1e-11, f"split {worst:.1e}<=1e-11"


def _check_jump_relation() -> tuple:
    geom = make_geometry("circle")
    mesh = build_coarse_mesh(geom, 40, nq=16)
    xs = mesh.x.reshape(-1, 2)
    th = np.arctan2(xs[:, 1], xs[:, 0])
    phi = np.stack([np.cos(2 * th) + 0.5 * np.sin(th),
                    np.sin(3 * th) - 0.25], axis=1).astype(complex)
    dens = phi.reshape(-1)
    i0 = 37
    x0, n0 = xs[i0], mesh.nrm.reshape(-1, 2)[i0]

    def jump(eps):
        return (asm.potential_adaptive(mesh, dens, x0 + eps * n0, "D", P)
                - asm.potential_adaptive(mesh, dens, x0 - eps * n0, "D", P))

    errs = []
    for eps in (1e-3, 1e-4, 1e-5):
        extrap = 2.0 * jump(0.5 * eps) - jump(eps)
        errs.append(np.abs(extrap - phi[i0]).max())
    ok = errs[1] <= 1e-6 and errs[1] < errs[0] and errs[2] < errs[1]
    return ok, f"jump@1e-4 {errs[1]:.1e}<=1e-6, improving"


def _check_rcip_vs_fine() -> tuple:
    geom = make_geometry("droplet")
    mesh = build_coarse_mesh(geom, 16, nq=16)
    sysm = asm.build_system(mesh, "dnd_ext", P)
    comp = rcip.Compressor(mesh, sysm.kind, 2.0 / sysm.sigma, P)
    rhs = (2.0 / sysm.sigma) * driver.point_source_data(
        mesh, "dnd_ext", driver.INTERIOR_POINT, P)
    worst = 0.0
    for n_sub in (3, 6):
        phi_hat, _, _ = rcip.solve_compressed(sysm, P, n_sub, rhs,
                                              compressor=comp)
        fmesh = refine_dyadic(mesh, n_sub)
        fsys = asm.build_system(fmesh, "dnd_ext", P)
        frhs = (2.0 / fsys.sigma) * driver.point_source_data(
            fmesh, "dnd_ext", driver.INTERIOR_POINT, P)
        phif = np.linalg.solve(np.eye(fsys.khat.shape[0], dtype=complex)
                               + fsys.khat, frhs)
        fkey = {(q.side, q.ref, q.oa, q.ob): j
                for j, q in enumerate(fmesh.panels)}
        nbdof = set(np.concatenate(
            [nb.dof for nb in comp.neighborhoods]).tolist())
        for i, pan in enumerate(mesh.panels):
            dofs = np.arange(32 * i, 32 * (i + 1))
            if any(d in nbdof for d in dofs):
                continue
            j = fkey[(pan.side, pan.ref, pan.oa, pan.ob)]
            worst = max(worst, np.abs(
                phi_hat[dofs] - phif[32 * j:32 * (j + 1)]).max()
                / np.abs(phif).max())
    return worst <= 1e-9, f"rcip-vs-fine {worst:.1e}<=1e-9"


def _check_static_gauss() -> tuple:
    from scipy.integrate import quad
    sx = 0.7
    x = np.array([np.cos(sx), np.sin(sx)])

    def numer(s, i, j):
        if abs(s - sx) < 1e-9:
            s = sx + 1e-9
        y = np.array([np.cos(s), np.sin(s)])
        tau_y = np.array([-np.sin(s), np.cos(s)])
        n_y = np.array([np.cos(s), np.sin(s)])
        return kn.traction_Ty_E(x, y, n_y, tau_y, P).T[i, j] * (s - sx)

    got = np.array([[quad(numer, sx - np.pi, sx + np.pi, args=(i, j),
                          weight="cauchy", wvar=sx, limit=400,
                          epsabs=1e-12)[0] for j in range(2)]
                    for i in range(2)])
    err = np.abs(got + 0.5 * np.eye(2)).max()
    return err <= 1e-10, f"gauss {err:.1e}<=1e-10"


@pytest.mark.slow
def test_criterion_6_property_suites():
    """Oracle-backed property suites at the stated sample sizes."""
    results = [_check_special_functions(), _check_moment_tables(),
               _check_kernel_split(), _check_jump_relation(),
               _check_rcip_vs_fine(), _check_static_gauss()]
    ok = all(r[0] for r in results)
    _verdict(6, ok, "; ".join(r[1] for r in results))
