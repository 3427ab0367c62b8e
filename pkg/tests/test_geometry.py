"""Boundary parametrizations, corners, and panel meshes."""

import numpy as np
import pytest

from elastic_bie import geometry as geo

NQ = 16


@pytest.mark.parametrize("kind", ["circle", "ellipse", "droplet", "sector"])
def test_closed_curve_and_derivatives(kind):
    g = geo.make_geometry(kind, alpha=2.0 if kind == "ellipse" else 1.0)
    # closure
    p0 = g.position(np.array(0.0))
    p1 = g.position(np.array(g.length))
    assert np.linalg.norm(p0 - p1) <= 1e-14
    # finite-difference check of the first two derivatives on each side
    for side in g.sides:
        ss = np.linspace(side.p0 + 0.01, side.p1 - 0.01, 7)
        d1 = side.deriv(1, ss)
        d2 = side.deriv(2, ss)
        h = 1e-6
        fd1 = (side.position(ss + h) - side.position(ss - h)) / (2 * h)
        assert np.abs(d1 - fd1).max() <= 1e-8
        h = 1e-4  # larger step: second differences amplify roundoff by h^-2
        fd2 = (side.position(ss + h) - 2 * side.position(ss)
               + side.position(ss - h)) / h ** 2
        assert np.abs(d2 - fd2).max() <= 1e-6


def test_corner_counts_and_angles():
    assert geo.make_geometry("circle").corners == []
    assert geo.make_geometry("ellipse", alpha=2.0).corners == []
    drop = geo.make_geometry("droplet")
    assert len(drop.corners) == 1
    sector = geo.make_geometry("sector", k=1.0)
    assert len(sector.corners) == 3
    # apex of the unit-slope sector opens at pi/2
    apex = sector.corners[0]
    assert abs(apex.interior_angle - 0.5 * np.pi) <= 1e-12
    assert np.linalg.norm(apex.position) <= 1e-14


def test_chord_over_delta_matches_position_difference():
    g = geo.make_geometry("droplet")
    side = g.sides[0]
    # moderate offsets: the plain position difference is a valid oracle
    for m, d in ((0.37, 0.1), (0.62, 1e-3), (0.9, -0.05)):
        md = np.array(m)
        dd = np.array(d)
        cod = side.chord_over_delta(md + 0.5 * dd, dd)
        direct = side.position(md + dd) - side.position(md)
        assert np.abs(dd * cod - direct).max() <= 1e-13
    # tiny offsets: the difference oracle cancels, so compare against the
    # midpoint derivative with an O(delta^2) allowance
    for d in (1e-6, 1e-10, 1e-14):
        dd = np.array(d)
        cod = side.chord_over_delta(np.array(0.3) + 0.5 * dd, dd)
        d1 = side.deriv(1, np.array(0.3 + 0.5 * d))
        assert np.abs(cod - d1).max() <= 10.0 * d ** 2 + 1e-13


@pytest.mark.parametrize("kind,npanels", [("circle", 12), ("droplet", 16),
                                          ("sector", 24)])
def test_coarse_mesh_invariants(kind, npanels):
    g = geo.make_geometry(kind)
    mesh = geo.build_coarse_mesh(g, npanels, nq=NQ)
    # weights cover the parameter interval
    assert abs(mesh.w.sum() - g.length) <= 1e-12
    # panel intervals tile each side without gaps
    for side_idx in range(len(g.sides)):
        ivs = sorted((p.ref + p.oa, p.ref + p.ob)
                     for p in mesh.panels if p.side == side_idx)
        for (a0, b0), (a1, b1) in zip(ivs, ivs[1:]):
            assert abs(b0 - a1) <= 1e-12
    # nodes lie on the curve and frames are orthonormal
    xs = mesh.x.reshape(-1, 2)
    params = mesh.node_params().reshape(-1)
    on_curve = g.position(params)
    assert np.abs(xs - on_curve).max() <= 1e-11
    assert np.abs(np.einsum("ij,ij->i", mesh.nrm.reshape(-1, 2),
                            mesh.tau.reshape(-1, 2))).max() <= 1e-13
    nn = np.linalg.norm(mesh.nrm.reshape(-1, 2), axis=1)
    assert np.abs(nn - 1.0).max() <= 1e-13


def test_normal_points_outward():
    g = geo.make_geometry("circle")
    mesh = geo.build_coarse_mesh(g, 8, nq=NQ)
    xs = mesh.x.reshape(-1, 2)
    ns = mesh.nrm.reshape(-1, 2)
    # circle is centered at the origin: outward normal aligns with position
    assert np.all(np.einsum("ij,ij->i", xs, ns) > 0)


def test_arclength_against_adaptive():
    from scipy.integrate import quad
    g = geo.make_geometry("droplet")
    mesh = geo.build_coarse_mesh(g, 16, nq=NQ)
    arc = (mesh.w * mesh.speed).sum()
    ref, _ = quad(lambda s: np.linalg.norm(g.sides[0].deriv(1, np.array(s))),
                  0.0, 1.0, limit=200, epsabs=1e-13)
    assert abs(arc - ref) <= 1e-10


def test_refine_dyadic_structure():
    g = geo.make_geometry("droplet")
    mesh = geo.build_coarse_mesh(g, 16, nq=NQ)
    n_sub = 5
    fine = geo.refine_dyadic(mesh, n_sub)
    # each corner-adjacent panel splits into n_sub + 1 pieces
    assert fine.npanels == mesh.npanels + 2 * n_sub
    assert abs(fine.w.sum() - g.length) <= 1e-12
    # smallest panels touch the corner and halve per level
    hw = sorted(p.halfwidth for p in fine.panels)[:n_sub]
    for a, b in zip(hw, hw[1:]):
        assert abs(b / a - 2.0) <= 1e-12 or abs(b / a - 1.0) <= 1e-12


def test_droplet_small_npanels_rejected():
    g = geo.make_geometry("droplet")
    with pytest.raises(ValueError):
        geo.build_coarse_mesh(g, 3, nq=NQ)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        geo.make_geometry("blob")
    with pytest.raises(ValueError):
        geo.make_geometry("circle", alpha=2.0)
