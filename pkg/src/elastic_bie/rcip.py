"""Recursively compressed inverse preconditioning for corner singularities.

Densities on cornered boundaries are non-smooth at the corners, so plain
panel refinement toward a corner is replaced by a compressed scheme: the
operator on a hierarchically refined corner neighborhood is inverted level
by level and folded into a small matrix R acting on the unrefined grid.

Around each corner, the 4 nearest coarse panels (two per side) form the
neighborhood Gamma*.  With K = K* + K^o (K* the interactions inside the
neighborhoods) the compressed equation on the coarse grid reads

    (I + K^o Rbar) phi_tilde = g,        phi_hat = Rbar phi_tilde,

where Rbar is the identity outside the neighborhoods and, per corner,

    R = P_W^T (I_fin + K*_fin)^(-1) P

for the prolongation P from the coarse neighborhood grid to the fully
refined one.  R is computed without ever forming the refined mesh by the
recursion (innermost level d = n_sub outward to d = 1)

    R^(nsub) = P_W^T (I_b + K_b(nsub))^(-1) P,
    R^(d)    = P_W^T (F{(R^(d+1))^(-1)} + I_b^o + K_b^o(d))^(-1) P,

on a fixed six-panel "type-b" mesh that shrinks dyadically with d; F{.}
embeds the 128x128 inverse into the four inner panels, and the superscript
"o" zeroes the inner-inner block.  The level matrices K_b depend only on
(corner, level), so they are cached and shared across sweeps in n_sub.

Backward substitution through the stored level solves reconstructs the
fine-grid density panel by panel toward the corner, which is how the
power-law corner asymptotics of the density are measured.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import assembly as asm
from . import quadrature as qd
from .geometry import Mesh, Panel, _panel_node_data, gauss_legendre
from .kernels import ElasticParams, full_kernel


@dataclass
class Prolongation:
    """Coarse-to-fine maps on a corner neighborhood (parameter weights)."""

    P: np.ndarray    # (12 nq, 8 nq)
    PWT: np.ndarray  # (8 nq, 12 nq)


@dataclass
class CornerNeighborhood:
    ci: int
    panel_ids: list          # [pb0, pb1, pa0, pa1] coarse panel indices
    dof: np.ndarray          # global dof indices of the neighborhood
    h_b: float               # parameter length of the corner panel, before side
    h_a: float


@dataclass
class CompressedInverse:
    """R per corner plus the level solves needed for reconstruction."""

    neighborhood: CornerNeighborhood
    R: np.ndarray
    n_sub: int
    level_solves: list = field(default=None, repr=False)  # A_d^{-1} P, d = 1..n_sub
    level_R: list = field(default=None, repr=False)       # R^{(d)}, d = 1..n_sub


def _half_interp(nq: int):
    gx, _ = gauss_legendre(nq)
    U = qd.interp_matrix_cached(nq)
    lower = qd.legendre_vandermonde(nq, 0.5 * gx - 0.5) @ U
    upper = qd.legendre_vandermonde(nq, 0.5 * gx + 0.5) @ U
    return lower, upper


def prolongation(nq: int, h_b: float, h_a: float) -> Prolongation:
    """Type-c (4 panels) to type-b (6 panels) maps around one corner."""
    lower, upper = _half_interp(nq)
    I2 = np.eye(2)
    n2 = 2 * nq
    P = np.zeros((6 * n2, 4 * n2))
    P[0:n2, 0:n2] = np.eye(n2)
    P[n2:2 * n2, n2:2 * n2] = np.kron(lower, I2)
    P[2 * n2:3 * n2, n2:2 * n2] = np.kron(upper, I2)
    P[3 * n2:4 * n2, 2 * n2:3 * n2] = np.kron(lower, I2)
    P[4 * n2:5 * n2, 2 * n2:3 * n2] = np.kron(upper, I2)
    P[5 * n2:6 * n2, 3 * n2:4 * n2] = np.eye(n2)
    _, gw = gauss_legendre(nq)
    wf = np.concatenate([np.repeat(gw * hw, 2) for hw in
                         (h_b / 2, h_b / 4, h_b / 4, h_a / 4, h_a / 4, h_a / 2)])
    wc = np.concatenate([np.repeat(gw * hw, 2) for hw in
                         (h_b / 2, h_b / 2, h_a / 2, h_a / 2)])
    PWT = (P * wf[:, None]).T / wc[:, None]
    return Prolongation(P=P, PWT=PWT)


def find_neighborhoods(mesh: Mesh):
    """Locate the 4 coarse panels around each corner of the mesh."""
    geom = mesh.geom
    nq = mesh.nq
    out = []
    for ci, c in enumerate(geom.corners):
        pb1 = pb0 = pa0 = pa1 = None
        for i, p in enumerate(mesh.panels):
            if p.side == c.side_before and p.ref == c.param_before and p.ob == 0.0:
                pb1 = i
            if p.side == c.side_after and p.ref == c.param_after and p.oa == 0.0:
                pa0 = i
        h_b = -mesh.panels[pb1].oa
        h_a = mesh.panels[pa0].ob
        for i, p in enumerate(mesh.panels):
            if p.side == c.side_before and p.ref == c.param_before and abs(p.ob + h_b) < 1e-14:
                pb0 = i
            if p.side == c.side_after and p.ref == c.param_after and abs(p.oa - h_a) < 1e-14:
                pa1 = i
        ids = [pb0, pb1, pa0, pa1]
        if any(v is None for v in ids):
            raise ValueError("coarse mesh does not isolate the corner with 2+2 panels")
        dof = np.concatenate([np.arange(2 * nq * i, 2 * nq * (i + 1)) for i in ids])
        out.append(CornerNeighborhood(ci=ci, panel_ids=ids, dof=dof, h_b=h_b, h_a=h_a))
    return out


def local_mesh(geom, c, h_b, h_a, level: int, nq: int) -> Mesh:
    """Six-panel type-b mesh around corner ``c`` at refinement level (1-based)."""
    ab = h_b * 2.0 ** (1 - level)
    aa = h_a * 2.0 ** (1 - level)
    panels = [
        Panel(side=c.side_before, ref=c.param_before, oa=-2 * ab, ob=-ab),
        Panel(side=c.side_before, ref=c.param_before, oa=-ab, ob=-ab / 2),
        Panel(side=c.side_before, ref=c.param_before, oa=-ab / 2, ob=0.0),
        Panel(side=c.side_after, ref=c.param_after, oa=0.0, ob=aa / 2),
        Panel(side=c.side_after, ref=c.param_after, oa=aa / 2, ob=aa),
        Panel(side=c.side_after, ref=c.param_after, oa=aa, ob=2 * aa),
    ]
    offs, x, xrel, nrm, tau, speed, w, nd, curv2 = _panel_node_data(geom, panels, nq)
    return Mesh(geom=geom, panels=panels, nq=nq, offsets=offs, x=x, xrel=xrel,
                nrm=nrm, tau=tau, speed=speed, w=w, nd=nd, curv2=curv2)


def _pair_rel(lmesh, tp, sp, ci):
    """Relation used for split quadrature inside a local mesh."""
    if tp == sp:
        return "self"
    if asm._corner_oriented(lmesh, tp, sp):
        return ("corner", ci)
    return None


def assemble_local(lmesh: Mesh, ci: int, kind: str, p: ElasticParams) -> np.ndarray:
    """Operator matrix on a (small) open local mesh, chord-stable throughout."""
    nq = lmesh.nq
    P = lmesh.npanels
    A = np.empty((2 * P * nq, 2 * P * nq), dtype=complex)
    for tp in range(P):
        for sp in range(P):
            col = 2 * nq * sp
            if abs(tp - sp) <= 1:
                rel = _pair_rel(lmesh, tp, sp, ci)
                if rel is not None and rel != "self" and rel[0] == "corner":
                    A[2 * nq * tp:2 * nq * (tp + 1), col:col + 2 * nq] = \
                        asm._interleave(asm.cross_corner_chord_block(lmesh, tp, sp, kind, p))
                    continue
                for ti in range(nq):
                    blk = asm.split_block(lmesh, tp, ti, sp, rel, kind, p)
                    row = 2 * (nq * tp + ti)
                    A[row:row + 2, col:col + 2 * nq] = asm._interleave(blk[None])[:2]
            else:
                cross = asm._corner_oriented(lmesh, tp, sp)
                wj = (lmesh.w * lmesh.speed)[sp]
                for ti in range(nq):
                    if cross:
                        pd = asm.pair_cross_corner(lmesh, tp, ti, sp)
                    else:
                        pd = asm.pair_same_side(lmesh, tp, ti, sp)
                    blk = full_kernel(pd, kind, p) * wj[:, None, None]
                    row = 2 * (nq * tp + ti)
                    A[row:row + 2, col:col + 2 * nq] = asm._interleave(blk[None])[:2]
    return A


class Compressor:
    """Builds and caches compressed inverses R for every corner of a mesh."""

    def __init__(self, mesh: Mesh, kind: str, scale: complex, p: ElasticParams,
                 nq: int = None):
        self.mesh = mesh
        self.kind = kind
        self.scale = scale
        self.p = p
        self.nq = nq or mesh.nq
        self.neighborhoods = find_neighborhoods(mesh)
        self._kb_cache = {}
        self._prolong = {}

    def prolong(self, ci: int) -> Prolongation:
        if ci not in self._prolong:
            nb = self.neighborhoods[ci]
            self._prolong[ci] = prolongation(self.nq, nb.h_b, nb.h_a)
        return self._prolong[ci]

    def kb(self, ci: int, level: int) -> np.ndarray:
        key = (ci, level)
        if key not in self._kb_cache:
            nb = self.neighborhoods[ci]
            c = self.mesh.geom.corners[ci]
            lm = local_mesh(self.mesh.geom, c, nb.h_b, nb.h_a, level, self.nq)
            self._kb_cache[key] = self.scale * assemble_local(lm, ci, self.kind, self.p)
        return self._kb_cache[key]

    def compute_R(self, ci: int, n_sub: int, khat: np.ndarray = None,
                  store: bool = False) -> CompressedInverse:
        """Compressed inverse for one corner at refinement depth n_sub."""
        nb = self.neighborhoods[ci]
        n2 = 2 * self.nq
        if n_sub == 0:
            if khat is None:
                raise ValueError("n_sub = 0 requires the coarse operator")
            Kstar = khat[np.ix_(nb.dof, nb.dof)]
            R = np.linalg.inv(np.eye(4 * n2, dtype=complex) + Kstar)
            return CompressedInverse(neighborhood=nb, R=R, n_sub=0,
                                     level_solves=[] if store else None)
        pro = self.prolong(ci)
        inner = slice(n2, 5 * n2)
        Iouter = np.zeros((6 * n2, 6 * n2))
        Iouter[:n2, :n2] = np.eye(n2)
        Iouter[5 * n2:, 5 * n2:] = np.eye(n2)
        solves = [None] * n_sub if store else None
        levelR = [None] * n_sub if store else None
        R = None
        for d in range(n_sub, 0, -1):
            Kb = self.kb(ci, d)
            if d == n_sub:
                A = np.eye(6 * n2, dtype=complex) + Kb
            else:
                A = Kb.copy()
                A[inner, inner] = np.linalg.inv(R)
                A += Iouter
            AinvP = np.linalg.solve(A, pro.P.astype(complex))
            R = pro.PWT @ AinvP
            if store:
                solves[d - 1] = AinvP
                levelR[d - 1] = R
        return CompressedInverse(neighborhood=nb, R=R, n_sub=n_sub,
                                 level_solves=solves, level_R=levelR)


# ----------------------------------------------------------------------------
# module-level operations
# ----------------------------------------------------------------------------

def split_K(khat: np.ndarray, neighborhoods) -> np.ndarray:
    """K^o: the coarse operator with each corner-neighborhood block zeroed."""
    K0 = khat.copy()
    for nb in neighborhoods:
        K0[np.ix_(nb.dof, nb.dof)] = 0.0
    return K0


def compute_R(mesh: Mesh, ci: int, kind: str, scale: complex, p: ElasticParams,
              n_sub: int, khat=None, store: bool = False) -> CompressedInverse:
    comp = Compressor(mesh, kind, scale, p)
    return comp.compute_R(ci, n_sub, khat=khat, store=store)


def solve_compressed(system: asm.OperatorMatrix, p: ElasticParams, n_sub: int,
                     rhs: np.ndarray, compressor: Compressor = None,
                     store: bool = False):
    """Solve (I + K^o Rbar) phi_tilde = rhs; return (phi_hat, phi_tilde, comps).

    ``rhs`` is the normalized right-hand side (2/sigma) g, shape (2N,) or
    (2N, m).  ``phi_hat`` is the weight-corrected density used in
    representation integrals on the coarse grid.
    """
    mesh = system.mesh
    if compressor is None:
        compressor = Compressor(mesh, system.kind, 2.0 / system.sigma, p)
    comps = [compressor.compute_R(ci, n_sub, khat=system.khat, store=store)
             for ci in range(len(mesh.geom.corners))]
    N = system.khat.shape[0]
    K0 = split_K(system.khat, compressor.neighborhoods)
    # K^o Rbar differs from K^o only in the neighborhood columns
    M = np.eye(N, dtype=complex) + K0
    for cm in comps:
        dof = cm.neighborhood.dof
        M[:, dof] = K0[:, dof] @ cm.R
        M[dof, dof] += 1.0
    phi_tilde = np.linalg.solve(M, rhs)
    phi_hat = phi_tilde.copy()
    for cm in comps:
        dof = cm.neighborhood.dof
        phi_hat[dof] = cm.R @ phi_tilde[dof]
    return phi_hat, phi_tilde, comps


def reconstruct_fine(compressor: Compressor, cm: CompressedInverse,
                     phi_tilde: np.ndarray):
    """Fine-grid density near one corner from the stored level solves.

    Returns a list over levels d = 1..n_sub of (offsets_before, phi_before,
    offsets_after, phi_after): node offsets (parameter distance from the
    corner, positive numbers) and the 2-vector density on the outer panels
    of level d; the final level also yields the four innermost panels.
    """
    if cm.level_solves is None:
        raise ValueError("compressed inverse was built without store=True")
    nq = compressor.nq
    n2 = 2 * nq
    nb = cm.neighborhood
    c = compressor.mesh.geom.corners[nb.ci]
    out = []
    vec = phi_tilde[nb.dof]
    for d in range(1, cm.n_sub + 1):
        v = cm.level_solves[d - 1] @ vec
        lm = local_mesh(compressor.mesh.geom, c, nb.h_b, nb.h_a, d, nq)
        if d < cm.n_sub:
            keep = [0, 5]
            # the inner block of v is the weight-corrected density
            # R^{(d+1)} phi_tilde^{(d+1)}; undo R before descending
            vec = np.linalg.solve(cm.level_R[d], v[n2:5 * n2])
        else:
            keep = [0, 1, 2, 3, 4, 5]
        for pi in keep:
            offs = np.abs(lm.offsets[pi])
            phi = v[pi * n2:(pi + 1) * n2].reshape(nq, 2)
            speeds = lm.speed[pi]
            before = pi < 3
            out.append((d, before, offs, phi, speeds))
        if d == cm.n_sub:
            break
    return out
