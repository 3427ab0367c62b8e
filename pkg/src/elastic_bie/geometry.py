"""Boundary curves, panel meshes, and numerically stable chord evaluation.

Curves are built from smooth sides, each either a line segment or a sum of
sinusoids per coordinate, x_c(s) = sum_m A_m sin(b_m s + phi_m).  This form
gives three things cheaply and stably:

* derivatives of any order, d^k/ds^k A sin(bs + phi) = A b^k sin(bs + phi + k pi/2),
* chords by sum-to-product,  x(t) - x(s) = sum 2 A cos(b (t+s)/2 + phi) sin(b (t-s)/2),
  evaluated as (t - s) * chord_over_delta with the exact-at-zero factor
  sin(b d/2)/d, so nearby points never cancel,
* one-sided Taylor data n . x^(k) at nodes for the near-diagonal expansion of
  n(y) . (x - y), whose leading term is O(|t-s|^2).

Node parameters are stored as offsets from a per-panel reference (a corner
parameter for panels that touch a corner), so parameter differences stay
exact down to offsets of order 2^-80 during corner refinement, and positions
of deeply refined nodes are formed as corner position + stable chord.

Supported shapes (all positively oriented, outward normal n = (x2', -x1')/|x'|):

* ``circle`` / ``ellipse``: (2 alpha cos s, 2 sin s), s in [0, 2 pi),
* ``droplet``: (sin(pi s) cos(pi(s - 1/2)/2), sin(pi s) sin(pi(s - 1/2)/2)),
  s in [0, 1), one corner of opening pi/2 at the origin,
* ``sector``: a wedge of half-angle arctan(k) truncated by a unit arc,
  s in [0, 3), three corners of opening pi/2 (for k = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# highest derivative order used by near-diagonal Taylor expansions
DERIV_ORDER = 9

# switch from direct evaluation of n.(x(t)-x(s)) to its Taylor series
TAYLOR_DELTA = 1e-2


# ----------------------------------------------------------------------------
# Gauss-Legendre nodes and weights
# ----------------------------------------------------------------------------

def gauss_legendre(n: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].

    Newton iteration on P_n starting from the Chebyshev-like initial guess;
    nodes ascending, weights positive, sum of weights = 2.
    """
    if n < 1:
        raise ValueError("rule size must be positive")
    k = np.arange(1, n + 1)
    x = -np.cos(math.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return x, w


# ----------------------------------------------------------------------------
# smooth sides
# ----------------------------------------------------------------------------

@dataclass
class Side:
    """One smooth piece of the boundary, parametrized on [p0, p1]."""

    p0: float
    p1: float
    # sinusoid form: terms[c] = list of (A, b, phi) for coordinate c
    terms: tuple | None = None
    # line form: x(s) = origin + s * direction
    origin: np.ndarray | None = None
    direction: np.ndarray | None = None

    def position(self, s):
        s = np.asarray(s, dtype=float)
        if self.terms is None:
            return np.stack([self.origin[c] + s * self.direction[c] for c in (0, 1)], axis=-1)
        out = []
        for c in (0, 1):
            acc = np.zeros_like(s)
            for A, b, phi in self.terms[c]:
                acc = acc + A * np.sin(b * s + phi)
            out.append(acc)
        return np.stack(out, axis=-1)

    def deriv(self, order: int, s):
        """d^order x / ds^order, shape (..., 2)."""
        s = np.asarray(s, dtype=float)
        if self.terms is None:
            if order == 1:
                return np.broadcast_to(self.direction, s.shape + (2,)).copy()
            return np.zeros(s.shape + (2,))
        shift = order * 0.5 * math.pi
        out = []
        for c in (0, 1):
            acc = np.zeros_like(s)
            for A, b, phi in self.terms[c]:
                acc = acc + A * b ** order * np.sin(b * s + phi + shift)
            out.append(acc)
        return np.stack(out, axis=-1)

    def chord_over_delta(self, m, delta):
        """(x(m + d/2) - x(m - d/2)) / d, stable for any d including 0.

        ``m`` is the parameter midpoint (t + s)/2 and ``delta`` = t - s.
        """
        m = np.asarray(m, dtype=float)
        delta = np.asarray(delta, dtype=float)
        if self.terms is None:
            shp = np.broadcast(m, delta).shape
            return np.stack([np.broadcast_to(self.direction[c], shp).copy() for c in (0, 1)], axis=-1)
        out = []
        for c in (0, 1):
            acc = np.zeros(np.broadcast(m, delta).shape)
            for A, b, phi in self.terms[c]:
                # sin(b d / 2) / d = (b/2) sinc(b d / (2 pi)), exact at d = 0
                acc = acc + A * b * np.cos(b * m + phi) * np.sinc(b * delta / (2.0 * math.pi))
            out.append(acc)
        return np.stack(out, axis=-1)


def _sinusoid(*terms):
    return list(terms)


# ----------------------------------------------------------------------------
# corners and geometries
# ----------------------------------------------------------------------------

@dataclass
class Corner:
    position: np.ndarray
    side_before: int   # side ending at the corner
    side_after: int    # side starting at the corner
    param_before: float  # corner parameter on side_before
    param_after: float   # corner parameter on side_after
    interior_angle: float


@dataclass
class BoundaryGeometry:
    kind: str
    sides: list
    corners: list
    length: float          # parameter length of one full traversal
    periodic_smooth: bool  # closed without corners (circle / ellipse)

    def side_index_of(self, s: float) -> int:
        for i, sd in enumerate(self.sides):
            if sd.p0 <= s <= sd.p1:
                return i
        raise ValueError(f"parameter {s} outside boundary range")

    def position(self, s):
        s = np.asarray(s, dtype=float)
        if s.ndim == 0:
            return self.sides[self.side_index_of(float(s))].position(s)
        out = np.empty(s.shape + (2,))
        for i, sd in enumerate(self.sides):
            m = (s >= sd.p0) & (s <= sd.p1) if i else (s <= sd.p1)
            out[m] = sd.position(s[m])
        return out


def _corner_from_sides(sides, ib, ia, pb, pa):
    tb = sides[ib].deriv(1, np.array(pb))
    ta = sides[ia].deriv(1, np.array(pa))
    tb = tb / np.linalg.norm(tb)
    ta = ta / np.linalg.norm(ta)
    turn = math.atan2(tb[0] * ta[1] - tb[1] * ta[0], tb[0] * ta[0] + tb[1] * ta[1])
    pos = sides[ia].position(np.array(pa))
    return Corner(position=np.asarray(pos, dtype=float), side_before=ib, side_after=ia,
                  param_before=pb, param_after=pa, interior_angle=math.pi - turn)


def make_geometry(kind: str, alpha: float = 1.0, k: float = 1.0) -> BoundaryGeometry:
    """Construct one of the four supported boundary shapes.

    ``alpha`` sets the horizontal semi-axis 2*alpha for circle/ellipse;
    ``k`` is the wedge slope (half-angle arctan k) of the sector.
    """
    if kind in ("circle", "ellipse"):
        if kind == "circle" and alpha != 1.0:
            raise ValueError("circle requires alpha = 1")
        terms = (
            _sinusoid((2.0 * alpha, 1.0, 0.5 * math.pi)),  # 2 alpha cos s
            _sinusoid((2.0, 1.0, 0.0)),                    # 2 sin s
        )
        side = Side(p0=0.0, p1=2.0 * math.pi, terms=terms)
        return BoundaryGeometry(kind=kind, sides=[side], corners=[],
                                length=2.0 * math.pi, periodic_smooth=True)

    if kind == "droplet":
        # x1 = sin(pi s) cos(pi (s - 1/2)/2), x2 = sin(pi s) sin(pi (s - 1/2)/2)
        # expanded into pure sinusoids via product-to-sum.
        terms = (
            _sinusoid((0.5, 1.5 * math.pi, -0.25 * math.pi),
                      (0.5, 0.5 * math.pi, 0.25 * math.pi)),
            _sinusoid((0.5, 0.5 * math.pi, 0.25 * math.pi + 0.5 * math.pi),
                      (-0.5, 1.5 * math.pi, -0.25 * math.pi + 0.5 * math.pi)),
        )
        side = Side(p0=0.0, p1=1.0, terms=terms)
        sides = [side]
        corners = [_corner_from_sides(sides, 0, 0, 1.0, 0.0)]
        return BoundaryGeometry(kind=kind, sides=sides, corners=corners,
                                length=1.0, periodic_smooth=False)

    if kind == "sector":
        th = math.atan(k)
        beta = math.cos(th)
        s0 = Side(p0=0.0, p1=1.0, origin=np.array([0.0, 0.0]),
                  direction=np.array([beta, -beta * k]))
        s1 = Side(p0=1.0, p1=2.0, terms=(
            _sinusoid((1.0, 2.0 * th, -3.0 * th + 0.5 * math.pi)),  # cos(2 th s - 3 th)
            _sinusoid((1.0, 2.0 * th, -3.0 * th)),                  # sin(2 th s - 3 th)
        ))
        s2 = Side(p0=2.0, p1=3.0, origin=np.array([3.0 * beta, 3.0 * beta * k]),
                  direction=np.array([-beta, -beta * k]))
        sides = [s0, s1, s2]
        corners = [
            _corner_from_sides(sides, 2, 0, 3.0, 0.0),   # apex
            _corner_from_sides(sides, 0, 1, 1.0, 1.0),
            _corner_from_sides(sides, 1, 2, 2.0, 2.0),
        ]
        return BoundaryGeometry(kind=kind, sides=sides, corners=corners,
                                length=3.0, periodic_smooth=False)

    raise ValueError(f"unknown geometry kind: {kind}")


# ----------------------------------------------------------------------------
# panels and meshes
# ----------------------------------------------------------------------------

@dataclass
class Panel:
    side: int
    ref: float     # reference parameter; node parameter = ref + offset
    oa: float      # offset interval [oa, ob]
    ob: float

    @property
    def center(self):
        return 0.5 * (self.oa + self.ob)

    @property
    def halfwidth(self):
        return 0.5 * (self.ob - self.oa)


@dataclass
class Mesh:
    geom: BoundaryGeometry
    panels: list
    nq: int
    # node data, shape (npanels, nq, ...)
    offsets: np.ndarray = field(default=None, repr=False)
    x: np.ndarray = field(default=None, repr=False)        # absolute positions
    xrel: np.ndarray = field(default=None, repr=False)     # position - x(ref)
    nrm: np.ndarray = field(default=None, repr=False)
    tau: np.ndarray = field(default=None, repr=False)
    speed: np.ndarray = field(default=None, repr=False)
    w: np.ndarray = field(default=None, repr=False)        # parameter weights (incl. halfwidth)
    nd: np.ndarray = field(default=None, repr=False)       # n . x^(k), k = 2..DERIV_ORDER
    curv2: np.ndarray = field(default=None, repr=False)    # n . x'' / (2 |x'|^2)
    # adjacency: for each panel, (prev_panel, prev_rel), (next_panel, next_rel)
    # rel is None (same side, shared ref frame), ("wrap", L) or ("corner", ci)
    adj: list = field(default=None, repr=False)

    @property
    def npanels(self):
        return len(self.panels)

    @property
    def nnodes(self):
        return len(self.panels) * self.nq

    def node_params(self):
        """Absolute node parameters, shape (npanels, nq)."""
        refs = np.array([p.ref for p in self.panels])[:, None]
        return refs + self.offsets


def _panel_node_data(geom: BoundaryGeometry, panels, nq: int):
    gx, gw = gauss_legendre(nq)
    P = len(panels)
    offs = np.empty((P, nq))
    x = np.empty((P, nq, 2))
    xrel = np.empty((P, nq, 2))
    nrm = np.empty((P, nq, 2))
    tau = np.empty((P, nq, 2))
    speed = np.empty((P, nq))
    w = np.empty((P, nq))
    nd = np.empty((P, nq, DERIV_ORDER - 1))
    for i, p in enumerate(panels):
        side = geom.sides[p.side]
        z = p.center + p.halfwidth * gx
        offs[i] = z
        s = p.ref + z
        d1 = side.deriv(1, s)
        sp = np.hypot(d1[:, 0], d1[:, 1])
        tau[i] = d1 / sp[:, None]
        nrm[i] = np.stack([d1[:, 1], -d1[:, 0]], axis=-1) / sp[:, None]
        speed[i] = sp
        w[i] = gw * p.halfwidth
        # position relative to the reference parameter, then absolute
        cod = side.chord_over_delta(p.ref + 0.5 * z, z)
        xrel[i] = z[:, None] * cod
        x[i] = side.position(np.array(p.ref)) + xrel[i]
        for korder in range(2, DERIV_ORDER + 1):
            dk = side.deriv(korder, s)
            nd[i, :, korder - 2] = np.einsum("ij,ij->i", nrm[i], dk)
    curv2 = nd[:, :, 0] / (2.0 * speed ** 2)
    return offs, x, xrel, nrm, tau, speed, w, nd, curv2


def _finalize_mesh(geom, panels, nq):
    offs, x, xrel, nrm, tau, speed, w, nd, curv2 = _panel_node_data(geom, panels, nq)
    mesh = Mesh(geom=geom, panels=panels, nq=nq, offsets=offs, x=x, xrel=xrel,
                nrm=nrm, tau=tau, speed=speed, w=w, nd=nd, curv2=curv2)
    mesh.adj = _adjacency(geom, panels)
    return mesh


def _adjacency(geom: BoundaryGeometry, panels):
    """Neighbor relations in traversal order (panels are built in order)."""
    P = len(panels)
    adj = []
    for i in range(P):
        ip = (i - 1) % P
        inx = (i + 1) % P
        adj.append([(ip, _relation(geom, panels[ip], panels[i])),
                    (inx, _relation(geom, panels[i], panels[inx]))])
    return adj


def _relation(geom, pa, pb):
    """Relation for consecutive panels pa -> pb (pa ends where pb starts)."""
    ea = pa.ref + pa.ob
    sb = pb.ref + pb.oa
    if pa.side == pb.side and abs(ea - sb) < 1e-12:
        return None
    if geom.periodic_smooth:
        return ("wrap", geom.length)
    for ci, c in enumerate(geom.corners):
        if (pa.side == c.side_before and abs(ea - c.param_before) < 1e-12
                and pb.side == c.side_after and abs(sb - c.param_after) < 1e-12):
            return ("corner", ci)
    raise ValueError("inconsistent panel ordering: no relation between neighbors")


def build_coarse_mesh(geom: BoundaryGeometry, npanels, nq: int = 16) -> Mesh:
    """Uniform-in-parameter panels, ``npanels`` per side (int or list).

    Panels that touch a corner use the corner parameter as their reference,
    so their node offsets stay exact under later dyadic refinement.  Sides
    touching corners need at least 4 panels (two per corner neighborhood).
    """
    if isinstance(npanels, int):
        npanels = [npanels] * len(geom.sides)
    panels = []
    for i, (sd, n) in enumerate(zip(geom.sides, npanels)):
        touches = bool(geom.corners) and not geom.periodic_smooth
        if touches and n < 4:
            raise ValueError("sides touching corners need at least 4 panels")
        h = (sd.p1 - sd.p0) / n
        for j in range(n):
            if touches and j >= n // 2:
                ref = sd.p1
                panels.append(Panel(side=i, ref=ref, oa=(j - n) * h, ob=(j + 1 - n) * h))
            else:
                ref = sd.p0
                panels.append(Panel(side=i, ref=ref, oa=j * h, ob=(j + 1) * h))
    return _finalize_mesh(geom, panels, nq)


def refine_dyadic(mesh: Mesh, n_sub: int) -> Mesh:
    """Subdivide the panels nearest each corner ``n_sub`` times toward it.

    Each corner-adjacent panel of parameter length h is replaced by the
    graded family of lengths h/2, h/4, ..., h 2^-n_sub, h 2^-n_sub.  The
    total parameter measure is preserved exactly (offsets are scaled by
    powers of two).
    """
    if n_sub < 0:
        raise ValueError("n_sub must be nonnegative")
    geom = mesh.geom
    if n_sub == 0 or not geom.corners:
        return _finalize_mesh(geom, list(mesh.panels), mesh.nq)
    panels = []
    for i, p in enumerate(mesh.panels):
        prel = mesh.adj[i][0][1]
        nrel = mesh.adj[i][1][1]
        starts_at_corner = prel is not None and prel[0] == "corner"
        ends_at_corner = nrel is not None and nrel[0] == "corner"
        if ends_at_corner:
            # panel [oa, 0] with ref at the corner: grade toward ob = 0
            assert p.ob == 0.0
            edges = [p.oa] + [p.oa * 2.0 ** (-j) for j in range(1, n_sub + 1)] + [0.0]
            for a, b in zip(edges[:-1], edges[1:]):
                panels.append(Panel(side=p.side, ref=p.ref, oa=a, ob=b))
        elif starts_at_corner:
            assert p.oa == 0.0
            edges = [0.0] + [p.ob * 2.0 ** (-j) for j in range(n_sub, 0, -1)] + [p.ob]
            for a, b in zip(edges[:-1], edges[1:]):
                panels.append(Panel(side=p.side, ref=p.ref, oa=a, ob=b))
        else:
            panels.append(p)
    return _finalize_mesh(geom, panels, mesh.nq)
