"""Semi-flat Kahler-Einstein model built from a Monge-Ampere solution.

On ``B x i R^s`` with complex coordinates ``w = x + i theta`` the potential
``phi(x)`` defines ``omega = 2i d dbar phi`` with Riemannian form
``sum phi_ij (dx_i dx_j + dtheta_i dtheta_j)``. The torus fibres have
period ``2 pi / (-log|t|)`` in each ``theta_j``, so they shrink like
``1/(-log|t|)`` while the base metric ``sum phi_ij dx_i dx_j`` is fixed.

Angles vs. fibre coordinates: a point of the total space is given here by a
base point and the arguments ``arg z_j`` in radians; the fibre coordinate is
``theta_j = arg z_j / (-log|t|)`` up to sign, which is what lets a fixed pair
of points be compared across different ``t``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline, LinearNDInterpolator
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import Voronoi

from .errors import (
    BoundaryTooClose,
    DegenerateParameter,
    DimensionMismatch,
    LossOfConvexity,
    ValidationError,
    ZeroForm,
)
from .mongeampere import MASolution, assemble_hessian, barrier_hessian, hessian_field

# (Ric + omega)_{i jbar} in the basis sqrt(-1) dw_i ^ dwbar_j equals
# RICCI_FORM_FACTOR * d^2/dx_i dx_j (log det D^2 phi - 2 phi) for x-only
# potentials: d/dw d/dwbar = (1/4) d^2/dx^2 and omega = 2 sqrt(-1) d dbar phi.
RICCI_FORM_FACTOR = -0.25


class HessianInterpolator:
    """Evaluate the base Hessian off the grid.

    The smooth part ``D^2 phi - D^2 b`` (``b`` the boundary barrier) is
    interpolated and the barrier Hessian is added back analytically, which
    keeps the ``1/dist^2`` blow-up exact near the boundary.
    """

    def __init__(self, sol: MASolution):
        if sol.grid is None:
            raise ValidationError("empty solution has no metric")
        hess = hessian_field(sol)
        ev = np.all(np.isfinite(hess.reshape(len(hess), -1)), axis=1)
        self.domain = sol.grid.domain
        self.dim = sol.dim
        pts = sol.points[ev]
        reg = (hess[ev] - barrier_hessian(self.domain, pts)).reshape(len(pts), -1)
        self.lo_slack = float(sol.grid.slack[ev].min())
        if self.dim == 1:
            self._spline = CubicSpline(pts[:, 0], reg[:, 0])
            self._range = (pts[0, 0], pts[-1, 0])
        else:
            self._lin = LinearNDInterpolator(pts, reg)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = self.dim
        if s == 1:
            xs = x[:, 0]
            if np.any(xs < self._range[0] - 1e-12) or np.any(xs > self._range[1] + 1e-12):
                raise BoundaryTooClose("point lies outside the evaluable node range")
            reg = self._spline(xs).reshape(-1, 1)
        else:
            reg = self._lin(x)
            if np.any(~np.isfinite(reg)):
                raise BoundaryTooClose("point lies outside the evaluable node hull")
        return reg.reshape(-1, s, s) + barrier_hessian(self.domain, x)


@dataclass(frozen=True, eq=False)
class SemiflatMetric:
    base: MASolution
    t_abs: float
    hessian: HessianInterpolator

    @property
    def torus_period(self) -> float:
        return 2.0 * math.pi / (-math.log(self.t_abs))

    @property
    def dim(self) -> int:
        return self.base.dim

    def base_hessian(self, x) -> np.ndarray:
        """Base Hessian at a point (exact at nodes, interpolated elsewhere)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        try:
            i = self.base.grid.node_of(x)
        except ValidationError:
            return self.hessian(x)[0]
        return np.array(self.base.hessians[i])

    def metric(self, x) -> np.ndarray:
        """The 2s x 2s matrix of ``g`` in coordinates ``(x, theta)``: diag(H, H)."""
        h = self.base_hessian(x)
        s = self.dim
        g = np.zeros((2 * s, 2 * s))
        g[:s, :s] = h
        g[s:, s:] = h
        return g

    def kahler_form_on_fiber(self, x) -> np.ndarray:
        """Matrix of ``omega`` restricted to the fibre tangent space ``span(d/dtheta)``.

        ``omega = sum H_ij dx_i ^ dtheta_j`` has no ``dtheta ^ dtheta`` part.
        """
        return self.symplectic_matrix(x)[self.dim:, self.dim:]

    def symplectic_matrix(self, x) -> np.ndarray:
        """Antisymmetric matrix of ``omega`` in coordinates ``(x, theta)``."""
        h = self.base_hessian(x)
        s = self.dim
        w = np.zeros((2 * s, 2 * s))
        w[:s, s:] = h
        w[s:, :s] = -h.T
        return w


def semiflat_metric(sol: MASolution, t_abs: float) -> SemiflatMetric:
    if not (0.0 < t_abs < 1.0):
        raise DegenerateParameter(f"|t| = {t_abs} is not in (0, 1)")
    if sol.grid is None:
        raise ValidationError("empty solution has no metric")
    ev = np.all(np.isfinite(sol.hessians.reshape(len(sol.hessians), -1)), axis=1)
    eig = np.linalg.eigvalsh(sol.hessians[ev])
    if np.any(eig <= 0):
        raise LossOfConvexity("base Hessian is not positive definite")
    return SemiflatMetric(sol, float(t_abs), HessianInterpolator(sol))


def einstein_quantity(sol: MASolution) -> np.ndarray:
    """``log det H - 2 phi`` per node; equals ``log kappa`` for an exact solution."""
    hess = hessian_field(sol)
    with np.errstate(invalid="ignore"):
        return np.log(np.linalg.det(hess)) - 2.0 * sol.values


def ricci_residual(m: SemiflatMetric | MASolution, points, min_slack_steps: int = 5,
                   outer_spacing: float = 0.01) -> float:
    """Sup over sample nodes of ``max_ij |d_ij (log det H - 2 phi)|``.

    Zero exactly when ``Ric(omega) = -omega``; multiply by
    :data:`RICCI_FORM_FACTOR` to get the coefficients of ``Ric + omega``.
    Samples must be nodes at slack at least ``min_slack_steps * h``.

    The outer second difference uses a stride of ``round(outer_spacing / h)``
    nodes (at least one): the inner Hessian already carries rounding noise
    of order ``eps / h^2``, and differencing it again at spacing ``h`` would
    amplify that by another ``1 / h^2``.
    """
    sol = m.base if isinstance(m, SemiflatMetric) else m
    grid = sol.grid
    q = einstein_quantity(sol)
    stride = max(1, int(round(outer_spacing / grid.h)))
    step = stride * grid.h
    idx = []
    for p in np.atleast_2d(np.asarray(points, dtype=float)):
        i = grid.node_of(p)
        if grid.slack[i] < min_slack_steps * grid.h * (1 - 1e-9):
            raise BoundaryTooClose(f"sample {p} is closer than {min_slack_steps}h to the boundary")
        idx.append(i)
    idx = np.array(idx)
    r = grid.resolution
    nb = []
    for sign in (1, -1):
        k = grid.index[idx][:, None, :] + sign * stride * grid.directions[None, :, :]
        ok = np.all((k >= 0) & (k <= r), axis=2)
        j = np.full(ok.shape, -1)
        j[ok] = grid.lookup[tuple(k[ok].T)]
        nb.append(j)
    if np.any(nb[0] < 0) or np.any(nb[1] < 0):
        raise BoundaryTooClose("outer stencil leaves the node set; use a smaller outer_spacing")
    a = (q[nb[0]] + q[nb[1]] - 2.0 * q[idx][:, None]) / step ** 2
    d2q = assemble_hessian(a, grid.dim)
    if not np.all(np.isfinite(d2q)):
        raise BoundaryTooClose("sample stencil reaches non-evaluable nodes")
    return float(np.max(np.abs(d2q)))


# ---------------------------------------------------------------------------
# fibres
# ---------------------------------------------------------------------------

def torus_covering_radius(hess: np.ndarray, period: float, search: int = 3) -> float:
    """Diameter of the flat torus ``R^s / (period Z^s)`` with metric ``hess``.

    Equals the covering radius of the lattice: the largest distance from the
    origin to a vertex of its Voronoi cell. Lattice points with coefficients
    in ``[-search, search]`` feed the Voronoi computation.
    """
    hess = np.atleast_2d(np.asarray(hess, dtype=float))
    s = hess.shape[0]
    if s == 1:
        return 0.5 * period * math.sqrt(hess[0, 0])
    chol = np.linalg.cholesky(hess)  # |v|_H = |chol^T v|
    gen = period * chol.T
    coeffs = np.array(list(itertools.product(range(-search, search + 1), repeat=s)))
    pts = coeffs @ gen.T
    vor = Voronoi(pts)
    origin = int(np.flatnonzero(np.all(coeffs == 0, axis=1))[0])
    region = vor.regions[vor.point_region[origin]]
    if -1 in region or not region:
        raise ValidationError("Voronoi cell of the origin is unbounded; enlarge search")
    return float(np.max(np.linalg.norm(vor.vertices[region], axis=1)))


def fiber_diameter(m: SemiflatMetric, x) -> float:
    """Diameter of the fibre torus over ``x`` (scales exactly like ``1/(-log|t|)``)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if m.base.grid.domain.slack(x) < m.base.grid.h * (1 - 1e-9):
        raise BoundaryTooClose(f"base point {x} is outside the node region")
    return torus_covering_radius(m.base_hessian(x), m.torus_period)


def fiber_distance(hess: np.ndarray, period: float, dtheta, search: int = 2) -> float:
    """Flat-torus distance of a fibre displacement (shortest lattice translate)."""
    hess = np.atleast_2d(hess)
    d = np.asarray(dtheta, dtype=float).reshape(-1)
    d = d - period * np.round(d / period)
    s = len(d)
    ks = np.array(list(itertools.product(range(-search, search + 1), repeat=s)))
    cand = d[None, :] + period * ks
    return float(np.sqrt(np.min(np.einsum("ni,ij,nj->n", cand, hess, cand))))


# ---------------------------------------------------------------------------
# base distances
# ---------------------------------------------------------------------------

def _neighbour_offsets(s: int) -> np.ndarray:
    """Primitive integer offsets with max-norm <= 2 (16 in the plane)."""
    offs = [v for v in itertools.product(range(-2, 3), repeat=s)
            if any(v) and math.gcd(*v) == 1]
    return np.array(offs, dtype=int)


class BaseGraph:
    """Shortest paths for ``g_B = sum phi_ij dx_i dx_j`` on the node set.

    In one dimension distances are integrals of ``sqrt(phi'')`` (composite
    Simpson per cell with midpoint values from the interpolator). In higher
    dimensions they are graph distances over the primitive offsets of
    max-norm 2, each edge weighted by its length in the mean of the
    endpoint metrics.
    """

    def __init__(self, sol: MASolution, interp: HessianInterpolator | None = None):
        self.sol = sol
        self.grid = grid = sol.grid
        self.interp = interp or HessianInterpolator(sol)
        hess = np.array(sol.hessians)
        if grid.dim == 1:
            x = grid.points[:, 0]
            mid = 0.5 * (x[1:] + x[:-1])
            f_nodes = np.sqrt(hess[:, 0, 0])
            f_mid = np.sqrt(self.interp(mid[:, None])[:, 0, 0])
            cells = (x[1:] - x[:-1]) / 6.0 * (f_nodes[:-1] + 4 * f_mid + f_nodes[1:])
            self.cumulative = np.concatenate([[0.0], np.cumsum(cells)])
            self.matrix = None
            return
        r = grid.resolution
        rows, cols, wts = [], [], []
        for off in _neighbour_offsets(grid.dim):
            q = grid.index + off
            ok = np.all((q >= 0) & (q <= r), axis=1)
            j = np.full(len(grid), -1)
            j[ok] = grid.lookup[tuple(q[ok].T)]
            have = j >= 0
            i = np.flatnonzero(have)
            j = j[have]
            hm = 0.5 * (hess[i] + hess[j])
            vec = off * grid.h
            w = np.sqrt(np.einsum("i,nij,j->n", vec, hm, vec))
            rows.append(i); cols.append(j); wts.append(w)
        self.matrix = csr_matrix((np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(len(grid), len(grid)))

    def distances_from(self, i: int) -> np.ndarray:
        if self.matrix is None:
            return np.abs(self.cumulative - self.cumulative[i])
        return dijkstra(self.matrix, directed=False, indices=int(i))

    def node(self, p) -> int:
        p = np.asarray(p, dtype=float).reshape(-1)
        if len(p) != self.grid.dim:
            raise DimensionMismatch("point dimension does not match the base")
        if self.grid.domain.slack(p) < self.grid.h * (1 - 1e-9):
            raise BoundaryTooClose(f"point {p} is outside the node region")
        return self.grid.node_of(p)


def base_distance(sol: MASolution, p, q, graph: BaseGraph | None = None) -> float:
    """Geodesic distance of the base metric between two interior points.

    One dimension: adaptive quadrature of ``sqrt(phi'')`` (any interior
    points). Higher dimensions: graph distance between grid nodes.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    if sol.dim == 1:
        interp = graph.interp if graph is not None else HessianInterpolator(sol)
        for z in (p, q):
            if sol.grid.domain.slack(z) < sol.grid.h * (1 - 1e-9):
                raise BoundaryTooClose(f"point {z} is outside the node region")
        a, b = sorted((p[0], q[0]))
        if a == b:
            return 0.0
        val, _ = integrate.quad(lambda x: math.sqrt(interp([[x]])[0, 0, 0]), a, b,
                                limit=400, epsabs=1e-12, epsrel=1e-10)
        return float(val)
    graph = graph or BaseGraph(sol)
    i, j = graph.node(p), graph.node(q)
    return float(graph.distances_from(i)[j])


def segment_length(sol: MASolution, p, q, interp: HessianInterpolator | None = None) -> float:
    """Length of the straight segment ``p -> q`` in the base metric (quadrature)."""
    interp = interp or HessianInterpolator(sol)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = q - p

    def speed(s):
        h = interp((p + s * d)[None, :])[0]
        return math.sqrt(d @ h @ d)

    val, _ = integrate.quad(speed, 0.0, 1.0, limit=400, epsabs=1e-12, epsrel=1e-10)
    return float(val)


@dataclass(frozen=True)
class PairDiscrepancy:
    d_total: float
    d_base: float
    via: np.ndarray
    bound: float

    @property
    def discrepancy(self) -> float:
        return abs(self.d_total - self.d_base)


def gh_discrepancy(m: SemiflatMetric, pairs, graph: BaseGraph | None = None):
    """Compare total-space and base distances for pairs of points.

    Each pair is ``((x, angles_x), (y, angles_y))`` with base nodes ``x, y``
    and angle vectors in radians. The total-space distance is the product
    path bound: travel in the base to some node ``z``, move within the fibre
    over ``z``, travel on to ``y``; minimized over ``z``. It is at least the
    base distance (projection is 1-Lipschitz) and exceeds it by at most the
    fibre distance over ``x``.

    Returns ``(sup_discrepancy, list_of_PairDiscrepancy)``.
    """
    graph = graph or BaseGraph(m.base, m.hessian)
    sol = m.base
    period = m.torus_period
    hess = np.array(sol.hessians)
    results = []
    for (x, ax), (y, ay) in pairs:
        i, j = graph.node(x), graph.node(y)
        dx, dy = graph.distances_from(i), graph.distances_from(j)
        dtheta = (np.asarray(ay, dtype=float) - np.asarray(ax, dtype=float)) * period / (2 * math.pi)
        d_base = float(dx[j])
        slack = dx + dy - d_base
        # fibre moves are only worth it where the detour is cheaper than a fibre diameter
        diam_bound = 0.5 * period * math.sqrt(sol.dim) * math.sqrt(float(np.max(np.linalg.eigvalsh(hess[i]))))
        cand = np.flatnonzero(slack <= diam_bound * (1 + 1e-12))
        fib = np.array([fiber_distance(hess[z], period, dtheta) for z in cand])
        k = int(np.argmin(slack[cand] + fib))
        z = int(cand[k])
        d_total = float(dx[z] + dy[z] + fib[k])
        bound = 2.0 * max(torus_covering_radius(hess[w], period) for w in {i, j, z})
        results.append(PairDiscrepancy(d_total, d_base, sol.points[z].copy(), bound))
    sup = max((r.discrepancy for r in results), default=0.0)
    return sup, results


# ---------------------------------------------------------------------------
# flat-model special Lagrangian conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatLimitData:
    """Frozen-coefficient limit: ``omega = sum H_ij dx_i ^ dtheta_j`` and
    ``Omega = zeta0 dw_1 ^ ... ^ dw_n``."""

    dim: int
    hessian_at_p: np.ndarray
    zeta0: complex
    phase: float

    def __post_init__(self):
        h = np.asarray(self.hessian_at_p, dtype=float)
        if h.shape != (self.dim, self.dim):
            raise DimensionMismatch("hessian shape does not match dim")
        if not np.allclose(h, h.T) or np.any(np.linalg.eigvalsh(h) <= 0):
            raise ValidationError("hessian_at_p must be symmetric positive definite")
        if self.zeta0 == 0:
            raise ZeroForm("zeta0 must be nonzero")
        object.__setattr__(self, "hessian_at_p", h)

    @classmethod
    def with_special_phase(cls, hessian, zeta0: complex) -> "FlatLimitData":
        h = np.atleast_2d(np.asarray(hessian, dtype=float))
        return cls(h.shape[0], h, complex(zeta0), special_phase(zeta0, h.shape[0]))


def special_phase(zeta0: complex, n: int) -> float:
    """The phase in ``[0, pi)`` making ``e^{i phase} zeta0 i^n`` real."""
    zeta0 = complex(zeta0)
    if zeta0 == 0:
        raise ZeroForm("zeta0 must be nonzero")
    theta = math.fmod(-math.atan2(zeta0.imag, zeta0.real) - n * math.pi / 2, math.pi)
    if theta < 0:
        theta += math.pi
    if theta >= math.pi or math.isclose(theta, math.pi, rel_tol=0, abs_tol=1e-15):
        theta = 0.0
    return theta


def special_defect(f: FlatLimitData, base_point, tilt) -> tuple[float, float]:
    """Lagrangian and phase defects of the affine torus with tangent frame
    ``d/dtheta_i + sum_k tilt[k, i] d/dx_k`` through ``base_point``.

    The frame has ``dw(v_i) = tilt[:, i] + i e_i``, so
    ``omega(v_i, v_j) = (tilt^T H - H tilt)_ij`` and
    ``Omega(v_1..v_n) = zeta0 det(tilt + i I)``.
    """
    base_point = np.asarray(base_point, dtype=float).reshape(-1)
    tilt = np.asarray(tilt, dtype=float)
    n = f.dim
    if tilt.shape != (n, n) or base_point.shape != (n,):
        raise DimensionMismatch(f"torus of dimension {tilt.shape} / {base_point.shape} in a "
                                f"dimension-{n} model")
    h = f.hessian_at_p
    omega = tilt.T @ h - h @ tilt
    lagrangian = float(np.max(np.abs(omega))) if n else 0.0
    vol = f.zeta0 * np.linalg.det(tilt + 1j * np.eye(n))
    imaginary = abs((np.exp(1j * f.phase) * vol).imag)
    return lagrangian, float(imaginary)
