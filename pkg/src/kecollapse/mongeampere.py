"""Real Monge-Ampere solver for ``det D^2 phi = kappa exp(2 phi)`` on an
open simplex with ``phi -> +inf`` at the boundary.

Discretization
--------------
Nodes are the points of the lattice ``h Z^s`` whose defining-inequality
slacks are all at least ``h``. Second derivatives are taken along the edge
directions of the simplex (``e_i`` and ``e_i - e_j``); the mixed derivative
is recovered as ``phi_ij = (phi_ii + phi_jj - D_{e_i - e_j} phi) / 2``. This
stencil set is permuted, not distorted, by the affine symmetries of the
simplex, so the discrete solution inherits them to rounding error.

Three operator modes share that stencil:

``barrier``
    The unknown is the bounded correction ``psi = phi - b`` with the barrier
    ``b = -sum(log l_k)`` over the defining affine functions ``l_k``. Its
    Hessian is added analytically and only ``psi`` is differenced. A missing
    neighbour takes the value of the centre node (zero one-sided slope).
``exhaustion``
    The unknown is ``phi`` itself with a constant Dirichlet value ``M`` at
    missing neighbours; ``M`` runs through a schedule ``4, 8, 12, ...``.
``samples``
    Plain central differences of given values; nodes with a missing
    neighbour are not evaluable. Used for oracles and externally built fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DomainViolation,
    LossOfConvexity,
    NewtonDiverged,
    ResolutionTooCoarse,
    ValidationError,
)
from .toric import SimplexDomain

MODES = ("barrier", "exhaustion", "samples")
DEFAULT_TOL = 1e-6
MAX_NEWTON = 60
# slack used for the "interior compact" of the exhaustion stopping rule
INTERIOR_SLACK = 0.05


def closed_form_1d(kappa, x):
    """Exact one-dimensional solution ``-log(sqrt(kappa)/pi * sin(pi x))``."""
    x = np.asarray(x, dtype=float)
    if kappa <= 0:
        raise DomainViolation("kappa must be positive")
    if np.any((x <= 0) | (x >= 1)):
        raise DomainViolation("closed form is defined on (0, 1) only")
    out = -np.log(math.sqrt(kappa) / math.pi * np.sin(math.pi * x))
    return float(out) if out.ndim == 0 else out


def edge_directions(s: int) -> np.ndarray:
    dirs = [np.eye(s, dtype=int)[i] for i in range(s)]
    for i in range(s):
        for j in range(i + 1, s):
            dirs.append(np.eye(s, dtype=int)[i] - np.eye(s, dtype=int)[j])
    return np.array(dirs, dtype=int).reshape(len(dirs), s)


class GridSpec:
    """Uniform grid of spacing ``1/resolution`` inside a simplex domain."""

    def __init__(self, domain: SimplexDomain, resolution: int):
        if domain.dim < 1:
            raise ValidationError("grids need a domain of dimension >= 1")
        if resolution < 8:
            raise ResolutionTooCoarse(f"resolution {resolution} < 8")
        self.domain = domain
        self.resolution = int(resolution)
        self.h = 1.0 / self.resolution
        s, r = domain.dim, self.resolution
        mesh = np.indices((r + 1,) * s).reshape(s, -1).T  # lexicographic
        slack = domain.slack(mesh * self.h)
        keep = slack >= self.h * (1 - 1e-9)
        self.index = mesh[keep]
        if len(self.index) == 0:
            raise ResolutionTooCoarse("grid has no interior nodes")
        self.lookup = np.full((r + 1,) * s, -1, dtype=np.int64)
        self.lookup[tuple(self.index.T)] = np.arange(len(self.index))
        self.points = self.index * self.h

    @property
    def dim(self) -> int:
        return self.domain.dim

    def __len__(self) -> int:
        return len(self.index)

    @cached_property
    def slack(self) -> np.ndarray:
        return self.domain.slack(self.points)

    @cached_property
    def directions(self) -> np.ndarray:
        return edge_directions(self.dim)

    @cached_property
    def neighbours(self) -> tuple[np.ndarray, np.ndarray]:
        """(plus, minus) neighbour indices per node and direction, -1 if absent."""
        r = self.resolution
        plus = np.empty((len(self), len(self.directions)), dtype=np.int64)
        minus = np.empty_like(plus)
        for k, d in enumerate(self.directions):
            for out, sign in ((plus, 1), (minus, -1)):
                q = self.index + sign * d
                ok = np.all((q >= 0) & (q <= r), axis=1)
                out[:, k] = -1
                out[ok, k] = self.lookup[tuple(q[ok].T)]
        return plus, minus

    def node_of(self, x, tol: float = 1e-9) -> int:
        """Index of the node at point ``x`` (must coincide with a node)."""
        q = np.rint(np.asarray(x, dtype=float) / self.h).astype(int)
        if np.max(np.abs(q * self.h - np.asarray(x, dtype=float))) > tol or np.any(q < 0) \
                or np.any(q > self.resolution):
            raise ValidationError(f"point {x} is not a grid node")
        i = int(self.lookup[tuple(q)])
        if i < 0:
            raise ValidationError(f"point {x} is not a grid node")
        return i

    def nearest_node(self, x) -> int:
        d = np.linalg.norm(self.points - np.asarray(x, dtype=float), axis=1)
        return int(np.argmin(d))


def barrier(domain: SimplexDomain, x) -> np.ndarray:
    """``-sum(log l_k(x))`` over the affine functions cutting out the domain."""
    sl = domain.slacks(x)
    return -np.log(sl).sum(axis=-1)


def barrier_hessian(domain: SimplexDomain, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = x.shape[1]
    sl = domain.slacks(x)
    out = np.einsum("n,ij->nij", 1.0 / sl[:, 0] ** 2, np.ones((s, s)))
    out[:, np.arange(s), np.arange(s)] += 1.0 / sl[:, 1:] ** 2
    return out


def _barrier_directional(domain: SimplexDomain, x, dirs) -> np.ndarray:
    sl = domain.slacks(x)  # column 0 is 1 - margin - sum(x), gradient -1
    grads = np.vstack([-np.ones(dirs.shape[1]), np.eye(dirs.shape[1])])  # (s+1, s)
    proj = dirs @ grads.T  # (ndirs, s+1)
    return np.einsum("nk,dk->nd", 1.0 / sl ** 2, proj ** 2)


def assemble_hessian(a: np.ndarray, s: int) -> np.ndarray:
    """Hessians from directional second derivatives ordered as edge_directions(s)."""
    n = a.shape[0]
    hess = np.empty((n, s, s))
    k = s
    for i in range(s):
        hess[:, i, i] = a[:, i]
    for i in range(s):
        for j in range(i + 1, s):
            hij = 0.5 * (a[:, i] + a[:, j] - a[:, k])
            hess[:, i, j] = hess[:, j, i] = hij
            k += 1
    return hess


def _adjugate(hess: np.ndarray) -> np.ndarray:
    s = hess.shape[1]
    if s == 1:
        return np.ones_like(hess)
    if s == 2:
        adj = np.empty_like(hess)
        adj[:, 0, 0] = hess[:, 1, 1]
        adj[:, 1, 1] = hess[:, 0, 0]
        adj[:, 0, 1] = -hess[:, 1, 0]
        adj[:, 1, 0] = -hess[:, 0, 1]
        return adj
    c0, c1, c2 = hess[:, :, 0], hess[:, :, 1], hess[:, :, 2]
    # rows of the adjugate are cross products of columns
    return np.stack([np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)], axis=1)


def _is_spd(hess: np.ndarray) -> np.ndarray:
    ok = np.ones(hess.shape[0], dtype=bool)
    with np.errstate(invalid="ignore"):
        for k in range(1, hess.shape[1] + 1):
            ok &= np.linalg.det(hess[:, :k, :k]) > 0
    return ok


class _Operator:
    """Discrete Monge-Ampere operator for one grid, mode and kappa.

    Each directional second difference is a fixed sparse matrix ``S_d`` plus
    a constant vector (Dirichlet ghosts, analytic barrier term), so the
    residual and the Newton matrix share one stencil definition.
    """

    def __init__(self, grid: GridSpec, mode: str, kappa: float, boundary_value: float | None = None):
        if mode not in MODES:
            raise ValidationError(f"unknown mode {mode!r}")
        self.grid, self.mode, self.kappa = grid, mode, float(kappa)
        self.boundary_value = boundary_value
        plus, minus = grid.neighbours
        n = len(grid)
        if mode == "barrier":
            self.b = barrier(grid.domain, grid.points)
            const = _barrier_directional(grid.domain, grid.points, grid.directions)
        else:
            self.b = np.zeros(n)
            const = np.zeros((n, len(grid.directions)))
        if mode == "samples":
            self.evaluable = np.all(plus >= 0, axis=1) & np.all(minus >= 0, axis=1)
        else:
            self.evaluable = np.ones(n, dtype=bool)
        h2 = grid.h ** 2
        ar = np.arange(n)
        self.stencils = []
        for d in range(len(grid.directions)):
            p, m = plus[:, d], minus[:, d]
            rows, cols, vals = [ar], [ar], [np.full(n, -2.0)]
            for nb in (p, m):
                have = nb >= 0
                rows.append(ar[have]); cols.append(nb[have]); vals.append(np.ones(have.sum()))
                miss = ~have
                if mode == "exhaustion":
                    const[miss, d] += boundary_value / h2
                elif mode == "barrier":
                    self._close(miss, rows, cols, vals)
            mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(n, n)) / h2
            self.stencils.append(mat)
        self.const = const

    @staticmethod
    def _close(miss, rows, cols, vals):
        # barrier closure: a missing neighbour takes the centre value, i.e. a
        # zero one-sided slope of the correction at the grid boundary
        ar = np.flatnonzero(miss)
        rows.append(ar); cols.append(ar); vals.append(np.ones(len(ar)))

    def phi(self, u: np.ndarray) -> np.ndarray:
        return u + self.b if self.mode == "barrier" else u.copy()

    def directional(self, u: np.ndarray) -> np.ndarray:
        a = np.column_stack([st @ u for st in self.stencils]) + self.const
        if self.mode == "samples":
            a[~self.evaluable] = np.nan
        return a

    def hessians(self, u: np.ndarray) -> np.ndarray:
        return assemble_hessian(self.directional(u), self.grid.dim)

    def residual(self, u: np.ndarray) -> np.ndarray:
        """Relative residual ``|det H - kappa e^{2 phi}| / (kappa e^{2 phi})``; NaN where not evaluable."""
        hess = self.hessians(u)
        rhs = self.kappa * np.exp(2.0 * self.phi(u))
        with np.errstate(invalid="ignore"):
            res = np.abs(np.linalg.det(hess) - rhs) / rhs
        res[~self.evaluable] = np.nan
        return res

    def log_residual(self, u: np.ndarray) -> np.ndarray:
        """``log det H - log kappa - 2 phi``; NaN where H is not positive definite."""
        hess = self.hessians(u)
        det = np.linalg.det(hess)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.log(det) - math.log(self.kappa) - 2.0 * self.phi(u)
        out[~(_is_spd(hess))] = np.nan
        return out

    def newton_system(self, u: np.ndarray):
        """Linearization of the log form: ``(H^{-1} : D^2 d) - 2 d = -(log det H - log kappa - 2 phi)``.

        Up to the positive row scale ``det H`` this is the cofactor
        linearization ``cof(H) : D^2 d - 2 kappa e^{2 phi} d`` at a solution.
        """
        s = self.grid.dim
        hess = self.hessians(u)
        det = np.linalg.det(hess)
        adj = _adjugate(hess)
        # d det / d a_dir for each edge direction
        coef = [adj[:, i, :].sum(axis=1) for i in range(s)]
        coef += [-adj[:, i, j] for i in range(s) for j in range(i + 1, s)]
        jac = sp.diags(np.full(len(u), -2.0))
        for c, st in zip(coef, self.stencils):
            jac = jac + sp.diags(c / det) @ st
        f = np.log(det) - math.log(self.kappa) - 2.0 * self.phi(u)
        return sp.csc_matrix(jac), f


@dataclass(frozen=True)
class ResidualReport:
    field: np.ndarray
    sup: float
    mean: float
    argmax: np.ndarray | None


@dataclass(frozen=True, eq=False)
class MASolution:
    """Grid-sampled convex solution of ``det D^2 phi = kappa e^{2 phi}``."""

    grid: GridSpec
    kappa: float
    values: np.ndarray
    hessians: np.ndarray
    residual_sup: float
    newton_iters: int
    mode: str
    unknowns: np.ndarray
    boundary_value: float | None = None
    tol: float = DEFAULT_TOL
    trace: tuple = field(default=())

    def __post_init__(self):
        for arr in (self.values, self.hessians, self.unknowns):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    def operator(self) -> _Operator:
        return _Operator(self.grid, self.mode, self.kappa, self.boundary_value)

    def value_at(self, x) -> float:
        return float(self.values[self.grid.node_of(x)])

    @classmethod
    def from_samples(cls, grid: GridSpec, kappa: float, values, mode: str = "barrier") -> "MASolution":
        """Wrap externally computed node values.

        ``mode="samples"`` differences the values directly; ``mode="barrier"``
        differences ``values - b`` and adds the barrier term analytically, as
        the solver does.
        """
        u = np.array(values, dtype=float)
        if u.shape != (len(grid),):
            raise ValidationError("one value per grid node expected")
        if mode not in ("samples", "barrier"):
            raise ValidationError(f"unsupported sample mode {mode!r}")
        op = _Operator(grid, mode, kappa)
        unknowns = u - op.b
        res = op.residual(unknowns)
        ev = op.evaluable
        return cls(grid=grid, kappa=float(kappa), values=u.copy(), hessians=op.hessians(unknowns),
                   residual_sup=float(np.max(res[ev])) if ev.any() else float("nan"),
                   newton_iters=0, mode=mode, unknowns=unknowns)

    @classmethod
    def empty(cls, domain: SimplexDomain, kappa: float) -> "MASolution":
        return cls(grid=None, kappa=float(kappa), values=np.empty(0), hessians=np.empty((0, 0, 0)),
                   residual_sup=float("nan"), newton_iters=0, mode="empty", unknowns=np.empty(0))


def _newton(op: _Operator, u: np.ndarray, tol: float, trace: list, label: str):
    """Damped Newton with Armijo backtracking on the sup of the log residual.

    Iterates past ``tol`` while the steps keep shrinking, so the returned
    field sits at rounding level; this is what makes kappa-shifted solves
    agree to ~1e-12.
    """
    if not np.all(_is_spd(op.hessians(u))):
        raise LossOfConvexity(f"{label}: initial guess is not convex")
    merit = float(np.max(np.abs(op.log_residual(u))))
    last_step = math.inf
    iters = 0
    for iters in range(1, MAX_NEWTON + 1):
        jac, f = op.newton_system(u)
        try:
            step = spla.spsolve(jac, -f)
        except RuntimeError as exc:  # singular factorization
            raise NewtonDiverged(f"{label}: linear solve failed ({exc})", trace) from None
        if not np.all(np.isfinite(step)):
            raise NewtonDiverged(f"{label}: non-finite Newton step", trace)
        lam, convex_fail, accepted = 1.0, False, False
        while lam >= 2.0 ** -24:
            cand = u + lam * step
            lr = op.log_residual(cand)
            if np.all(np.isfinite(lr)):
                cmerit = float(np.max(np.abs(lr)))
                if cmerit <= (1.0 - 1e-4 * lam) * merit:
                    accepted = True
                    break
                convex_fail = False
            else:
                convex_fail = True
            lam *= 0.5
        stepsize = float(np.max(np.abs(lam * step))) if accepted else 0.0
        trace.append((label, iters, merit, lam if accepted else 0.0, stepsize))
        if not accepted:
            if float(np.nanmax(op.residual(u))) <= tol:
                break  # stagnated at rounding level
            if convex_fail:
                raise LossOfConvexity(f"{label}: damping cannot restore convexity")
            raise NewtonDiverged(f"{label}: line search failed at log residual {merit:.3e}", trace)
        u, merit = cand, cmerit
        if float(np.nanmax(op.residual(u))) <= tol and (stepsize < 1e-13 or stepsize >= last_step):
            break
        last_step = stepsize
    else:
        if float(np.nanmax(op.residual(u))) > tol:
            raise NewtonDiverged(f"{label}: no convergence in {MAX_NEWTON} iterations "
                                 f"(log residual {merit:.3e})", trace)
    return u, iters


def solve_real_ma(domain: SimplexDomain, kappa: float = 1.0, resolution: int = 64,
                  tol: float = DEFAULT_TOL, mode: str = "barrier") -> MASolution:
    """Solve ``det D^2 phi = kappa e^{2 phi}``, ``phi = +inf`` on the boundary.

    Parameters
    ----------
    domain : SimplexDomain
        Open simplex of dimension 1, 2 or 3 (dimension 0 returns an empty solution).
    kappa : float
        Positive constant on the right-hand side.
    resolution : int
        Grid steps per unit length, at least 8.
    tol : float
        Bound on the relative residual at returned nodes.
    mode : {"barrier", "exhaustion"}
        Boundary blow-up realization; see the module docstring.
    """
    if kappa <= 0 or not math.isfinite(kappa):
        raise DomainViolation("kappa must be positive")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if domain.dim == 0:
        return MASolution.empty(domain, kappa)
    if not 1 <= domain.dim <= 3:
        raise DomainViolation("dim must be 1..3")
    if mode not in ("barrier", "exhaustion"):
        raise ValidationError(f"mode must be 'barrier' or 'exhaustion', got {mode!r}")
    grid = GridSpec(domain, resolution)
    shift = -0.5 * math.log(kappa)
    trace: list = []
    if mode == "barrier":
        op = _Operator(grid, "barrier", kappa)
        u, iters = _newton(op, np.full(len(grid), shift), tol, trace, "barrier")
        boundary_value = None
    else:
        u, iters, op = _exhaust(grid, kappa, tol, trace)
        boundary_value = op.boundary_value
    res = op.residual(u)
    return MASolution(grid=grid, kappa=float(kappa), values=op.phi(u), hessians=op.hessians(u),
                      residual_sup=float(np.nanmax(res)), newton_iters=iters, mode=mode,
                      unknowns=u, boundary_value=boundary_value, tol=tol, trace=tuple(trace))


def exhaustion_schedule(kappa: float, count: int) -> list[float]:
    """Boundary values ``4k - log(kappa)/2`` for k = 1..count."""
    return [4.0 * k - 0.5 * math.log(kappa) for k in range(1, count + 1)]


def solve_dirichlet(grid: GridSpec, kappa: float, boundary_value: float, tol: float = DEFAULT_TOL,
                    initial=None, trace: list | None = None):
    """Dirichlet problem with constant value at the missing grid neighbours."""
    op = _Operator(grid, "exhaustion", kappa, boundary_value)
    if initial is None:
        # barrier profile shifted down until the Hessians, Dirichlet ghosts
        # included, are SPD; the shift is kappa-independent
        b = barrier(grid.domain, grid.points) - 0.5 * math.log(kappa)
        for drop in range(0, 200):
            initial = b - drop
            if np.all(_is_spd(op.hessians(initial))):
                break
    u, iters = _newton(op, np.asarray(initial, dtype=float), tol,
                       [] if trace is None else trace, f"dirichlet M={boundary_value:g}")
    return u, iters, op


def _exhaust(grid: GridSpec, kappa: float, tol: float, trace: list):
    # The discrete Dirichlet solutions do not saturate as M grows at fixed h:
    # the first node layer follows M. Stop at the first M above the barrier's
    # largest node value, i.e. once M exceeds what the grid can resolve.
    cap = float(np.max(barrier(grid.domain, grid.points))) - 0.5 * math.log(kappa)
    inner = grid.slack >= INTERIOR_SLACK
    if not inner.any():
        inner = np.ones(len(grid), dtype=bool)
    u, total, op = None, 0, None
    for k in range(1, 64):
        m = exhaustion_schedule(kappa, k)[-1]
        prev = u
        u, iters, op = solve_dirichlet(grid, kappa, m, tol, initial=prev, trace=trace)
        total += iters
        if prev is not None:
            change = float(np.max(np.abs(u - prev)[inner]))
            trace.append(("exhaustion", k, m, change))
            if change < tol / 10:
                break
        if m >= cap:
            break
    return u, total, op


def ma_residual(sol: MASolution, min_slack: float = 0.0) -> ResidualReport:
    """Recompute the relative residual field with fresh differences.

    The summary runs over evaluable nodes whose slack is at least ``min_slack``.
    """
    op = sol.operator()
    res = op.residual(np.asarray(sol.unknowns))
    mask = np.isfinite(res) & (sol.grid.slack >= min_slack)
    if not mask.any():
        return ResidualReport(res, float("nan"), float("nan"), None)
    vals = np.where(mask, res, -np.inf)
    i = int(np.argmax(vals))
    return ResidualReport(res, float(res[i]), float(np.mean(res[mask])), sol.grid.points[i].copy())


def hessian_field(sol: MASolution) -> np.ndarray:
    """Discrete Hessians per node (NaN rows where not evaluable); raises on non-SPD."""
    op = sol.operator()
    hess = op.hessians(np.asarray(sol.unknowns))
    ev = op.evaluable
    if not np.all(_is_spd(hess[ev])):
        bad = np.flatnonzero(ev)[~_is_spd(hess[ev])]
        raise LossOfConvexity(f"non-SPD Hessian at {len(bad)} node(s), first at {sol.points[bad[0]]}")
    hess[~ev] = np.nan
    return hess
