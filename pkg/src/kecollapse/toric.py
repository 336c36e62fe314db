"""Exact lattice and simplicial cone combinatorics.

Everything in the cone half of this module is exact: ray generators are
integer tuples and covectors are tuples of :class:`fractions.Fraction`.
Floating point only enters through :func:`log_map` and
:func:`fibration_base`, which deal with moduli of complex numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateParameter,
    EmptyDomain,
    NonPositiveModulus,
    NonSimplicial,
    NotFullDimensional,
    NotGorenstein,
    ValidationError,
)

IntVec = tuple[int, ...]


# ---------------------------------------------------------------------------
# exact linear algebra helpers
# ---------------------------------------------------------------------------

def primitive(v: Sequence[int]) -> IntVec:
    """Divide an integer vector by the gcd of its entries."""
    v = tuple(int(a) for a in v)
    g = math.gcd(*v)
    if g == 0:
        raise ValidationError("zero vector has no primitive representative")
    return tuple(a // g for a in v)


def exact_rank(rows: Sequence[Sequence]) -> int:
    """Rank over the rationals by fraction-exact Gaussian elimination."""
    m = [[Fraction(a) for a in r] for r in rows]
    if not m:
        return 0
    rank, ncols = 0, len(m[0])
    for col in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for i in range(len(m)):
            if i != rank and m[i][col] != 0:
                f = m[i][col] / m[rank][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[rank])]
        rank += 1
    return rank


def solve_exact(a: Sequence[Sequence], b: Sequence) -> list[Fraction]:
    """Solve a square nonsingular system over the rationals."""
    n = len(a)
    m = [[Fraction(x) for x in row] + [Fraction(rhs)] for row, rhs in zip(a, b)]
    for col in range(n):
        piv = next((i for i in range(col, n) if m[i][col] != 0), None)
        if piv is None:
            raise NonSimplicial("singular system")
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [x / p for x in m[col]]
        for i in range(n):
            if i != col and m[i][col] != 0:
                f = m[i][col]
                m[i] = [x - f * y for x, y in zip(m[i], m[col])]
    return [m[i][n] for i in range(n)]


def integer_solution(a: Sequence[Sequence[int]], b: Sequence[int]) -> IntVec | None:
    """Find an integer ``m`` with ``a @ m == b``, or None if there is none.

    Column-style Hermite reduction: unimodular column operations bring ``a``
    to lower-triangular form ``a @ U = [H | 0]``, after which the system is
    solved by forward substitution and integrality is checked row by row.
    Rows of ``a`` must be linearly independent.
    """
    k = len(a)
    r = len(a[0])
    h = [list(map(int, row)) for row in a]
    u = [[int(i == j) for j in range(r)] for i in range(r)]

    def colop(j1, j2, p, q, s, t):
        # (c_j1, c_j2) <- (p c_j1 + q c_j2, s c_j1 + t c_j2), det = +-1
        for mat in (h, u):
            for row in mat:
                x, y = row[j1], row[j2]
                row[j1], row[j2] = p * x + q * y, s * x + t * y

    for i in range(k):
        for j in range(i + 1, r):
            x, y = h[i][i], h[i][j]
            if y == 0:
                continue
            g, p, q = _xgcd(x, y)
            # new c_i = p c_i + q c_j has entry g; new c_j kills entry i
            colop(i, j, p, q, -y // g, x // g)
        if h[i][i] == 0:
            raise NonSimplicial("rows are linearly dependent")
        if h[i][i] < 0:
            for mat in (h, u):
                for row in mat:
                    row[i] = -row[i]
    y = []
    for i in range(k):
        rest = b[i] - sum(h[i][j] * y[j] for j in range(i))
        if rest % h[i][i]:
            return None
        y.append(rest // h[i][i])
    y += [0] * (r - k)
    return tuple(sum(u[row][j] * y[j] for j in range(r)) for row in range(r))


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Return ``(g, p, q)`` with ``p*a + q*b == g == gcd(a, b) >= 0``."""
    old_r, rr = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while rr:
        quo = old_r // rr
        old_r, rr = rr, old_r - quo * rr
        old_s, s = s, old_s - quo * s
        old_t, t = t, old_t - quo * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lattice:
    rank: int

    def __post_init__(self):
        if int(self.rank) < 1:
            raise ValidationError("lattice rank must be >= 1")


@dataclass(frozen=True)
class Cone:
    """Simplicial rational cone spanned by primitive integer rays.

    Rays are normalized to primitive vectors on construction.
    """

    lattice: Lattice
    rays: tuple[IntVec, ...]

    def __post_init__(self):
        if not self.rays:
            raise ValidationError("a cone needs at least one ray")
        rays = []
        for v in self.rays:
            if len(v) != self.lattice.rank:
                raise ValidationError(f"ray {tuple(v)} does not have arity {self.lattice.rank}")
            rays.append(primitive(v))
        if exact_rank(rays) != len(rays):
            raise NonSimplicial(f"rays {rays} are linearly dependent")
        object.__setattr__(self, "rays", tuple(rays))

    @classmethod
    def from_rays(cls, rays: Sequence[Sequence[int]]) -> "Cone":
        rays = [tuple(int(a) for a in v) for v in rays]
        if not rays:
            raise ValidationError("a cone needs at least one ray")
        return cls(Lattice(len(rays[0])), tuple(rays))

    @property
    def is_full_dimensional(self) -> bool:
        return len(self.rays) == self.lattice.rank

    def ray_set(self) -> frozenset[IntVec]:
        return frozenset(self.rays)


@dataclass(frozen=True)
class Covector:
    entries: tuple[Fraction, ...]

    def pair(self, v: Sequence) -> Fraction:
        if len(v) != len(self.entries):
            raise ValidationError("arity mismatch between covector and vector")
        return sum((e * Fraction(x) for e, x in zip(self.entries, v)), Fraction(0))

    @property
    def is_integral(self) -> bool:
        return all(e.denominator == 1 for e in self.entries)


@dataclass(frozen=True)
class SimplexDomain:
    """Open simplex ``{x_j > margin, sum(x) < 1 - margin}`` in R^dim.

    ``vertices`` optionally records a realization of the closed simplex in
    an ambient lattice, in barycentric order: ``x = 0`` maps to
    ``vertices[0]`` and the unit vector ``e_j`` maps to ``vertices[j]``.
    """

    dim: int
    margin: float = 0.0
    vertices: tuple[tuple[Fraction, ...], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim < 0:
            raise ValidationError("negative simplex dimension")
        if self.margin < 0:
            raise ValidationError("margin must be >= 0")
        if self.dim > 0 and self.margin >= 1.0 / (self.dim + 1):
            raise EmptyDomain(
                f"margin {self.margin} >= 1/(s+1) = {1.0 / (self.dim + 1)} leaves no interior")

    def slacks(self, x) -> np.ndarray:
        """Values of the defining inequalities ``x_j - margin`` and
        ``1 - margin - sum(x)`` (positive inside). Last axis is the point."""
        x = np.asarray(x, dtype=float)
        lo = x - self.margin
        hi = 1.0 - self.margin - x.sum(axis=-1, keepdims=True)
        return np.concatenate([hi, lo], axis=-1)

    def slack(self, x) -> np.ndarray | float:
        """Smallest defining-inequality slack; the grid's notion of distance to the boundary."""
        return self.slacks(x).min(axis=-1)

    def contains(self, x) -> bool:
        return bool(np.all(self.slack(np.atleast_1d(x)) > 0))

    @property
    def barycenter(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / (self.dim + 1))

    def embed(self, x: Sequence) -> tuple[Fraction, ...]:
        """Map barycentric-style coordinates into the ambient realization."""
        if self.vertices is None:
            raise ValidationError("domain has no ambient realization")
        x = [Fraction(a) for a in x]
        w = [1 - sum(x, Fraction(0))] + x
        return tuple(sum((wi * v[k] for wi, v in zip(w, self.vertices)), Fraction(0))
                     for k in range(len(self.vertices[0])))

    def edge_lattice_length(self, i: int, j: int) -> int:
        """Lattice length of the realized edge between vertices i and j."""
        if self.vertices is None:
            raise ValidationError("domain has no ambient realization")
        d = [a - b for a, b in zip(self.vertices[i], self.vertices[j])]
        if any(x.denominator != 1 for x in d):
            raise ValidationError("edge is not a lattice segment")
        return math.gcd(*(int(x) for x in d))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def dual_cone(c: Cone) -> Cone:
    """Dual cone ``{u : <u, v> >= 0 for all v in c}`` with primitive rays.

    For a full-dimensional simplicial cone with ray matrix R (rows), the
    dual rays are the primitive multiples of the columns of R^{-1}.
    """
    if not c.is_full_dimensional:
        raise NotFullDimensional(
            f"{len(c.rays)} rays do not span a rank-{c.lattice.rank} lattice")
    n = c.lattice.rank
    cols = []
    for i in range(n):
        e = [int(i == j) for j in range(n)]
        w = solve_exact(c.rays, e)  # <v_j, w> = delta_ij
        den = math.lcm(*(x.denominator for x in w))
        cols.append(primitive([int(x * den) for x in w]))
    return Cone(c.lattice, tuple(cols))


def gorenstein_covector(c: Cone) -> Covector:
    """Integral covector pairing to 1 with every ray generator.

    For full-dimensional cones the covector is unique and computed over the
    rationals. For lower-dimensional cones any integral solution of the
    pairing system is returned (they agree on the span of the cone).
    """
    ones = [1] * len(c.rays)
    if c.is_full_dimensional:
        u = solve_exact(c.rays, ones)
        cov = Covector(tuple(u))
        if not cov.is_integral:
            raise NotGorenstein(f"cone {c.rays}: unit-pairing covector {u} is not integral")
        return cov
    m = integer_solution(c.rays, ones)
    if m is None:
        raise NotGorenstein(f"cone {c.rays}: no integral covector pairs to 1 with every ray")
    return Covector(tuple(Fraction(x) for x in m))


def cell_polytope(c: Cone, u: Covector | None = None) -> SimplexDomain:
    """The open slice ``{v in Int(c) : <v, u> = 1}`` in barycentric coordinates.

    Because every ray pairs to 1 with ``u``, the slice is the open simplex on
    the ray generators; ``x_0 = 1 - sum(x_j)`` is the eliminated coordinate.
    """
    if u is None:
        u = gorenstein_covector(c)
    for v in c.rays:
        if u.pair(v) != 1:
            raise NotGorenstein(f"covector {u.entries} pairs to {u.pair(v)} with ray {v}")
    verts = tuple(tuple(Fraction(a) for a in v) for v in c.rays)
    return SimplexDomain(dim=len(c.rays) - 1, margin=0.0, vertices=verts)


def _check_t(t_abs: float) -> None:
    if not (0.0 < t_abs < 1.0):
        raise DegenerateParameter(f"|t| = {t_abs} is not in (0, 1)")


def log_map(moduli, t_abs: float) -> np.ndarray:
    """``x_j = log|z_j| / log|t|``."""
    _check_t(t_abs)
    m = np.asarray(moduli, dtype=float)
    if np.any(~(m > 0)):
        raise NonPositiveModulus("all moduli |z_j| must be positive")
    return np.log(m) / math.log(t_abs)


def fibration_base(s: int, t_abs: float, eps: float) -> SimplexDomain:
    """Domain ``{x_j > log(eps)/log|t|, sum(x) < 1 - log(eps)/log|t|}``."""
    _check_t(t_abs)
    if not (0.0 < eps <= 1.0):
        raise DegenerateParameter(f"eps = {eps} is not in (0, 1]")
    delta = math.log(eps) / math.log(t_abs)
    if delta == 0.0:
        delta = 0.0  # drop the sign of -0.0
    if delta >= 1.0 / (s + 1):
        raise EmptyDomain(f"margin {delta} >= 1/(s+1); base is empty")
    return SimplexDomain(dim=s, margin=delta)


def read_cone(path: str | Path) -> Cone:
    """Read a cone from a text file: one ray per line, whitespace-separated
    integers, ``#`` starts a comment."""
    rays = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rays.append(tuple(int(tok) for tok in line.split()))
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    if len({len(r) for r in rays}) > 1:
        raise ValidationError(f"{path}: rays have inconsistent arity")
    return Cone.from_rays(rays)
