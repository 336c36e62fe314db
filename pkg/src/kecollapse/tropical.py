"""Tropicalization, corner loci and sampled amoebas.

A polynomial ``p = sum b_u t^{v(u)} z^u`` has tropical limit
``p_inf(x) = min_u (v(u) + <x, u>)``; its corner locus (where the minimum is
attained at least twice) is the Hausdorff limit of the amoebas
``Log_t(V(p_t))`` as real ``t -> 0``.

Corner loci are computed exactly over the rationals for one and two
variables. Amoebas are sampled by fixing one coordinate on a grid of
moduli and angles and solving the remaining one-variable polynomial with
companion-matrix eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateParameter,
    DimensionMismatch,
    EmptyAfterClip,
    EmptyVariety,
    RootSolveFailure,
    ValidationError,
)

WITNESS_TOL = 1e-9
DEGREE_CAP = 64


@dataclass(frozen=True)
class Term:
    exponent: tuple[int, ...]
    coeff: complex
    val: Fraction


class TropicalPolynomial:
    """Laurent polynomial with ``t``-valuations on its coefficients."""

    def __init__(self, terms: Sequence[tuple]):
        if not terms:
            raise ValidationError("a polynomial needs at least one term")
        out = []
        for u, b, v in terms:
            u = tuple(int(e) for e in u)
            b = complex(b)
            if b == 0:
                raise ValidationError("coefficients must be nonzero")
            out.append(Term(u, b, Fraction(v)))
        nvars = {len(t.exponent) for t in out}
        if len(nvars) != 1:
            raise DimensionMismatch("all exponent vectors must have the same length")
        if len({t.exponent for t in out}) != len(out):
            raise ValidationError("exponent vectors must be pairwise distinct")
        self.terms: tuple[Term, ...] = tuple(out)
        self.nvars = nvars.pop()

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"TropicalPolynomial({len(self)} terms in {self.nvars} variables)"

    @classmethod
    def from_file(cls, path: str | Path) -> "TropicalPolynomial":
        """One term per line: ``c_re c_im val e1 ... ek``; ``#`` starts a comment."""
        terms = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 4:
                raise ValidationError(f"{path}:{lineno}: expected 'c_re c_im val e1 ... ek'")
            try:
                b = complex(float(parts[0]), float(parts[1]))
                v = Fraction(parts[2])
                u = tuple(int(e) for e in parts[3:])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            terms.append((u, b, v))
        return cls(terms)

    def monomial_shift(self, w) -> "TropicalPolynomial":
        """Multiply by ``z^w``."""
        w = tuple(int(e) for e in w)
        return TropicalPolynomial([(tuple(a + b for a, b in zip(t.exponent, w)), t.coeff, t.val)
                                   for t in self.terms])

    def valuation_shift(self, c) -> "TropicalPolynomial":
        """Multiply by ``t^c``."""
        return TropicalPolynomial([(t.exponent, t.coeff, t.val + Fraction(c)) for t in self.terms])

    def term_values(self, z, t_abs: float) -> np.ndarray:
        """Individual terms ``b_u t^{v(u)} z^u`` at a point of ``(C^*)^n``."""
        z = np.asarray(z, dtype=complex).reshape(-1)
        return np.array([t.coeff * t_abs ** float(t.val) * np.prod(z ** np.array(t.exponent))
                         for t in self.terms])

    def __call__(self, z, t_abs: float) -> complex:
        return complex(self.term_values(z, t_abs).sum())


# ---------------------------------------------------------------------------
# tropical function and corner locus
# ---------------------------------------------------------------------------

def _as_exact(x):
    return tuple(xi if isinstance(xi, (Fraction, int)) else Fraction(xi) for xi in x)


class TropicalFunction:
    """``x -> min_u (v(u) + <x, u>)``."""

    def __init__(self, forms: Sequence[tuple[Fraction, tuple[int, ...]]]):
        self.forms = tuple((Fraction(v), tuple(u)) for v, u in forms)
        self.nvars = len(self.forms[0][1])

    def affine_values(self, x) -> list:
        x = tuple(x)
        if len(x) != self.nvars:
            raise DimensionMismatch(f"expected a point in R^{self.nvars}")
        return [v + sum(ui * xi for ui, xi in zip(u, x)) for v, u in self.forms]

    def __call__(self, x):
        return min(self.affine_values(x))

    def minimizers(self, x, tol: float = 0.0) -> tuple[int, ...]:
        """Indices of terms attaining the minimum (within ``tol`` for float input)."""
        vals = self.affine_values(x)
        m = min(vals)
        return tuple(i for i, v in enumerate(vals) if v - m <= tol)

    def evaluate(self, x) -> tuple:
        """Value and minimizing term indices at ``x`` (exact for rational ``x``)."""
        exact = all(isinstance(xi, (Fraction, int)) for xi in x)
        return self(x), self.minimizers(x, 0.0 if exact else 1e-9)

    def shifted(self, c) -> "TropicalFunction":
        return TropicalFunction([(v + Fraction(c), u) for v, u in self.forms])


def tropicalize(p: TropicalPolynomial) -> TropicalFunction:
    return TropicalFunction([(t.val, t.exponent) for t in p.terms])


@dataclass(frozen=True)
class LocusPiece:
    """Maximal cell ``{x : f_i(x) = f_j(x) <= f_k(x) for all k}``.

    In two variables the cell is ``base + s * direction`` for ``s`` in
    ``[lo, hi]`` (``None`` for an infinite end). In one variable it is the
    point ``base`` and ``direction`` is empty.
    """

    terms: tuple[int, int]
    kind: str  # 'point', 'segment', 'ray', 'line'
    base: tuple[Fraction, ...]
    direction: tuple[Fraction, ...]
    lo: Fraction | None
    hi: Fraction | None

    def equality(self, f: TropicalFunction) -> str:
        (vi, ui), (vj, uj) = f.forms[self.terms[0]], f.forms[self.terms[1]]
        lhs = " + ".join(f"{a - b}*x{k + 1}" for k, (a, b) in enumerate(zip(ui, uj)) if a != b)
        return f"{lhs} = {vj - vi}"

    def endpoints(self) -> list[tuple[Fraction, ...]]:
        out = []
        for s in (self.lo, self.hi):
            if s is not None:
                out.append(tuple(b + s * d for b, d in zip(self.base, self.direction)))
        return out


@dataclass(frozen=True)
class CornerLocus:
    pieces: tuple[LocusPiece, ...]
    vertices: tuple[tuple[Fraction, ...], ...]
    points: np.ndarray
    region: tuple

    def counts(self) -> dict:
        out = {"vertex": len(self.vertices)}
        for p in self.pieces:
            out[p.kind] = out.get(p.kind, 0) + 1
        return out


def _interval(constraints):
    """Intersect ``alpha + beta*s >= 0`` constraints; ``None`` if empty."""
    lo = hi = None
    for alpha, beta in constraints:
        if beta == 0:
            if alpha < 0:
                return None
            continue
        bound = -alpha / beta
        if beta > 0:
            lo = bound if lo is None else max(lo, bound)
        else:
            hi = bound if hi is None else min(hi, bound)
    if lo is not None and hi is not None and lo > hi:
        return None
    return lo, hi


def _pieces(f: TropicalFunction) -> list[LocusPiece]:
    n = f.nvars
    pieces = []
    for i, j in combinations(range(len(f.forms)), 2):
        (vi, ui), (vj, uj) = f.forms[i], f.forms[j]
        a = tuple(p - q for p, q in zip(ui, uj))  # <a, x> = vj - vi
        c = vj - vi
        if n == 1:
            x = (Fraction(c, a[0]),)
            fx = f.affine_values(x)
            if fx[i] == min(fx):
                pieces.append(LocusPiece((i, j), "point", x, (), None, None))
            continue
        if n != 2:
            raise DimensionMismatch("exact corner loci are implemented for 1 or 2 variables")
        norm2 = a[0] * a[0] + a[1] * a[1]
        base = (Fraction(c * a[0], norm2), Fraction(c * a[1], norm2))
        d = (-a[1], a[0])
        cons = []
        for k, (vk, uk) in enumerate(f.forms):
            if k in (i, j):
                continue
            # f_k - f_i along the line
            alpha = vk - vi + sum((p - q) * b for p, q, b in zip(uk, ui, base))
            beta = sum((p - q) * e for p, q, e in zip(uk, ui, d))
            cons.append((alpha, beta))
        iv = _interval(cons)
        if iv is None:
            continue
        lo, hi = iv
        if lo is not None and hi is not None and lo == hi:
            continue  # a single point: not a maximal cell
        kind = "line" if lo is None and hi is None else "ray" if lo is None or hi is None else "segment"
        pieces.append(LocusPiece((i, j), kind, base, d, lo, hi))
    return pieces


def _check_region(region, n):
    region = tuple(float(r) for r in region)
    if len(region) != 2 * n:
        raise DimensionMismatch(f"region needs {2 * n} bounds")
    for k in range(n):
        if not region[2 * k] < region[2 * k + 1]:
            raise ValidationError("region bounds must satisfy lo < hi")
        if not all(math.isfinite(r) for r in region):
            raise ValidationError("region must be bounded")
    return region


def corner_locus(f: TropicalFunction, region, resolution: int = 400) -> CornerLocus:
    """Exact pieces of the corner locus plus a sampling clipped to ``region``.

    ``region`` is ``(lo1, hi1[, lo2, hi2])``. Each piece is sampled at
    spacing ``min box width / resolution``.
    """
    n = f.nvars
    region = _check_region(region, n)
    if resolution < 1:
        raise ValidationError("resolution must be positive")
    pieces = _pieces(f) if len(f.forms) > 1 else []
    vert = set()
    if n == 1:
        vert = {p.base for p in pieces}
    else:
        for p in pieces:
            vert.update(p.endpoints())
    vertices = tuple(sorted(vert))
    lo = np.array(region[0::2])
    hi = np.array(region[1::2])
    spacing = float(np.min(hi - lo)) / resolution
    samples = []
    for p in pieces:
        base = np.array([float(b) for b in p.base])
        if n == 1:
            if lo[0] <= base[0] <= hi[0]:
                samples.append(base[None, :])
            continue
        d = np.array([float(e) for e in p.direction])
        cons = []
        for k in range(n):
            cons.append((base[k] - lo[k], d[k]))
            cons.append((hi[k] - base[k], -d[k]))
        s_lo = -math.inf if p.lo is None else float(p.lo)
        s_hi = math.inf if p.hi is None else float(p.hi)
        for alpha, beta in cons:
            if beta > 0:
                s_lo = max(s_lo, -alpha / beta)
            elif beta < 0:
                s_hi = min(s_hi, -alpha / beta)
            elif alpha < 0:
                s_hi = -math.inf
        if s_lo > s_hi:
            continue
        count = max(2, int(math.ceil((s_hi - s_lo) * np.linalg.norm(d) / spacing)) + 1)
        s = np.linspace(s_lo, s_hi, count)
        samples.append(base[None, :] + s[:, None] * d[None, :])
    pts = np.concatenate(samples) if samples else np.empty((0, n))
    pts = _canonical(pts)
    return CornerLocus(tuple(pieces), vertices, pts, region)


def _canonical(pts: np.ndarray) -> np.ndarray:
    if len(pts) == 0:
        return pts
    pts = pts + 0.0  # drop signed zeros
    order = np.lexsort(pts.T[::-1])
    return pts[order]


# ---------------------------------------------------------------------------
# amoebas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    t_abs: float
    tol: float
    witnesses: np.ndarray = field(repr=False, default=None)
    residuals: np.ndarray = field(repr=False, default=None)


def _solve_univariate(coeffs: dict[int, complex], sample):
    """Roots in ``C^*`` of ``sum c_k w^k`` (Laurent, possibly negative ``k``)."""
    # only exact cancellation removes a coefficient: terms of very different
    # size are all genuine at extreme moduli
    ks = [k for k, c in coeffs.items() if c != 0]
    if not ks:
        return np.empty(0, dtype=complex)
    kmin, kmax = min(ks), max(ks)
    deg = kmax - kmin
    if deg == 0:
        return np.empty(0, dtype=complex)
    if deg > DEGREE_CAP:
        raise ValidationError(f"degree {deg} exceeds the cap {DEGREE_CAP}")
    poly = np.zeros(deg + 1, dtype=complex)  # highest degree first
    for k in ks:
        poly[kmax - k] = coeffs[k]
    roots = np.roots(poly)
    if not np.all(np.isfinite(roots)):
        raise RootSolveFailure("non-finite root", sample)
    dpoly = np.polyder(poly)
    for _ in range(2):  # Newton polish
        val = np.polyval(poly, roots)
        der = np.polyval(dpoly, roots)
        good = np.abs(der) > 0
        roots[good] = roots[good] - val[good] / der[good]
    return roots[roots != 0]


def amoeba_sample(p: TropicalPolynomial, t_abs: float, x_range=(-2.0, 2.0), n_x: int = 400,
                  n_angle: int = 16, tol: float = WITNESS_TOL) -> PointCloud:
    """Sample ``Log_t(V(p_t))`` at real ``t = t_abs``.

    For two variables each coordinate in turn is fixed on
    ``n_x`` moduli ``t^x`` (``x`` in ``x_range``, either one shared
    ``(lo, hi)`` or a region ``(lo1, hi1, lo2, hi2)``) times ``n_angle`` angles and
    the polynomial in the other variable is solved; using both coordinates
    keeps the sampling dense along every direction of the curve. For one
    variable the roots are computed directly.
    """
    if not (0.0 < t_abs < 1.0):
        raise DegenerateParameter(f"|t| = {t_abs} is not in (0, 1)")
    n = p.nvars
    if n not in (1, 2):
        raise DimensionMismatch("amoeba sampling supports one or two variables")
    log_t = math.log(t_abs)
    coef = [t.coeff * t_abs ** float(t.val) for t in p.terms]
    pts, wit, res = [], [], []

    def keep(z, sample):
        terms = p.term_values(z, t_abs)
        scale = np.max(np.abs(terms))
        r = abs(terms.sum()) / scale
        if not r <= tol:
            raise RootSolveFailure(f"witness residual {r:.3e} exceeds {tol:g}", sample)
        x = np.log(np.abs(z)) / log_t
        pts.append(x + 0.0)
        wit.append(z)
        res.append(r)

    if n == 1:
        coeffs: dict[int, complex] = {}
        for t, c in zip(p.terms, coef):
            coeffs[t.exponent[0]] = coeffs.get(t.exponent[0], 0) + c
        for z in _solve_univariate(coeffs, ()):
            keep(np.array([z]), ())
    else:
        ranges = [tuple(x_range[:2]), tuple(x_range[2:4]) if len(x_range) == 4 else tuple(x_range[:2])]
        angles = 2 * math.pi * np.arange(n_angle) / n_angle
        for free in (0, 1):
            other = 1 - free
            for x in np.linspace(float(ranges[free][0]), float(ranges[free][1]), n_x):
                for a in angles:
                    zf = t_abs ** x * complex(math.cos(a), math.sin(a))
                    coeffs = {}
                    for t, c in zip(p.terms, coef):
                        k = t.exponent[other]
                        coeffs[k] = coeffs.get(k, 0) + c * zf ** t.exponent[free]
                    sample = (free, float(x), float(a))
                    for w in _solve_univariate(coeffs, sample):
                        z = np.empty(2, dtype=complex)
                        z[free], z[other] = zf, w
                        keep(z, sample)
    if not pts:
        raise EmptyVariety("the specialized polynomial has no roots in the torus")
    pts = np.array(pts)
    order = np.lexsort(pts.T[::-1])
    return PointCloud(pts[order], float(t_abs), float(tol), np.array(wit)[order], np.array(res)[order])


def _clip(points: np.ndarray, region) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lo = np.array(region[0::2])
    hi = np.array(region[1::2])
    if points.shape[1] != len(lo):
        raise DimensionMismatch("region does not match the point dimension")
    inside = np.all((points >= lo) & (points <= hi), axis=1)
    return points[inside]


def hausdorff_distance(a, b, region) -> float:
    """Symmetric Hausdorff distance of two finite sets clipped to ``region``.

    Accepts arrays, :class:`PointCloud` or :class:`CornerLocus`. The result
    is only as fine as the sampling of the two sets.
    """
    sets = []
    for s in (a, b):
        pts = s.points if hasattr(s, "points") else s
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = pts.shape[1] if pts.size else len(region) // 2
        clipped = _clip(pts, _check_region(region, n)) if pts.size else pts
        if len(clipped) == 0:
            raise EmptyAfterClip("a point set is empty after clipping to the region")
        sets.append(clipped)
    pa, pb = sets
    d_ab = cKDTree(pb).query(pa)[0].max()
    d_ba = cKDTree(pa).query(pb)[0].max()
    return float(max(d_ab, d_ba))


def convergence_curve(p: TropicalPolynomial, t_list, region, resolution: int = 400,
                      n_angle: int = 16) -> list[tuple[float, float, float]]:
    """Rows ``(t, d_H, d_H * (-log t))`` of amoeba vs. corner locus on ``region``."""
    t_list = [float(t) for t in t_list]
    if any(not (0 < t < 1) for t in t_list):
        raise DegenerateParameter("all t must lie in (0, 1)")
    if any(b >= a for a, b in zip(t_list, t_list[1:])):
        raise ValidationError("t_list must be strictly decreasing")
    region = _check_region(region, p.nvars)
    locus = corner_locus(tropicalize(p), region, resolution)
    rows = []
    for t in t_list:
        cloud = amoeba_sample(p, t, region, resolution, n_angle)
        d = hausdorff_distance(cloud, locus, region)
        rows.append((t, d, d * -math.log(t)))
    return rows
