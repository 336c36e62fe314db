"""Mumford degenerations and their dual intersection complexes.

Input is a lattice polytope ``P`` subdivided into lattice cells, with a
convex piecewise-linear ``psi`` that is affine on each maximal cell. The
lower faces of ``{(v, r) : psi(v) <= r}`` give the components of the
central fibre, one per maximal cell ``tau``, with primitive inner normals
``n_tau = (-m_tau, 1)`` where ``m_tau`` is the slope of ``psi`` on ``tau``.

A stratum is a face ``F`` of the subdivision that is the intersection of
the maximal cells containing it; it is indexed by that set ``I`` of cells
and has complex dimension ``dim F``. Its local cone is spanned by the
normals ``n_tau`` for ``tau`` in ``I`` and pairs to 1 with ``u = (0, 1)``,
so the dual cell is the simplex on those normals in ``{<v, u> = 1}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .errors import (
    InvalidFixture,
    NonConvexPsi,
    NonIntegralSlope,
    NotGorenstein,
    NotGorensteinLocally,
)
from .toric import Cone, Covector, SimplexDomain, cell_polytope, exact_rank, solve_exact

VOLUME_RTOL = 1e-9


# ---------------------------------------------------------------------------
# polytope helpers
# ---------------------------------------------------------------------------

def _affine_rank(points: Sequence[Sequence[int]]) -> int:
    p0 = points[0]
    return exact_rank([[a - b for a, b in zip(p, p0)] for p in points[1:]]) if len(points) > 1 else 0


def _hull(points: np.ndarray):
    n = points.shape[1]
    if n == 1:
        lo, hi = points[:, 0].min(), points[:, 0].max()
        eq = np.array([[-1.0, lo], [1.0, -hi]])  # normal . x + offset <= 0
        verts = [int(points[:, 0].argmin()), int(points[:, 0].argmax())]
        return eq, sorted(verts), hi - lo
    hull = ConvexHull(points)
    return hull.equations, sorted(int(v) for v in hull.vertices), hull.volume


def _facets(points: np.ndarray, eq: np.ndarray) -> list[frozenset[int]]:
    """Vertex-index sets of the facets (merging coplanar hull simplices)."""
    out = set()
    for row in eq:
        on = np.abs(points @ row[:-1] + row[-1]) <= 1e-9
        out.add(frozenset(np.flatnonzero(on).tolist()))
    return sorted(out, key=sorted)


def _face_lattice(vertices: Sequence[Sequence[int]]) -> dict[frozenset[int], int]:
    """All nonempty faces (as local vertex-index sets) with their dimensions."""
    pts = np.array(vertices, dtype=float)
    n = pts.shape[1]
    full = frozenset(range(len(vertices)))
    faces = {full}
    if n == 1:
        faces |= {frozenset([i]) for i in range(len(vertices))}
    else:
        eq, _, _ = _hull(pts)
        frontier = set(_facets(pts, eq))
        while frontier:
            faces |= frontier
            new = set()
            for a, b in itertools.combinations(frontier | {f for f in faces if f != full}, 2):
                c = a & b
                if c and c not in faces:
                    new.add(c)
            frontier = new
    return {f: _affine_rank([vertices[i] for i in sorted(f)]) for f in faces}


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyDecomposition:
    """Lattice subdivision of a polytope with a convex PL function ``psi``.

    ``points`` lists every vertex of every cell; the polytope is their convex
    hull. Cells are tuples of point indices and ``psi`` gives one rational
    value per point. Validation runs on construction.
    """

    points: tuple[tuple[int, ...], ...]
    cells: tuple[tuple[int, ...], ...]
    psi: tuple[Fraction, ...]
    slopes: tuple[tuple[int, ...], ...] = field(init=False, default=())
    intercepts: tuple[Fraction, ...] = field(init=False, default=())

    def __post_init__(self):
        pts = tuple(tuple(int(a) for a in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "cells", tuple(tuple(int(i) for i in c) for c in self.cells))
        object.__setattr__(self, "psi", tuple(Fraction(v) for v in self.psi))
        self._validate_geometry()
        self._validate_psi()

    @property
    def dim(self) -> int:
        return len(self.points[0])

    @classmethod
    def from_fixture(cls, path: str | Path) -> "PolyDecomposition":
        return parse_fixture(Path(path).read_text(), source=str(path))

    def cell_points(self, k: int) -> np.ndarray:
        return np.array([self.points[i] for i in self.cells[k]], dtype=float)

    def _validate_geometry(self):
        if not self.points or not self.cells:
            raise InvalidFixture("fixture needs points and at least one cell")
        n = self.dim
        if any(len(p) != n for p in self.points):
            raise InvalidFixture("points have inconsistent dimension")
        if len(set(self.points)) != len(self.points):
            raise InvalidFixture("duplicate points")
        if len(self.psi) != len(self.points):
            raise InvalidFixture("psi needs one value per point")
        used = set()
        for k, c in enumerate(self.cells):
            if any(i < 0 or i >= len(self.points) for i in c) or len(set(c)) != len(c):
                raise InvalidFixture(f"cell {k} has invalid point indices")
            verts = [self.points[i] for i in c]
            if _affine_rank(verts) != n:
                raise InvalidFixture(f"cell {k} is not full-dimensional")
            _, hull_verts, _ = _hull(np.array(verts, dtype=float))
            if len(hull_verts) != len(c):
                raise InvalidFixture(f"cell {k} lists points that are not vertices of its hull")
            used.update(c)
        if used != set(range(len(self.points))):
            raise InvalidFixture("every point must be a vertex of some cell")
        _, _, total = _hull(np.array(self.points, dtype=float))
        vol = sum(_hull(self.cell_points(k))[2] for k in range(len(self.cells)))
        if abs(vol - total) > VOLUME_RTOL * max(total, 1.0):
            raise InvalidFixture(f"cell volumes sum to {vol}, polytope volume is {total}")
        eqs = [_hull(self.cell_points(k))[0] for k in range(len(self.cells))]
        for a, b in itertools.combinations(range(len(self.cells)), 2):
            if _interiors_meet(eqs[a], eqs[b], n):
                raise InvalidFixture(f"cells {a} and {b} have overlapping interiors")
            # face-to-face: a vertex of one cell inside another must be one of its vertices
            for x, y in ((a, b), (b, a)):
                for i in self.cells[x]:
                    if i in self.cells[y]:
                        continue
                    p = np.array(self.points[i], dtype=float)
                    if np.all(eqs[y][:, :-1] @ p + eqs[y][:, -1] <= 1e-9):
                        raise InvalidFixture(f"point {i} of cell {x} lies on cell {y} "
                                             f"without being one of its vertices")

    def _validate_psi(self):
        n = self.dim
        slopes, intercepts = [], []
        for k, c in enumerate(self.cells):
            verts = [self.points[i] for i in c]
            base = _independent_subset(verts)
            sol = solve_exact([list(verts[i]) + [1] for i in base], [self.psi[c[i]] for i in base])
            m, b = sol[:n], sol[n]
            for i, v in zip(c, verts):
                if sum(mi * vi for mi, vi in zip(m, v)) + b != self.psi[i]:
                    raise NonConvexPsi(f"psi is not affine on cell {k}", facet=(k,))
            if any(mi.denominator != 1 for mi in m):
                raise NonIntegralSlope(f"slope {tuple(str(x) for x in m)} of cell {k} is not integral")
            slopes.append(tuple(int(mi) for mi in m))
            intercepts.append(b)
        object.__setattr__(self, "slopes", tuple(slopes))
        object.__setattr__(self, "intercepts", tuple(intercepts))
        for a, b in itertools.combinations(range(len(self.cells)), 2):
            shared = sorted(set(self.cells[a]) & set(self.cells[b]))
            if not shared or _affine_rank([self.points[i] for i in shared]) != n - 1:
                continue
            facet = tuple(shared)
            for x, y in ((a, b), (b, a)):
                for i in self.cells[y]:
                    if i in shared:
                        continue
                    v = self.points[i]
                    affine_x = sum(mi * vi for mi, vi in zip(slopes[x], v)) + intercepts[x]
                    if not affine_x < self.psi[i]:
                        raise NonConvexPsi(f"psi is not strictly convex across the facet {facet} "
                                           f"between cells {a} and {b}", facet=facet)


def _independent_subset(verts) -> list[int]:
    chosen = [0]
    for i in range(1, len(verts)):
        if _affine_rank([verts[j] for j in chosen + [i]]) == len(chosen):
            chosen.append(i)
        if len(chosen) == len(verts[0]) + 1:
            break
    return chosen


def _interiors_meet(eq_a: np.ndarray, eq_b: np.ndarray, n: int) -> bool:
    """LP: is there a point strictly inside both cells (margin > 1e-9)?"""
    eq = np.vstack([eq_a, eq_b])
    norms = np.linalg.norm(eq[:, :-1], axis=1)
    # maximize s subject to normal . x + offset + s |normal| <= 0
    a_ub = np.hstack([eq[:, :-1], norms[:, None]])
    res = linprog(c=np.r_[np.zeros(n), -1.0], A_ub=a_ub, b_ub=-eq[:, -1],
                  bounds=[(None, None)] * n + [(None, 1.0)], method="highs")
    return bool(res.status == 0 and -res.fun > 1e-9)


def parse_fixture(text: str, source: str = "<fixture>") -> PolyDecomposition:
    """Parse ``[polytope]`` point rows, ``[cells]`` index rows and ``[psi]``
    ``index=value`` rows; ``#`` starts a comment."""
    section = None
    points, cells, psi = [], [], {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("polytope", "cells", "psi"):
                raise InvalidFixture(f"{source}:{lineno}: unknown section [{section}]")
            continue
        try:
            if section == "polytope":
                points.append(tuple(int(a) for a in line.replace(",", " ").split()))
            elif section == "cells":
                cells.append(tuple(int(a) for a in line.replace(",", " ").split()))
            elif section == "psi":
                key, val = line.split("=")
                psi[int(key)] = Fraction(val.strip())
            else:
                raise InvalidFixture(f"{source}:{lineno}: data outside a section")
        except ValueError as exc:
            raise InvalidFixture(f"{source}:{lineno}: {exc}") from None
    if set(psi) != set(range(len(points))):
        raise InvalidFixture(f"{source}: [psi] must give a value for every point index")
    return PolyDecomposition(tuple(points), tuple(cells), tuple(psi[i] for i in range(len(points))))


# ---------------------------------------------------------------------------
# degeneration data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Stratum:
    index: frozenset[int]      # maximal cells (components) containing it
    face: frozenset[int]       # point indices of the face of the subdivision
    dim: int                   # complex dimension of the stratum
    cone: Cone


@dataclass(frozen=True)
class DegenerationData:
    decomposition: PolyDecomposition
    normals: tuple[tuple[int, ...], ...]
    strata: tuple[Stratum, ...]
    u: Covector

    @property
    def dim(self) -> int:
        return self.decomposition.dim

    @property
    def n_components(self) -> int:
        return len(self.normals)

    def lower_faces(self) -> list[tuple[tuple[int, ...], Fraction]]:
        """Lower facets of the lifted polytope as (inner normal, offset): ``<n, (v, r)> >= offset``."""
        return [(nrm, self.decomposition.intercepts[k]) for k, nrm in enumerate(self.normals)]

    def stratum(self, index) -> Stratum:
        key = frozenset(index)
        for s in self.strata:
            if s.index == key:
                return s
        raise KeyError(f"no stratum with index {sorted(key)}")


def mumford_degeneration(pd: PolyDecomposition) -> DegenerationData:
    """Components, strata and local cones of the Mumford degeneration of ``pd``."""
    n = pd.dim
    normals = tuple(tuple(-m for m in slope) + (1,) for slope in pd.slopes)
    u = Covector(tuple(Fraction(0) for _ in range(n)) + (Fraction(1),))
    cell_sets = [frozenset(c) for c in pd.cells]
    faces: set[frozenset[int]] = set()
    for c in pd.cells:
        for local in _face_lattice([pd.points[i] for i in c]):
            faces.add(frozenset(c[i] for i in local))
    strata = {}
    for face in faces:
        index = frozenset(k for k, cs in enumerate(cell_sets) if face <= cs)
        common = frozenset.intersection(*(cell_sets[k] for k in index))
        if common != face:
            continue  # not the full intersection of the cells containing it
        if index in strata:
            continue
        try:
            cone = Cone.from_rays([normals[k] for k in sorted(index)])
        except Exception as exc:
            raise NotGorensteinLocally(f"stratum {sorted(index)} has a non-simplicial local cone: {exc}") \
                from None
        for ray in cone.rays:
            if u.pair(ray) != 1:
                raise NotGorensteinLocally(f"ray {ray} of stratum {sorted(index)} does not pair to 1")
        dim = _affine_rank([pd.points[i] for i in sorted(face)])
        strata[index] = Stratum(index, face, dim, cone)
    ordered = sorted(strata.values(), key=lambda s: (-s.dim, len(s.index), sorted(s.index)))
    return DegenerationData(pd, normals, tuple(ordered), u)


# ---------------------------------------------------------------------------
# dual complex
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualCell:
    index: frozenset[int]
    dim: int
    realization: SimplexDomain

    @property
    def vertices(self) -> frozenset:
        return frozenset(self.realization.vertices or ())


@dataclass(frozen=True)
class DualComplex:
    cells: tuple[DualCell, ...]
    faces: frozenset[tuple[frozenset[int], frozenset[int]]]  # (face, cell) pairs, proper

    def f_vector(self) -> tuple[int, ...]:
        if not self.cells:
            return ()
        top = max(c.dim for c in self.cells)
        return tuple(sum(1 for c in self.cells if c.dim == k) for k in range(top + 1))

    def without(self, index) -> "DualComplex":
        key = frozenset(index)
        return DualComplex(tuple(c for c in self.cells if c.index != key),
                           frozenset(p for p in self.faces if key not in p))

    def with_dim(self, index, dim: int) -> "DualComplex":
        key = frozenset(index)
        return DualComplex(tuple(replace(c, dim=dim) if c.index == key else c for c in self.cells),
                           self.faces)


def dual_complex(d: DegenerationData) -> DualComplex:
    cells = []
    for s in d.strata:
        try:
            real = cell_polytope(s.cone, d.u)
        except NotGorenstein as exc:
            raise NotGorensteinLocally(str(exc)) from None
        cells.append(DualCell(s.index, real.dim, real))
    faces = set()
    for a, b in itertools.permutations(cells, 2):
        if a.vertices < b.vertices:
            faces.add((a.index, b.index))
    cells.sort(key=lambda c: (c.dim, sorted(c.index)))
    return DualComplex(tuple(cells), frozenset(faces))


@dataclass
class DualityReport:
    passed: bool
    violations: list[tuple[str, str]]


def verify_duality(dc: DualComplex, d: DegenerationData) -> DualityReport:
    """Check cell/stratum bijection, dimension law and order reversal."""
    n = d.dim
    violations = []
    strata = {s.index: s for s in d.strata}
    cells = {c.index: c for c in dc.cells}
    for key in sorted(set(strata) - set(cells), key=sorted):
        violations.append(("missing-cell", f"stratum {sorted(key)} has no dual cell"))
    for key in sorted(set(cells) - set(strata), key=sorted):
        violations.append(("extra-cell", f"dual cell {sorted(key)} has no stratum"))
    for key in sorted(set(cells) & set(strata), key=sorted):
        if cells[key].dim + strata[key].dim != n:
            violations.append(("dimension-law",
                               f"cell {sorted(key)}: dim {cells[key].dim} + stratum dim "
                               f"{strata[key].dim} != {n}"))
    common = sorted(set(cells) & set(strata), key=sorted)
    for a, b in itertools.permutations(common, 2):
        is_face = (a, b) in dc.faces
        contains = strata[a].face > strata[b].face  # X_a contains X_b
        if is_face != contains:
            violations.append(("face-order",
                               f"cells {sorted(a)} < {sorted(b)} is {is_face} but stratum "
                               f"containment is {contains}"))
    return DualityReport(not violations, violations)


def format_dual_complex(dc: DualComplex) -> str:
    """Canonical text: one line per cell, then every proper face relation."""
    lines = ["# cells: dim index vertices"]
    for c in dc.cells:
        verts = " ".join("(" + ",".join(str(x) for x in v) + ")" for v in sorted(c.vertices))
        lines.append(f"cell {c.dim} {{{','.join(str(i) for i in sorted(c.index))}}} {verts}")
    lines.append("# face relations: face < cell")
    for a, b in sorted(dc.faces, key=lambda p: (len(p[0]), sorted(p[0]), len(p[1]), sorted(p[1]))):
        lines.append(f"face {{{','.join(map(str, sorted(a)))}}} < {{{','.join(map(str, sorted(b)))}}}")
    return "\n".join(lines) + "\n"
