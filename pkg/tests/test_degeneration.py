from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kecollapse.acceptance import fixture_path
from kecollapse.degeneration import (
    PolyDecomposition,
    dual_complex,
    format_dual_complex,
    mumford_degeneration,
    parse_fixture,
    verify_duality,
)
from kecollapse.errors import InvalidFixture, NonConvexPsi, NonIntegralSlope
from kecollapse.toric import gorenstein_covector

DATA = Path(__file__).parent / "data"


def load(name):
    return PolyDecomposition.from_fixture(fixture_path(name))


def build(name):
    d = mumford_degeneration(load(name))
    return d, dual_complex(d)


def test_diagonal_square():
    d, dc = build("square_diagonal.txt")
    assert d.n_components == 2
    assert sorted((sorted(s.index), s.dim) for s in d.strata) == [([0], 2), ([0, 1], 1), ([1], 2)]
    assert dc.f_vector() == (2, 1)
    edge = next(c for c in dc.cells if c.index == frozenset({0, 1}))
    assert edge.dim == 1 == 2 - d.stratum({0, 1}).dim
    assert verify_duality(dc, d).passed


def test_trivial_decomposition():
    d, dc = build("square_trivial.txt")
    assert d.n_components == 1 and len(d.strata) == 1
    assert dc.f_vector() == (1,)


def test_two_by_two_fixture_regression():
    d, dc = build("square_2x2.txt")
    assert dc.f_vector() == (3, 3, 1)
    rep = verify_duality(dc, d)
    assert rep.passed, rep.violations
    text = format_dual_complex(dc) + "f_vector = 3,3,1\nduality = pass\n"
    assert text == (DATA / "square_2x2.expected").read_text()


@pytest.mark.parametrize("name", ["square_diagonal.txt", "square_trivial.txt", "square_2x2.txt"])
def test_laws_on_every_fixture(name):
    d, dc = build(name)
    n = d.dim
    assert dc.f_vector()[0] == len(d.decomposition.cells)
    strata = {s.index: s for s in d.strata}
    for c in dc.cells:
        assert c.dim + strata[c.index].dim == n
    for s in d.strata:
        u = gorenstein_covector(s.cone)
        assert all(d.u.pair(v) == 1 and u.pair(v) == 1 for v in s.cone.rays)
    for a in dc.cells:
        for b in dc.cells:
            if a.index != b.index:
                assert ((a.index, b.index) in dc.faces) == (strata[a.index].face > strata[b.index].face)


def test_injected_faults():
    d, dc = build("square_diagonal.txt")
    missing = verify_duality(dc.without({0, 1}), d)
    assert not missing.passed and missing.violations[0][0] == "missing-cell"
    wrong = verify_duality(dc.with_dim({0, 1}, 2), d)
    assert not wrong.passed and [v[0] for v in wrong.violations] == ["dimension-law"]


def test_invalid_psi():
    with pytest.raises(NonConvexPsi) as info:
        load("square_concave.txt")
    assert info.value.facet == (1, 2)
    with pytest.raises(NonIntegralSlope):
        load("square_fractional.txt")
    with pytest.raises(InvalidFixture):
        load("square_overlap.txt")


def test_non_strict_convexity_rejected():
    text = fixture_path("square_diagonal.txt").read_text().replace("3=1", "3=0")
    with pytest.raises(NonConvexPsi):
        parse_fixture(text)


def test_t_junction_rejected():
    text = """
[polytope]
0 0
2 0
0 2
1 1
2 2
[cells]
0 1 2
1 4 3
3 4 2
[psi]
0=0
1=0
2=0
3=1
4=3
"""
    with pytest.raises((InvalidFixture, NonConvexPsi)):
        parse_fixture(text)


def test_fixture_parse_errors():
    with pytest.raises(InvalidFixture):
        parse_fixture("[polytope]\n0 0\n[bogus]\n")
    with pytest.raises(InvalidFixture):
        parse_fixture("[polytope]\n0 0\n1 0\n0 1\n[cells]\n0 1 2\n[psi]\n0=0\n")


@settings(max_examples=25, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-5, 5))
def test_affine_shift_invariance(a, b, c):
    base = load("square_2x2.txt")
    psi = tuple(v + a * p[0] + b * p[1] + c for v, p in zip(base.psi, base.points))
    shifted = PolyDecomposition(base.points, base.cells, psi)
    d0, dc0 = build("square_2x2.txt")
    d1 = mumford_degeneration(shifted)
    dc1 = dual_complex(d1)
    assert [(s.index, s.face, s.dim) for s in d0.strata] == [(s.index, s.face, s.dim) for s in d1.strata]
    assert [(c.index, c.dim) for c in dc0.cells] == [(c.index, c.dim) for c in dc1.cells]
    assert dc0.faces == dc1.faces
    assert shifted.slopes == tuple((m[0] + a, m[1] + b) for m in base.slopes)


@pytest.mark.parametrize("name", ["square_diagonal.txt", "square_2x2.txt"])
def test_lifted_polytope_lower_faces(name):
    d, _ = build(name)
    pd = d.decomposition
    for k, (normal, offset) in enumerate(d.lower_faces()):
        assert normal[-1] == 1
        on_face = set()
        for i, p in enumerate(pd.points):
            value = sum(Fraction(x) * y for x, y in zip(normal, tuple(p) + (pd.psi[i],)))
            assert value >= offset
            if value == offset:
                on_face.add(i)
        # strict convexity: the facet touches exactly the vertices of its cell
        assert on_face == set(pd.cells[k])
