import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kecollapse.errors import EmptyAfterClip, EmptyVariety, ValidationError
from kecollapse.tropical import (
    PointCloud,
    TropicalPolynomial,
    amoeba_sample,
    convergence_curve,
    corner_locus,
    hausdorff_distance,
    tropicalize,
)

LINE = TropicalPolynomial([((0, 0), 1, 0), ((1, 0), 1, 0), ((0, 1), 1, 0)])
REGION = (-2.0, 2.0, -2.0, 2.0)


def test_tropicalize_examples():
    f = tropicalize(LINE)
    assert f.evaluate((1, 2)) == (0, (0,))
    assert f.evaluate((-1, -2)) == (-2, (2,))
    g = tropicalize(TropicalPolynomial([((0, 0), 1, 0), ((1, 0), 1, 0), ((0, 1), 1, 0), ((1, 1), 1, 1)]))
    assert g((-3, -3)) == -5


def test_tropical_line_pieces():
    locus = corner_locus(tropicalize(LINE), REGION)
    assert sorted(p.kind for p in locus.pieces) == ["ray"] * 3
    assert locus.vertices == ((0, 0),)
    dirs = set()
    for p in locus.pieces:
        d = np.array([float(c) for c in p.direction])
        sign = 1 if p.hi is None else -1
        dirs.add(tuple(np.sign(sign * d).astype(int)))
    assert dirs == {(0, 1), (1, 0), (-1, -1)}


def test_single_term_has_empty_locus():
    f = tropicalize(TropicalPolynomial([((1, 2), 3.0, 1)]))
    locus = corner_locus(f, REGION)
    assert locus.pieces == () and len(locus.points) == 0


def test_one_variable_corner():
    f = tropicalize(TropicalPolynomial([((0,), 1, 0), ((1,), 1, 0), ((2,), 1, 3)]))
    locus = corner_locus(f, (-5.0, 5.0))
    # min{0, x, 3 + 2x}: corners at x = 0 and x = -3
    assert sorted(v[0] for v in locus.vertices) == [-3, 0]


polys = st.lists(
    st.tuples(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), st.integers(-3, 3)),
    min_size=2, max_size=6, unique_by=lambda t: t[0])


@settings(max_examples=40, deadline=None)
@given(polys, st.integers(-3, 3))
def test_minimizer_dichotomy_and_shift(terms, c):
    p = TropicalPolynomial([(u, 1.0, v) for u, v in terms])
    f = tropicalize(p)
    locus = corner_locus(f, REGION, 50)
    for x in locus.points:
        assert len(f.minimizers(x, 1e-9)) >= 2
    # generic rational points off the locus have a single minimizer
    rng = np.random.default_rng(len(terms))
    for x in rng.uniform(-2, 2, size=(20, 2)):
        q = (Fraction(x[0]).limit_denominator(10007), Fraction(x[1]).limit_denominator(10009))
        mins = f.minimizers(q)
        on_piece = len(mins) >= 2
        assert len(mins) == 1 or on_piece
    shifted = tropicalize(p.valuation_shift(c))
    x = (Fraction(1, 3), Fraction(-2, 7))
    assert shifted(x) == f(x) + c
    assert [pc.terms for pc in corner_locus(shifted, REGION, 50).pieces] == [pc.terms for pc in locus.pieces]
    assert np.array_equal(corner_locus(shifted, REGION, 50).points, locus.points)


def test_monomial_shift_leaves_locus_and_amoeba():
    p = LINE.monomial_shift((2, -1))
    a = corner_locus(tropicalize(LINE), REGION)
    b = corner_locus(tropicalize(p), REGION)
    assert np.array_equal(a.points, b.points)
    ca = amoeba_sample(LINE, math.exp(-8), REGION, 40, 8)
    cb = amoeba_sample(p, math.exp(-8), REGION, 40, 8)
    assert hausdorff_distance(ca, cb, REGION) <= 1e-9


def test_amoeba_of_linear_one_variable_is_exact():
    p = TropicalPolynomial([((0,), 1, 0), ((1,), 1, 0)])
    for t in (0.5, 1e-3, 1e-50):
        cloud = amoeba_sample(p, t)
        assert cloud.points.shape == (1, 1) and cloud.points[0, 0] == 0.0


def test_amoeba_witnesses():
    cloud = amoeba_sample(LINE, math.exp(-10), REGION, 60, 8)
    assert np.all(cloud.residuals <= 1e-9)
    for z, x in zip(cloud.witnesses[::37], cloud.points[::37]):
        terms = LINE.term_values(z, cloud.t_abs)
        assert abs(terms.sum()) <= 1e-9 * np.abs(terms).max()
        assert np.allclose(np.log(np.abs(z)) / math.log(cloud.t_abs), x)


def test_amoeba_distance_to_line_scales_with_log_t():
    locus = corner_locus(tropicalize(LINE), REGION, 800)
    consts = []
    for k in (10, 20):
        cloud = amoeba_sample(LINE, math.exp(-k), REGION, 100, 8)
        inside = cloud.points[np.all(np.abs(cloud.points) <= 2, axis=1)]
        d = hausdorff_distance(inside, locus, REGION)
        consts.append(d * k)
    assert consts[1] == pytest.approx(consts[0], rel=0.25)


def test_monomial_has_empty_variety():
    with pytest.raises(EmptyVariety):
        amoeba_sample(TropicalPolynomial([((1, 0), 1, 0)]), 0.1, REGION, 5, 4)


def test_hausdorff_examples():
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert hausdorff_distance(a, a, REGION) == 0.0
    seg = np.column_stack([np.linspace(0, 1, 1001), np.zeros(1001)])
    assert hausdorff_distance(np.array([[0.0, 0.0]]), seg, REGION) == pytest.approx(1.0, abs=1e-3)
    b = np.array([[0.5, -0.2]])
    assert hausdorff_distance(a, b, REGION) == hausdorff_distance(b, a, REGION)
    with pytest.raises(EmptyAfterClip):
        hausdorff_distance(np.array([[5.0, 5.0]]), a, REGION)


def test_convergence_curve_for_exact_case():
    p = TropicalPolynomial([((0,), 1, 0), ((1,), 1, 0)])
    rows = convergence_curve(p, [0.1, 0.01, 1e-4], (-2.0, 2.0))
    assert all(r[1] == 0.0 for r in rows)
    with pytest.raises(ValidationError):
        convergence_curve(p, [0.01, 0.1], (-2.0, 2.0))


def test_polynomial_file(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("# 1 + z1 + z2\n1 0 0 0 0\n1 0 0 1 0\n1 0 0 0 1\n")
    p = TropicalPolynomial.from_file(path)
    assert len(p) == 3 and p.nvars == 2
    path.write_text("1 0 0 0 0\n1 0 0 0 0\n")
    with pytest.raises(ValidationError):
        TropicalPolynomial.from_file(path)


def test_point_cloud_is_sorted():
    cloud = amoeba_sample(LINE, 0.01, REGION, 30, 4)
    assert isinstance(cloud, PointCloud)
    order = np.lexsort(cloud.points.T[::-1])
    assert np.array_equal(order, np.arange(len(order)))
