import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kecollapse.errors import (
    DegenerateParameter,
    EmptyDomain,
    NonPositiveModulus,
    NonSimplicial,
    NotFullDimensional,
    NotGorenstein,
)
from kecollapse.toric import (
    Cone,
    SimplexDomain,
    cell_polytope,
    dual_cone,
    fibration_base,
    gorenstein_covector,
    integer_solution,
    log_map,
    read_cone,
)


def brute_force_dual_rays(rays, box=4):
    """Extremal primitive vectors of the dual cone found by enumeration."""
    cands = []
    for a in range(-box, box + 1):
        for b in range(-box, box + 1):
            if (a, b) == (0, 0) or math.gcd(a, b) != 1:
                continue
            pairs = [a * v[0] + b * v[1] for v in rays]
            if min(pairs) >= 0 and pairs.count(0) == 1:
                cands.append((a, b))
    return set(cands)


def test_orthant_is_self_dual():
    assert dual_cone(Cone.from_rays([(1, 0), (0, 1)])).ray_set() == {(1, 0), (0, 1)}


def test_dual_cone_matches_enumeration():
    c = Cone.from_rays([(1, 0), (1, 2)])
    assert dual_cone(c).ray_set() == {(0, 1), (2, -1)}
    assert brute_force_dual_rays(c.rays) == {(0, 1), (2, -1)}


def test_biduality_example():
    c = Cone.from_rays([(1, 0), (1, 2)])
    assert dual_cone(dual_cone(c)).ray_set() == c.ray_set()


rays2 = st.tuples(st.integers(-6, 6), st.integers(-6, 6))


@settings(max_examples=60, deadline=None)
@given(rays2, rays2)
def test_biduality_and_enumeration_property(a, b):
    if a[0] * b[1] - a[1] * b[0] == 0:
        return
    c = Cone.from_rays([a, b])
    d = dual_cone(c)
    assert dual_cone(d).ray_set() == c.ray_set()
    for u in d.rays:
        assert all(sum(x * y for x, y in zip(u, v)) >= 0 for v in c.rays)


def test_rays_are_made_primitive():
    assert Cone.from_rays([(2, 4), (0, 3)]).rays == ((1, 2), (0, 1))


def test_dependent_rays_rejected():
    with pytest.raises(NonSimplicial):
        Cone.from_rays([(1, 1), (2, 2)])


def test_dual_of_lower_dimensional_cone_rejected():
    with pytest.raises(NotFullDimensional):
        dual_cone(Cone.from_rays([(1, 0, 0), (0, 1, 0)]))


def test_gorenstein_covector_examples():
    assert gorenstein_covector(Cone.from_rays([(1, 0, 0), (0, 1, 0), (0, 0, 1)])).entries == (1, 1, 1)
    assert gorenstein_covector(Cone.from_rays([(1, 0), (1, 2)])).entries == (1, 0)
    with pytest.raises(NotGorenstein):
        gorenstein_covector(Cone.from_rays([(2, 1), (1, 2)]))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(1, 3)), min_size=1, max_size=3))
def test_gorenstein_pairing_is_exactly_one(rays):
    # rays of the form (a, b, 1) always admit u = (0, 0, 1) on their span
    try:
        c = Cone.from_rays(rays)
    except NonSimplicial:
        return
    try:
        u = gorenstein_covector(c)
    except NotGorenstein:
        return
    assert all(u.pair(v) == 1 for v in c.rays)
    assert u.is_integral


def test_integer_solution():
    assert integer_solution([[2, 0], [0, 3]], [4, 9]) == (2, 3)
    assert integer_solution([[2, 4]], [1]) is None
    m = integer_solution([[3, 5]], [1])
    assert 3 * m[0] + 5 * m[1] == 1


def test_cell_polytope_standard_simplex():
    c = Cone.from_rays([(1, 0, 0), (0, 1, 0), (0, 0, 1)])
    dom = cell_polytope(c, gorenstein_covector(c))
    assert dom.dim == 2 and dom.margin == 0
    assert dom.contains([0.2, 0.3]) and not dom.contains([0.6, 0.5])


def test_cell_polytope_segment_of_length_two():
    c = Cone.from_rays([(1, 0), (1, 2)])
    dom = cell_polytope(c, gorenstein_covector(c))
    assert dom.dim == 1
    assert dom.edge_lattice_length(0, 1) == 2
    assert dom.embed([Fraction(1, 2)]) == (1, 1)


def test_cell_polytope_single_ray_is_a_point():
    c = Cone.from_rays([(1,)])
    assert cell_polytope(c, gorenstein_covector(c)).dim == 0


def test_log_map_examples():
    assert log_map([0.3], 0.3)[0] == pytest.approx(1.0, abs=1e-15)
    assert log_map([0.001], 0.01)[0] == pytest.approx(1.5, abs=1e-14)
    t = 0.05
    x = log_map([0.2, t / 0.2], t)
    assert x.sum() == pytest.approx(1.0, abs=1e-14)


def test_log_map_errors():
    with pytest.raises(DegenerateParameter):
        log_map([0.5], 1.0)
    with pytest.raises(NonPositiveModulus):
        log_map([0.0], 0.5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-6, 1e6), min_size=2, max_size=2),
       st.lists(st.floats(1e-6, 1e6), min_size=2, max_size=2), st.floats(1e-8, 0.99))
def test_log_additivity(a, b, t):
    lhs = log_map(np.multiply(a, b), t)
    rhs = log_map(a, t) + log_map(b, t)
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


def test_fibration_base_examples():
    assert fibration_base(2, 0.5, 1.0).margin == 0.0
    assert fibration_base(2, math.exp(-10), math.exp(-1)).margin == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(EmptyDomain):
        fibration_base(2, math.exp(-3), math.exp(-1))


def test_fibration_base_monotone():
    deltas = [fibration_base(2, math.exp(-k), 0.5).margin for k in (5, 10, 20, 40)]
    assert all(b < a for a, b in zip(deltas, deltas[1:]))


def test_simplex_domain_margin_bound():
    with pytest.raises(EmptyDomain):
        SimplexDomain(2, margin=1 / 3)


def test_read_cone(tmp_path):
    p = tmp_path / "cone.txt"
    p.write_text("# a cone\n1 0\n1 2  # second ray\n")
    assert read_cone(p).rays == ((1, 0), (1, 2))
