import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kecollapse.errors import DomainViolation, LossOfConvexity, ResolutionTooCoarse
from kecollapse.mongeampere import (
    GridSpec,
    MASolution,
    assemble_hessian,
    closed_form_1d,
    edge_directions,
    exhaustion_schedule,
    hessian_field,
    ma_residual,
    solve_dirichlet,
    solve_real_ma,
)
from kecollapse.toric import SimplexDomain


@pytest.fixture(scope="module")
def sol1d():
    return solve_real_ma(SimplexDomain(1), 1.0, 2048)


@pytest.fixture(scope="module")
def sol2d():
    return solve_real_ma(SimplexDomain(2), 1.0, 64)


def test_closed_form_satisfies_equation_symbolically():
    sp = pytest.importorskip("sympy")
    x, k = sp.symbols("x kappa", positive=True)
    phi = -sp.log(sp.sqrt(k) / sp.pi * sp.sin(sp.pi * x))
    assert sp.simplify(sp.diff(phi, x, 2) - k * sp.exp(2 * phi)) == 0


def test_closed_form_values():
    assert closed_form_1d(1.0, 0.5) == pytest.approx(1.1447299, abs=1e-7)
    assert closed_form_1d(1.0, 0.1) == pytest.approx(2.3191, abs=1e-4)
    assert closed_form_1d(4.0, 0.5) == pytest.approx(math.log(math.pi) - 0.5 * math.log(4.0), abs=1e-15)
    assert closed_form_1d(4.0, 0.5) == pytest.approx(0.4516, abs=1e-4)
    with pytest.raises(DomainViolation):
        closed_form_1d(1.0, 1.0)


def test_edge_stencil_recovers_quadratic_hessian():
    rng = np.random.default_rng(1)
    for s in (1, 2, 3):
        a = rng.normal(size=(s, s))
        h = a @ a.T + np.eye(s)
        dirs = edge_directions(s)
        second = np.einsum("di,ij,dj->d", dirs, h, dirs)[None, :]
        assert np.allclose(assemble_hessian(second, s)[0], h, atol=1e-12)


def test_grid_rules():
    with pytest.raises(ResolutionTooCoarse):
        GridSpec(SimplexDomain(2), 4)
    g = GridSpec(SimplexDomain(2), 16)
    assert np.all(g.slack >= g.h * (1 - 1e-9))
    assert len(g) == 15 * 14 // 2


def test_1d_oracle(sol1d):
    x = sol1d.points[:, 0]
    mask = (x >= 0.05) & (x <= 0.95)
    assert np.max(np.abs(sol1d.values[mask] - closed_form_1d(1.0, x[mask]))) <= 5e-4
    assert sol1d.value_at([0.5]) == pytest.approx(math.log(math.pi), abs=1e-3)
    assert sol1d.residual_sup <= 1e-6


def test_1d_oracle_error_is_second_order():
    errs = []
    for r in (128, 256, 512):
        s = solve_real_ma(SimplexDomain(1), 1.0, r)
        x = s.points[:, 0]
        m = (x >= 0.25 - 1e-12) & (x <= 0.75 + 1e-12)
        errs.append(np.max(np.abs(s.values[m] - closed_form_1d(1.0, x[m]))))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3 <= q <= 5 for q in ratios), ratios


def test_kappa_shift_2d(sol2d):
    s4 = solve_real_ma(SimplexDomain(2), 4.0, 64)
    assert np.max(np.abs(s4.values - (sol2d.values - 0.5 * math.log(4)))) <= 1e-8


def test_triangle_symmetry(sol2d):
    g = sol2d.grid
    swap = g.lookup[g.index[:, 1], g.index[:, 0]]
    assert np.max(np.abs(sol2d.values - sol2d.values[swap])) <= 1e-8
    third = g.resolution - g.index.sum(axis=1)
    rot = g.lookup[g.index[:, 1], third]
    assert np.max(np.abs(sol2d.values - sol2d.values[rot])) <= 1e-8
    hess = hessian_field(sol2d)
    assert np.allclose(hess[swap][:, ::-1, ::-1], hess, atol=1e-8)


def test_hessians_symmetric_and_positive(sol2d):
    hess = hessian_field(sol2d)
    assert np.max(np.abs(hess - hess.transpose(0, 2, 1))) <= 1e-12
    assert np.all(np.linalg.eigvalsh(hess) > 0)


def test_hessian_at_midpoint_1d(sol1d):
    i = sol1d.grid.node_of([0.5])
    assert hessian_field(sol1d)[i, 0, 0] == pytest.approx(math.pi ** 2, rel=1e-4)


def test_blow_up_trend(sol2d):
    g = sol2d.grid
    i0 = int(np.argmin(sol2d.values))
    # along the ray from the minimiser towards the vertex at the origin
    k = g.index[i0]
    steps = [g.lookup[tuple(k - j)] for j in range(0, int(k.min()))]
    vals = sol2d.values[[s for s in steps if s >= 0]]
    assert np.all(np.diff(vals) > 0)


def test_3d_solve_small():
    s = solve_real_ma(SimplexDomain(3), 1.0, 16)
    assert s.residual_sup <= 1e-6
    assert np.all(np.linalg.eigvalsh(hessian_field(s)) > 0)


def test_dim_validation():
    with pytest.raises(DomainViolation, match="dim must be 1..3"):
        solve_real_ma(SimplexDomain(4), 1.0, 8)
    assert solve_real_ma(SimplexDomain(0), 1.0, 8).grid is None


def test_residual_summary_matches(sol2d):
    assert abs(ma_residual(sol2d).sup - sol2d.residual_sup) <= 1e-12


def test_residual_of_zero_function():
    g = GridSpec(SimplexDomain(1), 32)
    rep = ma_residual(MASolution.from_samples(g, 1.0, np.zeros(len(g)), mode="samples"))
    assert np.allclose(rep.field[np.isfinite(rep.field)], 1.0)


def test_residual_of_exact_samples_is_second_order():
    sups = []
    for r in (64, 128, 256):
        g = GridSpec(SimplexDomain(1), r)
        s = MASolution.from_samples(g, 1.0, closed_form_1d(1.0, g.points[:, 0]), mode="samples")
        sups.append(ma_residual(s, min_slack=0.05).sup)
    ratios = [a / b for a, b in zip(sups, sups[1:])]
    assert all(3 <= q <= 5 for q in ratios), ratios


def test_corrupted_solution_loses_convexity():
    g = GridSpec(SimplexDomain(1), 32)
    bad = MASolution.from_samples(g, 1.0, -closed_form_1d(1.0, g.points[:, 0]), mode="samples")
    with pytest.raises(LossOfConvexity):
        hessian_field(bad)


def test_exhaustion_is_monotone_in_boundary_value():
    grid = GridSpec(SimplexDomain(1), 256)
    inner = grid.slack >= 0.05
    prev, incs = None, []
    for m in exhaustion_schedule(1.0, 4):
        u, _, _ = solve_dirichlet(grid, 1.0, m, initial=prev)
        if prev is not None:
            assert np.all(u >= prev - 1e-12)
            incs.append(np.max((u - prev)[inner]))
        prev = u
    assert all(b < a for a, b in zip(incs, incs[1:]))


def test_exhaustion_mode_roughly_agrees_with_barrier():
    dom = SimplexDomain(1)
    bar = solve_real_ma(dom, 1.0, 256)
    ex = solve_real_ma(dom, 1.0, 256, mode="exhaustion")
    inner = ex.grid.slack >= 0.05
    assert ex.residual_sup <= 1e-6
    assert np.max(np.abs(ex.values[inner] - bar.values[inner])) < 0.05


def test_exhaustion_schedule_shifts_with_kappa():
    assert exhaustion_schedule(1.0, 3) == [4.0, 8.0, 12.0]
    assert exhaustion_schedule(4.0, 1)[0] == pytest.approx(4.0 - math.log(2))


@settings(max_examples=8, deadline=None)
@given(st.floats(0.1, 10.0))
def test_kappa_shift_property_1d(kappa):
    a = solve_real_ma(SimplexDomain(1), 1.0, 64)
    b = solve_real_ma(SimplexDomain(1), kappa, 64)
    assert np.max(np.abs(b.values - a.values + 0.5 * math.log(kappa))) <= 1e-8
