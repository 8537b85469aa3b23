import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from degdiff.elliptic import (
    ConvergenceError,
    dissipation,
    equation_defect,
    solve_inclusion,
    step_energy_check,
)
from degdiff.graphs import GraphSpec, build_graph, minimal_section, value_interval_array
from degdiff.grid import Grid

from strategies import graphs, linear_growth_graphs

N = 24
GRID = Grid(1.5, N)
fields = arrays(float, N, elements=st.floats(-3.0, 3.0))
lams = st.floats(1e-3, 1.0)


def in_graph(g, u, w, tol=1e-8):
    # horizontal slack: u carries the solver tolerance
    du = tol * (1.0 + np.abs(u))
    lo, _ = value_interval_array(g, u - du)
    _, hi = value_interval_array(g, u + du)
    slack = tol * (1.0 + np.abs(w))
    return np.all((w >= lo - slack) & (w <= hi + slack))


def test_three_node_linear_example(linear):
    grid = Grid(1.5, 3)
    assert grid.h == 1.0
    sol = solve_inclusion(linear, grid.field([0.0, 3.0, 0.0]), 2.0)
    np.testing.assert_allclose(sol.u.values, [0.75, 1.5, 0.75], atol=1e-10)
    np.testing.assert_allclose(sol.w.values, sol.u.values, atol=1e-10)


def test_three_node_energy_example(linear):
    grid = Grid(1.5, 3)
    f = grid.field([0.0, 3.0, 0.0])
    sol = solve_inclusion(linear, f, 2.0)
    lhs, rhs = step_energy_check(linear, f, sol, 2.0)
    assert lhs == pytest.approx(-2.8125, abs=1e-9)
    assert rhs == pytest.approx(-1.125, abs=1e-9)
    assert lhs <= rhs


@pytest.mark.parametrize("lam", [1e-3, 0.1, 10.0])
def test_heaviside_below_threshold_is_fixed(heaviside, lam):
    f = GRID.field(0.99 * np.abs(np.sin(GRID.x * 3)))
    sol = solve_inclusion(heaviside, f, lam)
    np.testing.assert_array_equal(sol.u.values, f.values)
    np.testing.assert_array_equal(sol.w.values, 0.0)
    assert step_energy_check(heaviside, f, sol, lam) == (0.0, 0.0)


@pytest.mark.parametrize("spec", [GraphSpec("heaviside"), GraphSpec("linear", a=2.0), GraphSpec("power", m=2.0)])
@pytest.mark.parametrize("m0", [0.5, 1.0, 2.5])
def test_constant_data(spec, m0):
    g = build_graph(spec)
    sol = solve_inclusion(g, GRID.field(np.full(N, m0)), 0.3)
    np.testing.assert_allclose(sol.u.values, m0, atol=1e-12)
    np.testing.assert_allclose(sol.w.values, minimal_section(g, m0), atol=1e-9)


@pytest.mark.parametrize("delta", [0.0, 0.5, 3.0])
def test_linear_matches_direct_solve(linear, delta):
    # (I - a D2 + lam*delta) w = f with zero-flux ghosts
    rng = np.random.default_rng(3)
    f = rng.uniform(0.0, 2.0, N)
    lam, h = 0.2, GRID.h
    a = lam / (2 * h * h)
    A = np.eye(N) * (1 + 2 * a + lam * delta) - a * (np.eye(N, k=1) + np.eye(N, k=-1))
    A[0, 0] -= a
    A[-1, -1] -= a
    w = np.linalg.solve(A, f)
    sol = solve_inclusion(linear, GRID.field(f), lam, delta)
    np.testing.assert_allclose(sol.u.values, w, atol=1e-9)
    assert np.max(np.abs(equation_defect(sol.u.values, sol.w.values, f, lam, h, delta))) <= 1e-9


def test_warm_start_gives_same_answer(pme):
    f = GRID.field(np.exp(-GRID.x**2))
    cold = solve_inclusion(pme, f, 0.05)
    warm = solve_inclusion(pme, f, 0.05, w0=cold.w.values * 1.01)
    np.testing.assert_allclose(warm.u.values, cold.u.values, atol=1e-9)
    assert warm.iterations <= cold.iterations


def test_out_of_range_warm_start_keeps_positivity(heaviside):
    # the negative branch of the Heaviside graph is the identity, so a negative
    # guess would otherwise leak into u at the level of the stopping tolerance
    f = GRID.field(np.where(np.abs(GRID.x) < 0.5, 1.7, 0.0))
    sol = solve_inclusion(heaviside, f, 0.05, w0=np.full(GRID.n, -1.0))
    assert sol.u.values.min() >= 0.0
    assert sol.w.values.min() >= 0.0


@pytest.mark.parametrize("L", [1.0, 100.0])
def test_segment_below_roundoff(L):
    # with c < 1 the jump at a subnormal threshold vanishes from x + c*w
    g = build_graph(GraphSpec("heaviside", e_c=5e-324))
    grid = Grid(L, 24)
    for f in (np.zeros(24), np.linspace(0.0, 3.0, 24)):
        sol = solve_inclusion(g, grid.field(f), 0.015625)
        assert sol.u.values.min() >= 0.0
        assert grid.h * sol.u.values.sum() == pytest.approx(grid.h * f.sum(), abs=1e-12)


def test_nonconvergence_is_reported(heaviside):
    f = GRID.field(np.where(np.abs(GRID.x) < 0.5, 3.0, 0.0))
    with pytest.raises(ConvergenceError) as err:
        solve_inclusion(heaviside, f, 1.0, max_sweeps=2)
    assert err.value.residual > 0 and err.value.sweeps == 2


@pytest.mark.parametrize("lam, delta", [(0.0, 0.0), (-1.0, 0.0), (0.1, -1.0)])
def test_invalid_parameters(linear, lam, delta):
    with pytest.raises(ValueError):
        solve_inclusion(linear, GRID.field(np.zeros(N)), lam, delta)


def test_dissipation_forward_differences():
    assert dissipation(np.array([0.0, 1.0, 3.0]), 0.5) == pytest.approx((1 + 4) / 0.5)


# -- properties -----------------------------------------------------------------


@given(graphs, fields, lams, st.sampled_from([0.0, 0.7]))
def test_solution_satisfies_inclusion(g, f, lam, delta):
    sol = solve_inclusion(g, GRID.field(f), lam, delta)
    assert in_graph(g, sol.u.values, sol.w.values)
    tol = 1e-10 + 1e-10 * np.max(np.abs(f))
    assert sol.residual <= tol
    defect = equation_defect(sol.u.values, sol.w.values, f, lam, GRID.h, delta)
    assert np.max(np.abs(defect)) <= 1e-12 * (1 + np.max(np.abs(f)) + lam / GRID.h**2 * np.max(np.abs(sol.w.values)))


@given(graphs, fields, fields, lams)
def test_l1_contraction(g, f1, f2, lam):
    u1 = solve_inclusion(g, GRID.field(f1), lam).u.values
    u2 = solve_inclusion(g, GRID.field(f2), lam).u.values
    h = GRID.h
    assert h * np.abs(u1 - u2).sum() <= h * np.abs(f1 - f2).sum() + 1e-10


@given(graphs, fields, lams)
def test_linf_bound_and_mass(g, f, lam):
    u = solve_inclusion(g, GRID.field(f), lam).u.values
    assert np.max(np.abs(u)) <= np.max(np.abs(f)) + 1e-10
    h = GRID.h
    assert abs(h * u.sum() - h * f.sum()) <= 1e-12 * max(h * np.abs(f).sum(), 1e-300) + 1e-15


@given(graphs, fields, arrays(float, N, elements=st.floats(0.0, 2.0)), lams)
def test_comparison(g, f1, bump, lam):
    u1 = solve_inclusion(g, GRID.field(f1), lam).u.values
    u2 = solve_inclusion(g, GRID.field(f1 + bump), lam).u.values
    assert np.all(u1 <= u2 + 1e-10)


@given(linear_growth_graphs, fields, lams)
def test_growth_of_selection(g, f, lam):
    sol = solve_inclusion(g, GRID.field(f), lam)
    c = g.growth_constant
    assert np.max(np.abs(sol.w.values)) <= c * np.max(np.abs(sol.u.values)) * (1 + 1e-9) + 1e-9


@given(graphs, fields, lams)
def test_energy_inequality(g, f, lam):
    field = GRID.field(f)
    sol = solve_inclusion(g, field, lam)
    lhs, rhs = step_energy_check(g, field, sol, lam)
    assert lhs <= rhs + 1e-10
