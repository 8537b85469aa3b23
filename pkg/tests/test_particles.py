import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degdiff.grid import Grid, gaussian, sample_inverse_cdf
from degdiff.particles import (
    EnsemblePath,
    LawComparison,
    ParticleEnsemble,
    fourth_moment_scaling,
    initial_positions,
    kde_on_grid,
    ks_statistic,
    ks_two,
    law_distance,
    moment_check,
    plotting_quantiles,
    silverman_bandwidth,
    simulate_coupled,
    simulate_selfconsistent,
    wasserstein_two,
)
from degdiff.semigroup import evolve

from conftest import indicator

HEAT_GRID = Grid(8.0, 800)


@pytest.fixture(scope="module")
def heat_traj(linear):
    return evolve(linear, HEAT_GRID.sample(lambda x: gaussian(x, 1.0)), 1.0, 20)


@pytest.fixture(scope="module")
def subcritical_traj(heaviside):
    return evolve(heaviside, indicator(Grid(2.0, 200), 0.9, 0.5), 0.5, 10)


def test_ks_two_point_example():
    g = Grid(1.0, 20)
    uniform = g.sample(lambda x: ((x > 0) & (x < 1)).astype(float))
    assert ks_statistic(np.array([0.75, 0.25]), uniform) == pytest.approx(0.25, abs=1e-14)


def test_w1_self_comparison():
    g = Grid(6.0, 600)
    d = g.sample(lambda x: gaussian(x, 1.0))
    N = 5000
    y = sample_inverse_cdf(d, plotting_quantiles(N))
    cmp = law_distance(y, d, 0.0)
    assert cmp.wasserstein1 <= 1e-12
    assert cmp.ks <= 1.0 / N + 1e-12
    assert cmp.hist_l1 < 0.1


def test_two_ensemble_distances():
    assert wasserstein_two(np.zeros(10), np.ones(10)) == pytest.approx(1.0)
    assert ks_two(np.zeros(10), np.ones(10)) == pytest.approx(1.0)


@given(st.lists(st.floats(-1.9, 1.9), min_size=1, max_size=50))
def test_law_distance_ranges(ys):
    g = Grid(2.0, 40)
    c = law_distance(np.array(ys), g.sample(lambda x: gaussian(x, 0.5)), 0.0)
    assert 0.0 <= c.ks <= 1.0
    assert c.wasserstein1 >= 0 and c.hist_l1 >= 0
    assert c.to_dict()["N"] == len(ys)


def test_ensemble_types():
    with pytest.raises(ValueError):
        ParticleEnsemble(np.zeros(0), 0.0, 1)
    with pytest.raises(ValueError):
        ParticleEnsemble(np.array([np.inf]), 0.0, 1)
    e = ParticleEnsemble(np.zeros(10), 0.0, 1, block_size=4)
    np.testing.assert_array_equal(e.stream_index, [0, 0, 0, 0, 1, 1, 1, 1, 2, 2])
    assert e.N == 10
    assert isinstance(law_distance(e, Grid(1.0, 10).field(np.ones(10))), LawComparison)


def test_initial_positions(heat_traj):
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        initial_positions(HEAT_GRID.field(np.zeros(800)), 10, rng)
    with pytest.raises(ValueError):
        initial_positions(heat_traj.snapshot(0), 0, rng)
    y = initial_positions(heat_traj.snapshot(0), 4000, rng)
    # stratified: the sorted sample is exactly the inverse CDF at plotting positions
    np.testing.assert_array_equal(np.sort(y), sample_inverse_cdf(heat_traj.snapshot(0), plotting_quantiles(4000)))
    iid = initial_positions(heat_traj.snapshot(0), 4000, rng, stratified=False)
    assert law_distance(iid, heat_traj.snapshot(0)).ks < 1.63 / math.sqrt(4000) * 1.5


@pytest.mark.parametrize("workers", [2, 4])
def test_coupled_deterministic_across_workers(heat_traj, workers):
    a = simulate_coupled(heat_traj, 10_000, 2, 99, block_size=1024)
    b = simulate_coupled(heat_traj, 10_000, 2, 99, block_size=1024, workers=workers)
    assert np.array_equal(a.positions, b.positions)
    c = simulate_coupled(heat_traj, 10_000, 2, 100, block_size=1024)
    assert not np.array_equal(a.positions[-1], c.positions[-1])


def test_coupled_store_subset(heat_traj):
    full = simulate_coupled(heat_traj, 3000, 1, 5)
    part = simulate_coupled(heat_traj, 3000, 1, 5, store=[0, 10, 20])
    np.testing.assert_array_equal(part.positions, full.positions[[0, 10, 20]])
    np.testing.assert_allclose(part.times, [0.0, 0.5, 1.0])


def test_coupled_brownian_variance(heat_traj):
    N = 40_000
    path = simulate_coupled(heat_traj, N, 4, 2024)
    y0, yT = path.positions[0], path.positions[-1]
    var0 = y0.var()
    ci = 4 * math.sqrt(2 / N) * yT.var()
    assert abs(yT.var() - var0 - 1.0) <= ci
    assert abs(yT.mean() - y0.mean()) <= 4 * yT.std() / math.sqrt(N)
    assert law_distance(path.at(20), heat_traj.snapshot(20)).ks <= 1.63 / math.sqrt(N) + 5e-3


def test_coupled_frozen_below_threshold(subcritical_traj):
    path = simulate_coupled(subcritical_traj, 5000, 2, 1)
    for k in range(path.times.size):
        np.testing.assert_array_equal(path.positions[k], path.positions[0])


def test_moment_check(heat_traj, subcritical_traj):
    rows = moment_check(simulate_coupled(heat_traj, 40_000, 2, 3), heat_traj)
    for r in rows:
        assert r["eta_integral"] == pytest.approx(r["t"], abs=2e-3)
        assert abs(r["var_increment"] - r["eta_integral"]) <= r["mc_halfwidth"] + 2e-3
    rows = moment_check(simulate_coupled(subcritical_traj, 2000, 1, 3), subcritical_traj)
    assert all(r["var_increment"] == 0.0 and r["eta_integral"] == 0.0 for r in rows)


def test_fourth_moment_brownian(heat_traj):
    rows = fourth_moment_scaling(simulate_coupled(heat_traj, 20_000, 2, 8))
    assert [r["lag"] for r in rows] == pytest.approx([0.05, 0.1, 0.2, 0.4, 0.8])
    for r in rows[:3]:
        # E|W_l|^4 = 3 l^2
        assert r["ratio"] == pytest.approx(3.0, rel=0.1)


def test_selfconsistent_matches_coupled_for_linear(linear, heat_traj):
    N = 20_000
    a = simulate_coupled(heat_traj, N, 1, 11)
    b = simulate_selfconsistent(linear, heat_traj.snapshot(0), 1.0, 20, N, 12)
    assert ks_two(a.positions[-1], b.positions[-1]) <= 1.63 * math.sqrt(2 / N)


def test_selfconsistent_frozen_below_threshold(heaviside, subcritical_traj):
    path = simulate_selfconsistent(heaviside, subcritical_traj.snapshot(0), 0.5, 10, 20_000, 4)
    np.testing.assert_array_equal(path.positions[-1], path.positions[0])


def test_selfconsistent_regularized_tracks_pde(heaviside):
    grid = Grid(2.0, 200)
    u0 = indicator(grid, 1.5, 1 / 3)
    traj = evolve(heaviside.regularize(0.1), u0, 0.1, 20)
    path = simulate_selfconsistent(heaviside, u0, 0.1, 20, 20_000, 6, eps=0.1, substeps=2)
    assert law_distance(path.at(20), traj.snapshot(20)).ks < 0.03


def test_selfconsistent_deterministic(linear, heat_traj):
    u0 = heat_traj.snapshot(0)
    a = simulate_selfconsistent(linear, u0, 0.2, 4, 9000, 1, block_size=2048)
    b = simulate_selfconsistent(linear, u0, 0.2, 4, 9000, 1, block_size=2048, workers=3)
    assert np.array_equal(a.positions, b.positions)


@pytest.mark.parametrize("bw", [0.0, -1.0])
def test_selfconsistent_rejects_bandwidth(linear, heat_traj, bw):
    with pytest.raises(ValueError):
        simulate_selfconsistent(linear, heat_traj.snapshot(0), 1.0, 2, 100, 0, bandwidth=bw)


def test_kde_and_bandwidth():
    rng = np.random.default_rng(1)
    y = rng.standard_normal(50_000)
    bw = silverman_bandwidth(y)
    assert bw == pytest.approx(1.06 * y.std() * 50_000 ** -0.2)
    g = Grid(6.0, 600)
    dens = kde_on_grid(y, g, bw)
    assert g.h * dens.sum() == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(dens - gaussian(g.x, 1 + bw * bw))) < 0.02


def test_path_accessors():
    p = EnsemblePath(np.array([0.0, 1.0]), np.zeros((2, 3)), 7)
    assert p.N == 3 and p.at(1).t == 1.0 and p.at(1).seed == 7
