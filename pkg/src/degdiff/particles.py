"""Particle realisations of ``dY = chi(t, Y) dW`` with ``Law(Y_t) = u(t, .)``.

Two modes:

* coupled: the coefficient ``chi_u`` is read off a precomputed PDE
  trajectory, frozen on each PDE step and linearly interpolated in space;
* self-consistent: the density is re-estimated from the particles at every
  step (binned Gaussian KDE) and ``chi = Phi(u_hat(Y))``.

Random numbers come from independent Philox streams, one per block of
``block_size`` consecutive particles. Blocks are the unit of parallel work,
so results depend only on ``(seed, N, block_size)`` and never on the
number of workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.ndimage import gaussian_filter1d

from .graphs import MonotoneGraph, phi_array
from .grid import Grid, GridField, cdf_edges, sample_inverse_cdf
from .semigroup import Trajectory

logger = logging.getLogger(__name__)

__all__ = [
    "ParticleEnsemble",
    "EnsemblePath",
    "LawComparison",
    "initial_positions",
    "simulate_coupled",
    "simulate_selfconsistent",
    "law_distance",
    "ks_statistic",
    "wasserstein_two",
    "ks_two",
    "moment_check",
    "fourth_moment_scaling",
    "plotting_quantiles",
    "silverman_bandwidth",
]

DEFAULT_BLOCK = 4096


@dataclass(eq=False)
class ParticleEnsemble:
    positions: np.ndarray
    t: float
    seed: int
    block_size: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.positions.ndim != 1 or self.positions.size < 1:
            raise ValueError("ensemble needs at least one particle")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("particle positions must be finite")

    @property
    def N(self) -> int:
        return self.positions.size

    @property
    def stream_index(self) -> np.ndarray:
        """Index of the random stream each particle draws from."""
        return np.arange(self.N) // self.block_size


@dataclass(eq=False)
class EnsemblePath:
    """Particle positions at the PDE times ``times[k]`` (row ``k`` of ``positions``)."""

    times: np.ndarray
    positions: np.ndarray
    seed: int
    block_size: int = DEFAULT_BLOCK

    def at(self, k: int) -> ParticleEnsemble:
        return ParticleEnsemble(self.positions[k], float(self.times[k]), self.seed, self.block_size)

    @property
    def N(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class LawComparison:
    t: float
    ks: float
    wasserstein1: float
    hist_l1: float
    N: int

    def to_dict(self) -> dict:
        return {"t": self.t, "ks": self.ks, "w1": self.wasserstein1, "hist_l1": self.hist_l1, "N": self.N}


def _streams(seed: int, N: int, block_size: int) -> tuple[np.random.Generator, list[np.random.Generator]]:
    ss = np.random.SeedSequence(seed)
    nblocks = -(-N // block_size)
    children = ss.spawn(nblocks + 1)
    init = np.random.Generator(np.random.Philox(children[0]))
    blocks = [np.random.Generator(np.random.Philox(c)) for c in children[1:]]
    return init, blocks


def plotting_quantiles(N: int) -> np.ndarray:
    return (np.arange(N) + 0.5) / N


def initial_positions(u0: GridField, N: int, rng: np.random.Generator, stratified: bool = True) -> np.ndarray:
    """Draw ``N`` positions with law ``u0``: shuffled stratified quantiles, or i.i.d."""
    if N < 1:
        raise ValueError("need at least one particle")
    if not float(np.sum(np.clip(u0.values, 0.0, None))) > 0:
        raise ValueError("initial density has empty support")
    if stratified:
        q = plotting_quantiles(N)
        rng.shuffle(q)
    else:
        q = rng.random(N)
    return sample_inverse_cdf(u0, q)


def _reflect(y: np.ndarray, L: float) -> None:
    # a single fold suffices while steps stay below the domain width
    np.copyto(y, np.where(y > L, 2.0 * L - y, y))
    np.copyto(y, np.where(y < -L, -2.0 * L - y, y))
    np.clip(y, -L, L, out=y)


def _run_blocks(fn, nblocks: int, workers: int) -> None:
    if workers <= 1:
        for b in range(nblocks):
            fn(b)
        return
    with ThreadPoolExecutor(max_workers=workers) as ex:
        list(ex.map(fn, range(nblocks)))


def simulate_coupled(
    traj: Trajectory,
    N: int,
    substeps: int,
    seed: int,
    *,
    stratified: bool = True,
    block_size: int = DEFAULT_BLOCK,
    workers: int = 1,
    store: np.ndarray | None = None,
) -> EnsemblePath:
    """Euler-Maruyama for ``dY = chi_u(t, Y) dW`` driven by a PDE trajectory.

    Parameters
    ----------
    traj : Trajectory
        Source of ``u_j`` and ``w_j``; ``chi_{u_j}`` is used on ``(t_{j-1}, t_j]``.
    N : int
        Number of particles.
    substeps : int
        Euler-Maruyama steps per PDE step.
    seed : int
        Master seed.
    store : array of int, optional
        PDE step indices at which positions are kept (default: all).
    """
    if substeps < 1:
        raise ValueError("need at least one substep")
    grid = traj.grid
    init_rng, rngs = _streams(seed, N, block_size)
    Y = initial_positions(traj.snapshot(0), N, init_rng, stratified)
    idx = np.arange(traj.times.size) if store is None else np.unique(np.asarray(store, dtype=int))
    out = np.empty((idx.size, N))
    keep = {int(j): k for k, j in enumerate(idx)}
    if 0 in keep:
        out[keep[0]] = Y
    x = grid.x
    sq = math.sqrt(traj.dt / substeps)
    nblocks = len(rngs)
    for j in range(1, traj.times.size):
        chi = traj.chi(j)
        if not np.any(chi > 0):
            # frozen step; streams still advance so later steps do not depend on this shortcut
            for rng in rngs:
                rng.standard_normal((substeps, block_size))
        else:

            def advance(b, chi=chi):
                sl = slice(b * block_size, min((b + 1) * block_size, N))
                y = Y[sl]
                xi = rngs[b].standard_normal((substeps, block_size))
                for s in range(substeps):
                    c = np.interp(y, x, chi)
                    y += c * sq * xi[s, : y.size]
                    _reflect(y, grid.L)

            _run_blocks(advance, nblocks, workers)
        if j in keep:
            out[keep[j]] = Y
    return EnsemblePath(traj.times[idx].copy(), out, seed, block_size)


def silverman_bandwidth(y: np.ndarray) -> float:
    return 1.06 * float(np.std(y)) * y.size ** (-0.2)


def kde_on_grid(y: np.ndarray, grid: Grid, bandwidth: float) -> np.ndarray:
    """Binned Gaussian KDE, reflected at the domain edges."""
    counts, _ = np.histogram(y, bins=grid.edges)
    dens = counts / (y.size * grid.h)
    return gaussian_filter1d(dens, bandwidth / grid.h, mode="reflect", truncate=5.0)


def simulate_selfconsistent(
    g: MonotoneGraph,
    u0: GridField,
    T: float,
    steps: int,
    N: int,
    seed: int,
    *,
    bandwidth: float | None = None,
    eps: float = 0.0,
    substeps: int = 1,
    stratified: bool = True,
    block_size: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> EnsemblePath:
    """Interacting-particle version: ``dY = Phi(u_hat(Y)) dW`` with ``u_hat`` the ensemble KDE.

    With ``eps > 0`` the coefficient is ``Phi_eps = sqrt(Phi^2 + eps)``.
    Exploratory: in the degenerate case the nonlinear SDE need not have a
    unique solution.
    """
    if bandwidth is not None and not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    geff = g.regularize(eps) if eps > 0 else g
    grid = u0.grid
    # particles carry the normalised law; the coefficient needs u itself
    mass = grid.h * float(np.sum(np.clip(u0.values, 0.0, None)))
    init_rng, rngs = _streams(seed, N, block_size)
    Y = initial_positions(u0, N, init_rng, stratified)
    dt = T / steps
    times = np.arange(steps + 1) * dt
    times[-1] = T
    out = np.empty((steps + 1, N))
    out[0] = Y
    sq = math.sqrt(dt / substeps)
    for j in range(1, steps + 1):
        for s in range(substeps):
            bw = bandwidth if bandwidth is not None else silverman_bandwidth(Y)
            uhat = mass * kde_on_grid(Y, grid, bw)
            coef_grid = phi_array(geff, uhat)

            def advance(b, coef_grid=coef_grid, s=s):
                sl = slice(b * block_size, min((b + 1) * block_size, N))
                y = Y[sl]
                xi = rngs[b].standard_normal(block_size)
                c = np.interp(y, grid.x, coef_grid)
                y += c * sq * xi[: y.size]
                _reflect(y, grid.L)

            _run_blocks(advance, len(rngs), workers)
        out[j] = Y
    return EnsemblePath(times, out, seed, block_size)


def ks_statistic(sample: np.ndarray, density: GridField) -> float:
    """Sup distance between the empirical CDF and the cell-wise linear CDF of ``density``."""
    y = np.sort(np.asarray(sample, dtype=float))
    N = y.size
    F = np.interp(y, density.grid.edges, cdf_edges(density))
    i = np.arange(1, N + 1)
    return float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))


def law_distance(ensemble: ParticleEnsemble | np.ndarray, density: GridField, t: float | None = None) -> LawComparison:
    if isinstance(ensemble, ParticleEnsemble):
        y, t = ensemble.positions, ensemble.t if t is None else t
    else:
        y = np.asarray(ensemble, dtype=float)
    N = y.size
    ks = ks_statistic(y, density)
    ys = np.sort(y)
    w1 = float(np.mean(np.abs(ys - sample_inverse_cdf(density, plotting_quantiles(N)))))
    grid = density.grid
    counts, _ = np.histogram(np.clip(y, -grid.L, grid.L), bins=grid.edges)
    hist = counts / (N * grid.h)
    dens = np.clip(density.values, 0.0, None)
    dens = dens / (grid.h * dens.sum())
    hl1 = float(grid.h * np.sum(np.abs(hist - dens)))
    return LawComparison(float(t) if t is not None else math.nan, ks, w1, hl1, N)


def ks_two(a: np.ndarray, b: np.ndarray) -> float:
    return float(stats.ks_2samp(a, b).statistic)


def wasserstein_two(a: np.ndarray, b: np.ndarray) -> float:
    return float(stats.wasserstein_distance(a, b))


def moment_check(path: EnsemblePath, traj: Trajectory) -> list[dict]:
    """Variance growth of the particles against ``int_0^t int eta dx ds / mass``.

    The Monte-Carlo half-width is four standard errors of the variance
    increment estimator.
    """
    h = traj.grid.h
    mass = h * float(np.sum(traj.u[0]))
    # eta is w_j on (t_{j-1}, t_j]
    flux = np.concatenate(([0.0], np.cumsum(traj.dt * h * traj.w[1:].sum(axis=1)))) / mass
    Y0 = path.positions[0]
    m0 = Y0.mean()
    rows = []
    for k, t in enumerate(path.times):
        Yt = path.positions[k]
        mt = Yt.mean()
        lhs = float(Yt.var() - Y0.var())
        inc = (Yt - mt) ** 2 - (Y0 - m0) ** 2
        ci = 4.0 * float(inc.std()) / math.sqrt(Yt.size)
        j = traj.index_at(float(t))
        rows.append({"t": float(t), "var_increment": lhs, "eta_integral": float(flux[j]), "mc_halfwidth": ci})
    return rows


def fourth_moment_scaling(path: EnsemblePath, max_lag_steps: int | None = None) -> list[dict]:
    """``E|Y_{s+l} - Y_s|^4 / l^2`` over dyadic lags ``l`` (multiples of the PDE step).

    Averaged over all stored start times ``s`` and all particles.
    """
    times = path.times
    K = times.size
    dt = float(times[1] - times[0])
    rows = []
    lag = 1
    while lag < K and (max_lag_steps is None or lag <= max_lag_steps):
        d = path.positions[lag:] - path.positions[:-lag]
        m4 = float(np.mean(d**4))
        ell = lag * dt
        rows.append({"lag": ell, "m4": m4, "ratio": m4 / ell**2})
        lag *= 2
    return rows
