"""Implicit (Crandall-Liggett) time stepping ``u_j = J_dt u_{j-1}``."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .elliptic import ConvergenceError, solve_inclusion
from .graphs import MonotoneGraph, minimal_section_array
from .grid import Grid, GridField, l1_distance

logger = logging.getLogger(__name__)

__all__ = ["Trajectory", "evolve", "epsilon_continuation", "self_convergence", "chi_values"]


def chi_values(u: np.ndarray, w: np.ndarray, u_floor: float) -> np.ndarray:
    """Nodal ``sqrt(w/u)`` on ``{u > u_floor}``, zero elsewhere.

    Used for particle coefficients; the checked version lives in
    ``diagnostics.chi_field``.
    """
    out = np.zeros_like(u)
    mask = u > u_floor
    out[mask] = np.sqrt(np.clip(w[mask] / u[mask], 0.0, None))
    return out


@dataclass(eq=False)
class Trajectory:
    """Snapshots ``u[j]`` at ``times[j]`` and selections ``w[j] in beta(u[j])``.

    ``w[0]`` is the minimal section of the initial datum; for ``j >= 1``,
    ``w[j]`` is the value of the step function eta on ``(t_{j-1}, t_j]``.
    """

    grid: Grid
    graph: MonotoneGraph
    times: np.ndarray
    u: np.ndarray
    w: np.ndarray
    sweeps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def snapshot(self, j: int) -> GridField:
        return self.grid.field(self.u[j])

    def selection(self, j: int) -> GridField:
        return self.grid.field(self.w[j])

    def index_at(self, t: float) -> int:
        """Index of the step whose interval ``(t_{j-1}, t_j]`` contains ``t``."""
        if t <= 0:
            return 0
        j = int(math.ceil(t / self.dt - 1e-9))
        return min(max(j, 0), self.steps)

    def u_floor(self) -> float:
        return 1e-12 * float(np.max(np.abs(self.u[0])))

    def chi(self, j: int) -> np.ndarray:
        return chi_values(self.u[j], self.w[j], self.u_floor())


def evolve(
    g: MonotoneGraph,
    u0: GridField,
    T: float,
    steps: int,
    **solver_opts,
) -> Trajectory:
    """Run ``steps`` implicit steps of size ``T/steps`` from ``u0``."""
    if not T > 0:
        raise ValueError(f"final time must be positive, got {T}")
    if steps < 1:
        raise ValueError(f"need at least one step, got {steps}")
    if np.any(u0.values < 0):
        raise ValueError("initial datum must be non-negative")
    grid = u0.grid
    dt = T / steps
    times = np.arange(steps + 1) * dt
    times[-1] = T
    U = np.empty((steps + 1, grid.n))
    W = np.empty((steps + 1, grid.n))
    U[0] = u0.values
    W[0] = minimal_section_array(g, u0.values)
    sweeps = np.zeros(steps, dtype=np.int64)
    residuals = np.zeros(steps)
    for j in range(1, steps + 1):
        guess = 2.0 * W[j - 1] - W[j - 2] if j >= 2 else W[j - 1]
        try:
            sol = solve_inclusion(g, grid.field(U[j - 1]), dt, 0.0, w0=guess, **solver_opts)
        except ConvergenceError as err:
            # keep what was computed so callers can still report on it
            err.trajectory = Trajectory(grid, g, times[:j].copy(), U[:j].copy(), W[:j].copy(), sweeps[: j - 1], residuals[: j - 1])
            err.step = j
            raise
        U[j] = sol.u.values
        W[j] = sol.w.values
        sweeps[j - 1] = sol.iterations
        residuals[j - 1] = sol.residual
    logger.debug("evolve: %d steps, %d sweeps total", steps, int(sweeps.sum()))
    return Trajectory(grid, g, times, U, W, sweeps, residuals)


def epsilon_continuation(
    g: MonotoneGraph,
    u0: GridField,
    T: float,
    steps: int,
    eps_list: Sequence[float],
    **solver_opts,
) -> tuple[list[Trajectory], list[float]]:
    """Trajectories for ``beta + eps*id`` and sup-in-time L1 gaps between neighbours."""
    eps_list = list(eps_list)
    if any(not e > 0 for e in eps_list):
        raise ValueError("regularization parameters must be positive")
    if any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
        raise ValueError("regularization parameters must be strictly decreasing")
    trajs = [evolve(g.regularize(e), u0, T, steps, **solver_opts) for e in eps_list]
    h = u0.grid.h
    gaps = []
    for a, b in zip(trajs[:-1], trajs[1:]):
        gaps.append(max(l1_distance(a.u[j], b.u[j], h) for j in range(a.times.size)))
    return trajs, gaps


@dataclass
class ConvergenceRow:
    steps: int
    error: float
    order: float


def self_convergence(
    g: MonotoneGraph,
    u0: GridField,
    T: float,
    steps_list: Sequence[int],
    **solver_opts,
) -> list[ConvergenceRow]:
    """Cauchy errors ``||u_{N_k}(T) - u_{N_{k+1}}(T)||_1`` over doubling step counts."""
    steps_list = list(steps_list)
    if len(steps_list) < 2:
        raise ValueError("need at least two step counts")
    if any(b != 2 * a for a, b in zip(steps_list[:-1], steps_list[1:])):
        raise ValueError("step counts must double")
    finals = [evolve(g, u0, T, n, **solver_opts).u[-1] for n in steps_list]
    h = u0.grid.h
    errs = [l1_distance(a, b, h) for a, b in zip(finals[:-1], finals[1:])]
    rows = []
    for k, e in enumerate(errs):
        if k + 1 < len(errs) and errs[k + 1] > 0 and e > 0:
            order = math.log2(e / errs[k + 1])
        else:
            order = math.nan
        rows.append(ConvergenceRow(steps_list[k], e, order))
    return rows
