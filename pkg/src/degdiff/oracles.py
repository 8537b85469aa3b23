"""Closed-form reference solutions of ``u_t = (1/2) (beta(u))''``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import beta as beta_fn

from .grid import Grid, GridField, gaussian

__all__ = [
    "ExactSolution",
    "heat_exact",
    "heat_solution",
    "barenblatt",
    "barenblatt_constants",
    "barenblatt_solution",
    "barenblatt_residual",
    "barenblatt_front",
    "stationary_subcritical",
    "oracle_trajectory",
]


@dataclass(frozen=True)
class ExactSolution:
    kind: str
    parameters: dict
    evaluator: Callable[[float, np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, t: float, x) -> np.ndarray:
        return self.evaluator(t, np.asarray(x, dtype=float))

    def on(self, grid: Grid, t: float) -> GridField:
        return grid.field(self(t, grid.x))


def heat_exact(sigma0: float, t: float, x):
    """Density of ``N(0, sigma0**2 + t)``: beta = id turns the equation into ``u_t = u''/2``."""
    if not sigma0 > 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    return gaussian(np.asarray(x, dtype=float), sigma0 * sigma0 + t)


def heat_solution(sigma0: float = 1.0) -> ExactSolution:
    return ExactSolution("heat", {"sigma0": sigma0}, lambda t, x: heat_exact(sigma0, t, x))


def barenblatt_constants(m: float, mass: float = 1.0) -> tuple[float, float, float]:
    """``(alpha, k, C)`` of the source solution of ``U_s = (U^m)_xx`` in 1-d.

    ``U(s, x) = s^-alpha (C - k x^2 s^-2alpha)_+^(1/(m-1))`` with
    ``alpha = 1/(m+1)``, ``k = alpha (m-1) / (2m)``; C follows from
    ``int U dx = C^(p+1/2) k^(-1/2) B(1/2, p+1)``, ``p = 1/(m-1)``.
    """
    if not m > 1:
        raise ValueError(f"Barenblatt profile needs m > 1, got {m}")
    alpha = 1.0 / (m + 1.0)
    k = alpha * (m - 1.0) / (2.0 * m)
    p = 1.0 / (m - 1.0)
    C = float((mass * math.sqrt(k) / beta_fn(0.5, p + 1.0)) ** (1.0 / (p + 0.5)))
    return alpha, k, C


def barenblatt(m: float, mass: float, t: float, x):
    """Source solution of ``u_t = (1/2)(u^m)''``, i.e. the classical profile at ``s = t/2``."""
    if not t > 0:
        raise ValueError(f"Barenblatt profile needs t > 0, got {t}")
    alpha, k, C = barenblatt_constants(m, mass)
    s = 0.5 * t
    x = np.asarray(x, dtype=float)
    core = np.clip(C - k * x * x * s ** (-2.0 * alpha), 0.0, None)
    return s ** (-alpha) * core ** (1.0 / (m - 1.0))


def barenblatt_front(m: float, mass: float, t: float) -> float:
    alpha, k, C = barenblatt_constants(m, mass)
    return math.sqrt(C / k) * (0.5 * t) ** alpha


def barenblatt_solution(m: float = 2.0, mass: float = 1.0) -> ExactSolution:
    return ExactSolution(
        "barenblatt", {"m": m, "mass": mass}, lambda t, x: barenblatt(m, mass, t, x)
    )


def barenblatt_residual(m: float, mass: float, t: float, h: float, dt: float, margin: float = 0.8) -> float:
    """Max of ``|u_t - (1/2)(u^m)''|`` by centred differences inside ``margin * front``.

    Both differences are second order, so the value shrinks like ``h^2 + dt^2``
    when the constants are right and stays O(1) otherwise.
    """
    front = barenblatt_front(m, mass, t)
    x = np.arange(-margin * front, margin * front + 0.5 * h, h)
    ut = (barenblatt(m, mass, t + dt, x) - barenblatt(m, mass, t - dt, x)) / (2.0 * dt)
    wm = barenblatt(m, mass, t, x - h) ** m
    w0 = barenblatt(m, mass, t, x) ** m
    wp = barenblatt(m, mass, t, x + h) ** m
    lap = (wp - 2.0 * w0 + wm) / (h * h)
    return float(np.max(np.abs(ut - 0.5 * lap)))


def stationary_subcritical(e_c: float, u0: GridField) -> ExactSolution:
    """Data below the threshold do not move: the zero selection solves the equation."""
    if not float(np.max(u0.values)) < e_c:
        raise ValueError("initial datum must stay strictly below the threshold e_c")
    vals = u0.values.copy()
    grid = u0.grid

    def evaluate(t, x):
        return np.interp(x, grid.x, vals, left=0.0, right=0.0)

    return ExactSolution("stationary", {"e_c": e_c}, evaluate)


def oracle_trajectory(sol: ExactSolution, grid: Grid, times: np.ndarray, graph):
    """Sample an exact solution into a trajectory (``w`` = minimal section of ``u``)."""
    from .graphs import minimal_section_array
    from .semigroup import Trajectory

    U = np.array([sol(t, grid.x) for t in times])
    W = np.array([minimal_section_array(graph, row) for row in U])
    return Trajectory(grid, graph, np.asarray(times, dtype=float), U, W)
