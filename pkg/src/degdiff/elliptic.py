"""Discrete monotone elliptic inclusion ``u - (lam/2) w'' + lam*delta*w = f, w in beta(u)``.

Zero-flux (reflecting) boundaries: the ghost values beyond either end copy
the boundary node, so the second difference telescopes and the scheme
conserves ``sum(u)`` exactly when ``delta == 0``.

The solver is nonlinear Gauss-Seidel. At node ``i`` the neighbours are
frozen and the local problem ``u_i + kappa_i * beta(u_i) ∋ r_i`` is solved
exactly by the scalar resolvent, so multivalued and flat graphs need no
smoothing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .graphs import MonotoneGraph, potential_array
from .grid import GridField

logger = logging.getLogger(__name__)

__all__ = [
    "EllipticSolution",
    "ConvergenceError",
    "solve_inclusion",
    "step_energy_check",
    "equation_defect",
]

TOL_ABS = 1e-10
TOL_REL = 1e-10
MAX_SWEEPS = 1_000_000


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float, sweeps: int):
        super().__init__(msg)
        self.residual = residual
        self.sweeps = sweeps
        self.trajectory = None
        self.step = None


@dataclass(frozen=True, eq=False)
class EllipticSolution:
    u: GridField
    w: GridField
    iterations: int
    residual: float


@nb.njit(cache=True)
def _power_resolve(coef, m, eps, c, r):
    A = 1.0 + c * eps
    B = c * coef
    s = abs(r)
    if s == 0.0:
        return 0.0
    if m == 1.0:
        x = s / (A + B)
    elif m == 2.0:
        x = 2.0 * s / (A + math.sqrt(A * A + 4.0 * B * s))
    else:
        # Newton from above on a convex increasing function
        x = min(s / A, (s / B) ** (1.0 / m))
        for _ in range(200):
            g = A * x + B * x**m - s
            dg = A + m * B * x ** (m - 1.0)
            step = g / dg
            x -= step
            if step <= 1e-16 * x:
                break
    return x if r > 0 else -x


@nb.njit(cache=True)
def _resolve(kind, params, pts, dirs, c, r):
    """Return (x, w) with w in beta(x) and x + c*w = r."""
    if kind == 1:
        coef, m, eps, inv = params[0], params[1], params[2], params[3]
        if inv == 0.0:
            x = _power_resolve(coef, m, eps, c, r)
            return x, coef * abs(x) ** (m - 1.0) * x + eps * x
        w = _power_resolve(coef, m, eps, 1.0 / c, r / c)
        return r - c * w, w
    xs = pts[0]
    ws = pts[1]
    k = xs.size
    lo = 0
    hi = k
    while lo < hi:
        mid = (lo + hi) // 2
        if xs[mid] + c * ws[mid] < r:
            lo = mid + 1
        else:
            hi = mid
    i = lo
    if i == 0:
        dx = dirs[0]
        dw = dirs[1]
        s = (xs[0] + c * ws[0] - r) / (dx + c * dw)
        return xs[0] - s * dx, ws[0] - s * dw
    if i == k:
        dx = dirs[2]
        dw = dirs[3]
        s = (r - xs[k - 1] - c * ws[k - 1]) / (dx + c * dw)
        return xs[k - 1] + s * dx, ws[k - 1] + s * dw
    v0 = xs[i - 1] + c * ws[i - 1]
    v1 = xs[i] + c * ws[i]
    t = (r - v0) / (v1 - v0)
    return xs[i - 1] + t * (xs[i] - xs[i - 1]), ws[i - 1] + t * (ws[i] - ws[i - 1])


@nb.njit(cache=True)
def _polyline_table(xs, ws, dirs, c):
    """Piecewise-linear maps r -> (x, w) solving x + c*w = r on a polyline.

    Piece ``s`` covers ``V[s-1] <= r < V[s]``; pieces 0 and k are the rays.
    """
    k = xs.size
    V = xs + c * ws
    X0 = np.empty(k + 1)
    W0 = np.empty(k + 1)
    R0 = np.empty(k + 1)
    SX = np.empty(k + 1)
    SW = np.empty(k + 1)
    dv = dirs[0] + c * dirs[1]
    X0[0], W0[0], R0[0] = xs[0], ws[0], V[0]
    SX[0], SW[0] = dirs[0] / dv, dirs[1] / dv
    for s in range(1, k):
        dv = V[s] - V[s - 1]
        X0[s], W0[s], R0[s] = xs[s - 1], ws[s - 1], V[s - 1]
        if dv > 0.0:
            SX[s] = (xs[s] - xs[s - 1]) / dv
            SW[s] = (ws[s] - ws[s - 1]) / dv
        else:
            # segment shorter than round-off in r; _locate never selects it
            SX[s] = 0.0
            SW[s] = 0.0
    dv = dirs[2] + c * dirs[3]
    X0[k], W0[k], R0[k] = xs[k - 1], ws[k - 1], V[k - 1]
    SX[k], SW[k] = dirs[2] / dv, dirs[3] / dv
    return V, X0, W0, R0, SX, SW


@nb.njit(cache=True, inline="always")
def _locate(V, s, r):
    k = V.size
    while s > 0 and r < V[s - 1]:
        s -= 1
    while s < k and r >= V[s]:
        s += 1
    return s


@nb.njit(cache=True)
def _gs_polyline(xs, ws, dirs, f, a, ld, u, w, tol, max_sweeps):
    n = f.size
    kb = a + ld
    ki = 2.0 * a + ld
    Vb, X0b, W0b, R0b, SXb, SWb = _polyline_table(xs, ws, dirs, kb)
    Vi, X0i, W0i, R0i, SXi, SWi = _polyline_table(xs, ws, dirs, ki)
    seg = np.zeros(n, dtype=np.int64)
    res = np.inf
    sweep = 0
    while sweep < max_sweeps:
        sweep += 1
        res = 0.0
        for i in range(n):
            if i == 0 or i == n - 1:
                r = f[i] + a * (w[1] if i == 0 else w[n - 2])
                s = _locate(Vb, seg[i], r)
                d = r - R0b[s]
                u[i] = X0b[s] + d * SXb[s]
                w[i] = W0b[s] + d * SWb[s]
            else:
                r = f[i] + a * (w[i - 1] + w[i + 1])
                s = _locate(Vi, seg[i], r)
                d = r - R0i[s]
                u[i] = X0i[s] + d * SXi[s]
                w[i] = W0i[s] + d * SWi[s]
            seg[i] = s
            if i >= 1:
                res = max(res, _node_defect(f, a, kb, ki, u, w, i - 1))
        res = max(res, _node_defect(f, a, kb, ki, u, w, n - 1))
        if res <= tol:
            break
    return sweep, res


@nb.njit(cache=True)
def _gs_power(params, f, a, ld, u, w, tol, max_sweeps):
    n = f.size
    coef, m, eps = params[0], params[1], params[2]
    inv = params[3] != 0.0
    kb = a + ld
    ki = 2.0 * a + ld
    res = np.inf
    sweep = 0
    while sweep < max_sweeps:
        sweep += 1
        res = 0.0
        for i in range(n):
            if i == 0:
                kap = kb
                r = f[0] + a * w[1]
            elif i == n - 1:
                kap = kb
                r = f[i] + a * w[i - 1]
            else:
                kap = ki
                r = f[i] + a * (w[i - 1] + w[i + 1])
            if inv:
                y = _power_resolve(coef, m, eps, 1.0 / kap, r / kap)
                x = r - kap * y
            else:
                x = _power_resolve(coef, m, eps, kap, r)
                if m == 2.0:
                    y = coef * abs(x) * x + eps * x
                else:
                    y = coef * abs(x) ** (m - 1.0) * x + eps * x
            u[i] = x
            w[i] = y
            if i >= 1:
                res = max(res, _node_defect(f, a, kb, ki, u, w, i - 1))
        res = max(res, _node_defect(f, a, kb, ki, u, w, n - 1))
        if res <= tol:
            break
    return sweep, res


@nb.njit(cache=True, inline="always")
def _node_defect(f, a, kb, ki, u, w, j):
    n = f.size
    if j == 0:
        return abs(u[0] + kb * w[0] - f[0] - a * w[1])
    if j == n - 1:
        return abs(u[j] + kb * w[j] - f[j] - a * w[j - 1])
    return abs(u[j] + ki * w[j] - f[j] - a * (w[j - 1] + w[j + 1]))


@nb.njit(cache=True)
def _apply_operator(f, a, ld, w, out):
    """out = f + a * D2(w) - ld * w with zero-flux ghosts."""
    n = f.size
    out[0] = f[0] + a * (w[1] - w[0]) - ld * w[0]
    for i in range(1, n - 1):
        out[i] = f[i] + a * ((w[i + 1] - w[i]) - (w[i] - w[i - 1])) - ld * w[i]
    out[n - 1] = f[n - 1] + a * (w[n - 2] - w[n - 1]) - ld * w[n - 1]


def equation_defect(u: np.ndarray, w: np.ndarray, f: np.ndarray, lam: float, h: float, delta: float = 0.0) -> np.ndarray:
    """Nodewise defect ``u - (lam/2h^2) D2 w + lam*delta*w - f``."""
    a = lam / (2.0 * h * h)
    wp = np.concatenate(([w[0]], w, [w[-1]]))
    return u - a * (wp[2:] - 2.0 * w + wp[:-2]) + lam * delta * w - f


def solve_inclusion(
    g: MonotoneGraph,
    f: GridField,
    lam: float,
    delta: float = 0.0,
    *,
    w0: np.ndarray | None = None,
    tol_abs: float = TOL_ABS,
    tol_rel: float = TOL_REL,
    max_sweeps: int = MAX_SWEEPS,
) -> EllipticSolution:
    """One resolvent step ``u = J_lam f`` of ``A u = -(1/2)(beta(u))''``.

    Parameters
    ----------
    g : MonotoneGraph
        Coefficient graph.
    f : GridField
        Right-hand side.
    lam : float
        Step size, must be positive.
    delta : float
        Zeroth-order coefficient of the shifted problem.
    w0 : ndarray, optional
        Initial selection for the sweeps (warm start).

    Returns
    -------
    EllipticSolution
        ``u`` is reconstructed from ``w`` through the discrete equation, so
        mass telescopes to round-off; ``w`` is the resolvent selection.

    Raises
    ------
    ConvergenceError
        If the defect does not reach the tolerance within ``max_sweeps``.
    """
    if not lam > 0:
        raise ValueError(f"step size must be positive, got {lam}")
    if not delta >= 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    h = f.grid.h
    fv = np.ascontiguousarray(f.values, dtype=float)
    a = lam / (2.0 * h * h)
    ld = lam * delta
    kind, params, pts, dirs = g.kernel_data()
    if w0 is None:
        w = np.zeros_like(fv)
    else:
        w = np.array(w0, dtype=float, copy=True)
    # min f <= u <= max f, so the selection lies in [inf beta(min f), sup beta(max f)];
    # starting inside keeps every monotone sweep inside (an extrapolated guess may not be)
    lo = g.value_interval(float(fv.min()))[0]
    hi = g.value_interval(float(fv.max()))[1]
    if math.isfinite(lo) or math.isfinite(hi):
        np.clip(w, lo if math.isfinite(lo) else None, hi if math.isfinite(hi) else None, out=w)
    u = np.empty_like(fv)
    tol = tol_abs + tol_rel * float(np.max(np.abs(fv)))
    if kind == 0:
        xs = np.ascontiguousarray(pts[0])
        ws = np.ascontiguousarray(pts[1])
        sweeps, res = _gs_polyline(xs, ws, dirs, fv, a, ld, u, w, tol, max_sweeps)
    else:
        sweeps, res = _gs_power(params, fv, a, ld, u, w, tol, max_sweeps)
    if not res <= tol:
        raise ConvergenceError(
            f"Gauss-Seidel stalled after {sweeps} sweeps with defect {res:.3e} > {tol:.3e}",
            res,
            sweeps,
        )
    _apply_operator(fv, a, ld, w, u)
    return EllipticSolution(f.grid.field(u), f.grid.field(w), int(sweeps), float(res))


def dissipation(w: np.ndarray, h: float) -> float:
    """``h * sum(((w[i+1] - w[i]) / h)**2)``, forward differences."""
    dw = np.diff(w)
    return float(np.sum(dw * dw)) / h


def step_energy_check(g: MonotoneGraph, f: GridField, sol: EllipticSolution, lam: float) -> tuple[float, float]:
    """Discrete energy inequality of one step.

    Returns ``(lhs, rhs)`` with ``lhs = h*sum(j(u)) - h*sum(j(f))`` and
    ``rhs = -(lam/2) * h * sum((w')**2)``; a solution satisfies
    ``lhs <= rhs`` up to round-off.
    """
    h = f.grid.h
    lhs = h * float(np.sum(potential_array(g, sol.u.values)) - np.sum(potential_array(g, f.values)))
    rhs = -0.5 * lam * dissipation(sol.w.values, h)
    return lhs, rhs
