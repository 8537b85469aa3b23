"""Checkable properties of discrete solutions: mass, bounds, energy, chi, moments."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .elliptic import dissipation
from .graphs import potential_array
from .grid import GridField, total_variation
from .semigroup import Trajectory

__all__ = [
    "InvariantViolation",
    "Tolerances",
    "DiagnosticsReport",
    "energy_trace",
    "dissipation_residual",
    "chi_field",
    "chi_regularity",
    "second_moment_balance",
    "step_energy_defects",
    "invariant_report",
]


class InvariantViolation(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    mass_rel: float = 1e-12
    min_u: float = 1e-12
    linf: float = 1e-10
    energy: float = 1e-10
    tv: float = 1e-8
    contraction: float = 1e-10


@dataclass
class DiagnosticsReport:
    rows: list[dict]
    summary: dict
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for row in self.rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
            fh.write(json.dumps({"summary": self.summary, "violations": self.violations}, sort_keys=True) + "\n")

    def to_csv(self, path: str | Path) -> None:
        keys = list(self.rows[0]) if self.rows else []
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(keys)
            for row in self.rows:
                w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in keys])


def energy_trace(traj: Trajectory) -> np.ndarray:
    """``Gamma_j = h * sum(j(u_j))`` for every stored time."""
    h = traj.grid.h
    return np.array([h * float(np.sum(potential_array(traj.graph, u))) for u in traj.u])


def _dissipations(traj: Trajectory) -> np.ndarray:
    h = traj.grid.h
    return np.array([dissipation(w, h) for w in traj.w[1:]])


def step_energy_defects(traj: Trajectory) -> np.ndarray:
    """``Gamma_j + (dt/2) h sum((w_j)')^2 - Gamma_{j-1}``, one per step; should be <= 0."""
    gam = energy_trace(traj)
    return gam[1:] + 0.5 * traj.dt * _dissipations(traj) - gam[:-1]


def dissipation_residual(traj: Trajectory) -> float:
    """Signed ``Gamma(T) - Gamma(0) + (1/2) sum_j dt h sum((w_j)')^2``.

    Non-positive for any graph; tends to zero under refinement when the
    graph is surjective.
    """
    gam = energy_trace(traj)
    return float(gam[-1] - gam[0] + 0.5 * traj.dt * float(np.sum(_dissipations(traj))))


def chi_field(u, w, u_floor: float = 0.0, tol: float = 1e-12) -> np.ndarray:
    """``sqrt(w/u)`` where ``u > u_floor``, zero elsewhere.

    Raises
    ------
    InvariantViolation
        If some ``w/u`` is negative beyond ``tol``: the selection must have
        the sign of ``u``.
    """
    uv = u.values if isinstance(u, GridField) else np.asarray(u, dtype=float)
    wv = w.values if isinstance(w, GridField) else np.asarray(w, dtype=float)
    out = np.zeros_like(uv)
    mask = uv > u_floor
    ratio = wv[mask] / uv[mask]
    if ratio.size and ratio.min() < -tol:
        raise InvariantViolation(f"w/u = {ratio.min():.3e} < 0: selection has the wrong sign")
    out[mask] = np.sqrt(np.clip(ratio, 0.0, None))
    return out


def chi_regularity(traj: Trajectory, support_only: bool = True) -> np.ndarray:
    """Max nodal jump ``max_i |chi_{i+1} - chi_i|`` per snapshot.

    With ``support_only`` the pairs touching a node at or below the floor are
    skipped: there chi is zero by convention, and a smooth tail crossing the
    floor would otherwise register an O(1) jump that the solution does not have.
    """
    floor = traj.u_floor()
    out = np.zeros(traj.times.size)
    for j, (u, w) in enumerate(zip(traj.u, traj.w)):
        d = np.abs(np.diff(chi_field(u, w, floor)))
        if support_only:
            above = u > floor
            d = d[above[1:] & above[:-1]]
        out[j] = float(d.max()) if d.size else 0.0
    return out


def second_moment_balance(traj: Trajectory) -> tuple[float, float]:
    """``(int x^2 (u(T) - u_0), dt h sum_j sum_i w_j)``; equal up to boundary terms."""
    h = traj.grid.h
    x2 = traj.grid.x ** 2
    lhs = h * float(np.dot(x2, traj.u[-1] - traj.u[0]))
    rhs = traj.dt * h * float(np.sum(traj.w[1:]))
    return lhs, rhs


def invariant_report(
    traj: Trajectory,
    other: Trajectory | None = None,
    tol: Tolerances = Tolerances(),
    per_step: bool = True,
) -> DiagnosticsReport:
    """Evaluate every discrete invariant and list violations with their time index.

    Parameters
    ----------
    traj : Trajectory
        The run to check.
    other : Trajectory, optional
        A second run on the same grid and steps; adds the ``pair_l1`` column
        and checks that it never grows.
    tol : Tolerances
        Absolute slack for each invariant (mass is relative).
    per_step : bool
        Set to False when consecutive rows are not single implicit steps
        (e.g. snapshots re-read from disk); step-energy and the integrated
        identities are then skipped.
    """
    h = traj.grid.h
    U = traj.u
    mass = h * U.sum(axis=1)
    mass0 = mass[0]
    linf = np.max(np.abs(U), axis=1)
    gam = energy_trace(traj)
    tv = np.array([total_variation(u) for u in U])
    umin = U.min(axis=1)
    bnd = np.maximum(np.abs(U[:, 0]), np.abs(U[:, -1]))
    chi_jump = chi_regularity(traj)
    steps = traj.times.size - 1
    stepwise = per_step and steps > 0
    step_def = step_energy_defects(traj) if stepwise else np.full(steps, np.nan)
    diss = _dissipations(traj) if stepwise else np.full(steps, np.nan)
    growth = traj.graph.local_growth(float(linf[0]))
    wmax = np.max(np.abs(traj.w), axis=1)

    contraction = None
    if other is not None:
        if other.u.shape != U.shape:
            raise ValueError("paired trajectories must share grid and time steps")
        contraction = h * np.sum(np.abs(U - other.u), axis=1)

    rows = []
    for j, t in enumerate(traj.times):
        row = {
            "t": float(t),
            "mass": float(mass[j]),
            "linf": float(linf[j]),
            "energy": float(gam[j]),
            "tv": float(tv[j]),
            "min_u": float(umin[j]),
            "max_boundary_u": float(bnd[j]),
            "chi_max_jump": float(chi_jump[j]),
            "w_linf": float(wmax[j]),
        }
        if j >= 1 and stepwise:
            row["step_energy_defect"] = float(step_def[j - 1])
            row["h1_seminorm_sq"] = float(diss[j - 1])
        if contraction is not None:
            row["pair_l1"] = float(contraction[j])
        rows.append(row)

    violations = []

    def flag(name, j, value, limit):
        violations.append({"invariant": name, "index": int(j), "t": float(traj.times[j]), "value": float(value), "limit": float(limit)})

    mass_lim = tol.mass_rel * abs(mass0)
    for j in range(1, steps + 1):
        if abs(mass[j] - mass0) > mass_lim:
            flag("mass", j, mass[j] - mass0, mass_lim)
        if umin[j] < -tol.min_u:
            flag("positivity", j, umin[j], -tol.min_u)
        if linf[j] > linf[0] + tol.linf:
            flag("linf_bound", j, linf[j] - linf[0], tol.linf)
        if stepwise and step_def[j - 1] > tol.energy:
            flag("step_energy", j, step_def[j - 1], tol.energy)
        if gam[j] > gam[j - 1] + tol.energy:
            flag("energy_monotone", j, gam[j] - gam[j - 1], tol.energy)
        if tv[j] > tv[0] + tol.tv:
            flag("total_variation", j, tv[j] - tv[0], tol.tv)
        if math.isfinite(growth) and wmax[j] > growth * linf[0] * (1 + 1e-12) + tol.linf:
            flag("w_growth", j, wmax[j], growth * linf[0])
        if contraction is not None and contraction[j] > contraction[j - 1] + tol.contraction:
            flag("l1_contraction", j, contraction[j] - contraction[j - 1], tol.contraction)

    lhs, rhs = second_moment_balance(traj) if stepwise else (None, None)
    summary = {
        "steps": int(steps),
        "dt": float(traj.dt),
        "h": float(h),
        "mass0": float(mass0),
        "max_mass_drift": float(np.max(np.abs(mass - mass0))),
        "min_u": float(umin.min()),
        "linf_excess": float(np.max(linf - linf[0])),
        "tv_excess": float(np.max(tv - tv[0])),
        "dissipation_residual": dissipation_residual(traj) if stepwise else None,
        "max_step_energy_defect": float(step_def.max()) if stepwise else None,
        "max_chi_jump": float(chi_jump[1:].max()) if steps > 0 else float(chi_jump[0]),
        "max_h1_seminorm_sq": float(diss.max()) if stepwise else None,
        "second_moment_lhs": lhs,
        "second_moment_rhs": rhs,
        "max_boundary_u": float(bnd.max()),
        "growth_constant": float(growth) if math.isfinite(growth) else None,
        "violations": len(violations),
    }
    return DiagnosticsReport(rows, summary, violations)

