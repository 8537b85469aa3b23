"""Cell-centred uniform grids on [-L, L] and the discrete calculus on them."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Grid",
    "GridField",
    "integrate",
    "total_variation",
    "l1_distance",
    "linf_norm",
    "l2_inner",
    "cdf_edges",
    "sample_inverse_cdf",
    "write_field_csv",
    "read_field_csv",
    "gaussian",
]


@dataclass(frozen=True)
class Grid:
    """``n`` cells of width ``h = 2L/n``; nodes sit at the cell centres."""

    L: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"grid needs n >= 3 cells, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"grid half-width must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def x(self) -> np.ndarray:
        return -self.L + (np.arange(self.n) + 0.5) * self.h

    @property
    def edges(self) -> np.ndarray:
        return -self.L + np.arange(self.n + 1) * self.h

    def field(self, values) -> "GridField":
        return GridField(self, np.asarray(values, dtype=float))

    def sample(self, fn) -> "GridField":
        return GridField(self, np.asarray(fn(self.x), dtype=float))


@dataclass(frozen=True, eq=False)
class GridField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"field has shape {v.shape}, grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def __len__(self) -> int:
        return self.grid.n


def _vals(v) -> np.ndarray:
    return v.values if isinstance(v, GridField) else np.asarray(v, dtype=float)


def _h(v, h: float | None) -> float:
    if h is not None:
        return h
    if isinstance(v, GridField):
        return v.grid.h
    raise TypeError("raw arrays need an explicit spacing h")


def integrate(v: GridField, h: float | None = None) -> float:
    """Midpoint rule ``h * sum(v)``."""
    return _h(v, h) * float(np.sum(_vals(v)))


def total_variation(v) -> float:
    return float(np.sum(np.abs(np.diff(_vals(v)))))


def l1_distance(v, w, h: float | None = None) -> float:
    return _h(v, h) * float(np.sum(np.abs(_vals(v) - _vals(w))))


def linf_norm(v) -> float:
    vals = _vals(v)
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def l2_inner(v, w, h: float | None = None) -> float:
    return _h(v, h) * float(np.dot(_vals(v), _vals(w)))


def cdf_edges(density: GridField) -> np.ndarray:
    """Normalised CDF at the cell edges, density taken constant on each cell.

    Negative round-off undershoots are clamped to zero here.
    """
    mass = np.clip(density.values, 0.0, None) * density.grid.h
    total = float(np.sum(mass))
    if not total > 0:
        raise ValueError("density has no positive mass")
    F = np.concatenate(([0.0], np.cumsum(mass))) / total
    F[-1] = 1.0
    return F


def sample_inverse_cdf(density: GridField, quantiles: Sequence[float] | np.ndarray) -> np.ndarray:
    """Map quantiles in [0, 1] to positions through the piecewise-linear CDF.

    Positive quantiles map to the generalized inverse ``inf{x : F(x) >= q}``;
    quantile 0 maps to the left edge of the support.
    """
    q = np.asarray(quantiles, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("quantiles must lie in [0, 1]")
    F = cdf_edges(density)
    e = density.grid.edges
    k = np.where(q > 0, np.searchsorted(F, q, side="left"), np.searchsorted(F, 0.0, side="right"))
    k = np.clip(k, 1, F.size - 1)
    F0, F1 = F[k - 1], F[k]
    dF = F1 - F0
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(dF > 0, (q - F0) / np.where(dF > 0, dF, 1.0), 0.0)
    out = e[k - 1] + np.clip(t, 0.0, 1.0) * (e[k] - e[k - 1])
    return out


def write_field_csv(path: str | Path, columns: dict[str, np.ndarray]) -> None:
    """CSV with a header row; floats in shortest round-trip form."""
    names = list(columns)
    cols = [np.asarray(columns[k], dtype=float) for k in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


def read_field_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        names = next(r)
        rows = [[float(v) for v in row] for row in r]
    arr = np.array(rows, dtype=float).reshape(-1, len(names))
    return {k: arr[:, i] for i, k in enumerate(names)}


def gaussian(x: np.ndarray, var: float) -> np.ndarray:
    return np.exp(-0.5 * x * x / var) / math.sqrt(2.0 * math.pi * var)
