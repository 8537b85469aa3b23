"""Maximal monotone graphs on the real line.

Two concrete representations cover everything the solver needs:

* ``PolylineGraph``: a monotone piecewise-linear curve in the (x, w) plane,
  closed off by two rays. Linear, Heaviside-type and tabulated coefficients
  are stored this way. Vertical pieces are filled jumps, horizontal pieces
  are flats, so taking the inverse graph is a coordinate swap and adding
  ``eps * id`` is a shear; both stay exact.
* ``PowerGraph``: ``w = coef * |x|**(m-1) * x + eps * x`` or its inverse.

Every graph answers the same scalar questions (value interval, minimal
section, resolvent, potential), which are the only entry points used by
the grid solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "GraphSpec",
    "GraphSpecError",
    "MonotoneGraph",
    "PolylineGraph",
    "PowerGraph",
    "build_graph",
    "minimal_section",
    "value_interval",
    "resolvent_scalar",
    "bisect_resolvent",
    "potential_j",
    "phi_section",
    "regularize",
    "inverse_graph",
]

BISECT_TOL = 1e-12
BISECT_MAXITER = 60


class GraphSpecError(ValueError):
    """Invalid graph parameters."""


@dataclass(frozen=True)
class GraphSpec:
    kind: str
    m: float = 2.0
    e_c: float = 1.0
    a: float = 1.0
    table: tuple[tuple[float, float], ...] = ()

    def validate(self) -> None:
        if self.kind == "power":
            if not self.m >= 1:
                raise GraphSpecError(f"power graph needs m >= 1, got m={self.m}")
        elif self.kind == "heaviside":
            if not self.e_c >= 0:
                raise GraphSpecError(f"heaviside graph needs e_c >= 0, got e_c={self.e_c}")
        elif self.kind == "linear":
            if not self.a >= 0:
                raise GraphSpecError(f"linear graph needs a >= 0, got a={self.a}")
        elif self.kind == "table":
            pts = self.table
            if len(pts) < 2:
                raise GraphSpecError("table graph needs at least two breakpoints")
            if tuple(pts[0]) != (0.0, 0.0):
                raise GraphSpecError(f"table must start at (0, 0), got {tuple(pts[0])}")
            for (x0, w0), (x1, w1) in zip(pts[:-1], pts[1:]):
                if x1 < x0 or w1 < w0:
                    raise GraphSpecError(
                        f"table is not non-decreasing between ({x0}, {w0}) and ({x1}, {w1})"
                    )
                if (x0, w0) == (x1, w1):
                    raise GraphSpecError(f"repeated breakpoint ({x0}, {w0})")
            if pts[1][0] == 0.0:
                raise GraphSpecError("table has a jump at 0, which breaks linear growth")
            if pts[-1][0] <= 0.0:
                raise GraphSpecError("table must extend to positive x")
        else:
            raise GraphSpecError(f"unknown graph kind {self.kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "m": float(self.m)}
        if self.kind == "heaviside":
            return {"kind": "heaviside", "e_c": float(self.e_c)}
        if self.kind == "linear":
            return {"kind": "linear", "a": float(self.a)}
        return {"kind": "table", "table": [[float(x), float(w)] for x, w in self.table]}

    @classmethod
    def from_dict(cls, d: dict) -> "GraphSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind is None:
            raise GraphSpecError("graph block needs a 'kind' key")
        allowed = {"power": {"m"}, "heaviside": {"e_c"}, "linear": {"a"}, "table": {"table"}}
        if kind not in allowed:
            raise GraphSpecError(f"unknown graph kind {kind!r}")
        extra = set(d) - allowed[kind]
        if extra:
            raise GraphSpecError(f"unexpected keys for {kind} graph: {sorted(extra)}")
        if "table" in d:
            d["table"] = tuple((float(x), float(w)) for x, w in d["table"])
        spec = cls(kind=kind, **{k: (v if k == "table" else float(v)) for k, v in d.items()})
        spec.validate()
        return spec

    def to_toml(self) -> str:
        """Inline-table form, e.g. ``graph = { kind = "heaviside", e_c = 1.0 }``."""
        items = []
        for k, v in self.to_dict().items():
            if isinstance(v, str):
                items.append(f'{k} = "{v}"')
            elif isinstance(v, list):
                rows = ", ".join(f"[{x!r}, {w!r}]" for x, w in v)
                items.append(f"{k} = [{rows}]")
            else:
                items.append(f"{k} = {v!r}")
        return "graph = { " + ", ".join(items) + " }"


class MonotoneGraph:
    """Common interface of a maximal monotone graph beta in R x R."""

    spec: GraphSpec | None

    def value_interval(self, x: float) -> tuple[float, float]:
        """Return ``(inf beta(x), sup beta(x))``; ``(nan, nan)`` outside the domain."""
        raise NotImplementedError

    def resolvent(self, c: float, r: float) -> tuple[float, float]:
        """Return ``(x, w)`` with ``w in beta(x)`` and ``x + c*w = r``."""
        raise NotImplementedError

    def potential(self, x: float) -> float:
        raise NotImplementedError

    def regularize(self, eps: float) -> "MonotoneGraph":
        raise NotImplementedError

    def inverse(self) -> "MonotoneGraph":
        raise NotImplementedError

    @property
    def growth_constant(self) -> float:
        """Smallest c with ``|w| <= c|x|`` for every ``w in beta(x)``; ``inf`` if none."""
        raise NotImplementedError

    def local_growth(self, bound: float) -> float:
        """Growth constant restricted to ``|x| <= bound``."""
        raise NotImplementedError

    @property
    def jumps(self) -> list[tuple[float, tuple[float, float]]]:
        return []

    def minimal_section(self, x: float) -> float:
        lo, hi = self.value_interval(x)
        if math.isnan(lo):
            return math.nan
        if lo <= 0.0 <= hi:
            return 0.0
        return lo if lo > 0.0 else hi

    def phi(self, x: float) -> float:
        if not x > 0.0:
            return 0.0
        b = self.minimal_section(x)
        return math.sqrt(max(b, 0.0) / x)

    def kernel_data(self) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
        """Flat arrays consumed by the compiled elliptic kernel."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class PolylineGraph(MonotoneGraph):
    """Monotone polyline through ``points`` extended by two rays.

    ``left_dir`` and ``right_dir`` are non-negative, non-zero direction
    vectors ``(dx, dw)``; the left ray runs from the first point in the
    direction ``-left_dir``, the right ray from the last point along
    ``right_dir``. A vertical ray means the domain is bounded on that side.
    """

    xs: np.ndarray
    ws: np.ndarray
    left_dir: tuple[float, float]
    right_dir: tuple[float, float]
    spec: GraphSpec | None = None
    eps: float = 0.0

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ws = np.asarray(self.ws, dtype=float)
        if xs.shape != ws.shape or xs.ndim != 1 or xs.size < 1:
            raise GraphSpecError("polyline needs matching 1-d breakpoint arrays")
        if np.any(np.diff(xs) < 0) or np.any(np.diff(ws) < 0):
            raise GraphSpecError("polyline breakpoints must be non-decreasing in x and w")
        if np.any((np.diff(xs) == 0) & (np.diff(ws) == 0)):
            raise GraphSpecError("polyline has repeated breakpoints")
        for d in (self.left_dir, self.right_dir):
            if d[0] < 0 or d[1] < 0 or d[0] + d[1] <= 0:
                raise GraphSpecError(f"invalid ray direction {d}")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ws", ws)

    # -- geometry helpers -------------------------------------------------

    def _w_on_left_ray(self, x: float) -> float:
        dx, dw = self.left_dir
        return self.ws[0] + (x - self.xs[0]) * dw / dx

    def _w_on_right_ray(self, x: float) -> float:
        dx, dw = self.right_dir
        return self.ws[-1] + (x - self.xs[-1]) * dw / dx

    def _x_lo_bound(self) -> float:
        return -math.inf if self.left_dir[0] > 0 else float(self.xs[0])

    def _x_hi_bound(self) -> float:
        return math.inf if self.right_dir[0] > 0 else float(self.xs[-1])

    def value_interval(self, x: float) -> tuple[float, float]:
        xs, ws = self.xs, self.ws
        k = xs.size
        if x < self._x_lo_bound() or x > self._x_hi_bound():
            return (math.nan, math.nan)
        # lowest point of the curve above abscissa x
        i = int(np.searchsorted(xs, x, side="left"))
        if i == 0:
            if x == xs[0]:
                lo = -math.inf if self.left_dir[0] == 0 else ws[0]
            else:
                lo = self._w_on_left_ray(x)
        elif i == k:
            lo = self._w_on_right_ray(x)
        elif xs[i] == x:
            lo = ws[i]
        else:
            t = (x - xs[i - 1]) / (xs[i] - xs[i - 1])
            lo = ws[i - 1] + t * (ws[i] - ws[i - 1])
        # highest point
        j = int(np.searchsorted(xs, x, side="right")) - 1
        if j == k - 1:
            if x == xs[-1]:
                hi = math.inf if self.right_dir[0] == 0 else ws[-1]
            else:
                hi = self._w_on_right_ray(x)
        elif j < 0:
            hi = self._w_on_left_ray(x)
        elif xs[j] == x:
            hi = ws[j]
        else:
            t = (x - xs[j]) / (xs[j + 1] - xs[j])
            hi = ws[j] + t * (ws[j + 1] - ws[j])
        return (float(lo), float(hi))

    def resolvent(self, c: float, r: float) -> tuple[float, float]:
        if not c > 0:
            raise ValueError(f"resolvent needs c > 0, got {c}")
        xs, ws = self.xs, self.ws
        v = xs + c * ws
        k = xs.size
        i = int(np.searchsorted(v, r, side="left"))
        if i == 0:
            dx, dw = self.left_dir
            s = (v[0] - r) / (dx + c * dw)
            return (float(xs[0] - s * dx), float(ws[0] - s * dw))
        if i == k:
            dx, dw = self.right_dir
            s = (r - v[-1]) / (dx + c * dw)
            return (float(xs[-1] + s * dx), float(ws[-1] + s * dw))
        t = (r - v[i - 1]) / (v[i] - v[i - 1])
        x = xs[i - 1] + t * (xs[i] - xs[i - 1])
        w = ws[i - 1] + t * (ws[i] - ws[i - 1])
        return (float(x), float(w))

    def potential(self, x: float) -> float:
        return float(_polyline_potential_array(self, np.array([x], dtype=float))[0])

    def regularize(self, eps: float) -> "PolylineGraph":
        if not eps > 0:
            raise ValueError(f"regularization needs eps > 0, got {eps}")
        ldx, ldw = self.left_dir
        rdx, rdw = self.right_dir
        return PolylineGraph(
            self.xs,
            self.ws + eps * self.xs,
            (ldx, ldw + eps * ldx),
            (rdx, rdw + eps * rdx),
            spec=self.spec,
            eps=self.eps + eps,
        )

    def inverse(self) -> "PolylineGraph":
        return PolylineGraph(
            self.ws.copy(),
            self.xs.copy(),
            (self.left_dir[1], self.left_dir[0]),
            (self.right_dir[1], self.right_dir[0]),
        )

    @property
    def jumps(self) -> list[tuple[float, tuple[float, float]]]:
        out = []
        for i in range(self.xs.size - 1):
            if self.xs[i] == self.xs[i + 1]:
                out.append((float(self.xs[i]), (float(self.ws[i]), float(self.ws[i + 1]))))
        return out

    @property
    def growth_constant(self) -> float:
        xs, ws = self.xs, self.ws
        if self.left_dir[0] == 0 or self.right_dir[0] == 0:
            return math.inf
        if self.value_interval(0.0) != (0.0, 0.0):
            return math.inf
        c = 0.0
        for x, w in zip(xs, ws):
            if x != 0.0:
                c = max(c, abs(w) / abs(x))
        # on each ray |w|/|x| is monotone, so its sup is an endpoint or the slope
        c = max(c, self.left_dir[1] / self.left_dir[0], self.right_dir[1] / self.right_dir[0])
        return float(c)

    def local_growth(self, bound: float) -> float:
        if not math.isfinite(bound):
            return self.growth_constant
        if self.value_interval(0.0) != (0.0, 0.0):
            return math.inf
        c = 0.0
        pts = [(x, w) for x, w in zip(self.xs, self.ws) if x != 0.0 and abs(x) <= bound]
        for x in (-bound, bound):
            lo, hi = self.value_interval(x)
            if math.isnan(lo) or math.isinf(lo) or math.isinf(hi):
                return math.inf
            pts.append((x, lo))
            pts.append((x, hi))
        for x, w in pts:
            if x != 0.0:
                c = max(c, abs(w) / abs(x))
        return float(c)

    def kernel_data(self):
        dirs = np.array([*self.left_dir, *self.right_dir], dtype=float)
        return 0, np.zeros(4), np.stack([self.xs, self.ws]), dirs


@dataclass(frozen=True, eq=False)
class PowerGraph(MonotoneGraph):
    """``w = coef*|x|**(m-1)*x + eps*x``, or its inverse when ``inverted``."""

    m: float
    coef: float = 1.0
    eps: float = 0.0
    inverted: bool = False
    spec: GraphSpec | None = None

    def __post_init__(self):
        if not self.m >= 1 or not self.coef > 0 or not self.eps >= 0:
            raise GraphSpecError(f"invalid power graph m={self.m} coef={self.coef} eps={self.eps}")

    def _forward(self, x: float) -> float:
        return self.coef * abs(x) ** (self.m - 1.0) * x + self.eps * x

    def _backward(self, w: float) -> float:
        if w == 0.0:
            return 0.0
        if self.eps == 0.0:
            return math.copysign((abs(w) / self.coef) ** (1.0 / self.m), w)
        hi = abs(w) / self.eps
        x = brentq(lambda y: self._forward(y) - abs(w), 0.0, hi, xtol=1e-15, rtol=1e-15)
        return math.copysign(x, w)

    def _forward_resolvent(self, c: float, r: float) -> float:
        # (1 + c*eps) x + c*coef |x|^(m-1) x = r
        A = 1.0 + c * self.eps
        B = c * self.coef
        s = abs(r)
        if s == 0.0:
            return 0.0
        if self.m == 1.0:
            x = s / (A + B)
        elif self.m == 2.0:
            x = 2.0 * s / (A + math.sqrt(A * A + 4.0 * B * s))
        else:
            x = brentq(lambda y: A * y + B * y**self.m - s, 0.0, s / A, xtol=1e-15, rtol=1e-15)
        return math.copysign(x, r)

    def value_interval(self, x: float) -> tuple[float, float]:
        v = self._backward(x) if self.inverted else self._forward(x)
        return (v, v)

    def resolvent(self, c: float, r: float) -> tuple[float, float]:
        if not c > 0:
            raise ValueError(f"resolvent needs c > 0, got {c}")
        if not self.inverted:
            x = self._forward_resolvent(c, r)
            return (x, self._forward(x))
        # x + c*w = r with x in beta(w)  <=>  w = J^beta_{1/c}(r/c)
        w = self._forward_resolvent(1.0 / c, r / c)
        return (r - c * w, w)

    def _forward_potential(self, x: float) -> float:
        return self.coef * abs(x) ** (self.m + 1.0) / (self.m + 1.0) + 0.5 * self.eps * x * x

    def potential(self, x: float) -> float:
        if not self.inverted:
            return self._forward_potential(x)
        # convex conjugate of the forward potential
        y = self._backward(x)
        return x * y - self._forward_potential(y)

    def regularize(self, eps: float) -> MonotoneGraph:
        if not eps > 0:
            raise ValueError(f"regularization needs eps > 0, got {eps}")
        if self.inverted:
            return _ShiftedGraph(self, eps)
        return PowerGraph(self.m, self.coef, self.eps + eps, False, self.spec)

    def inverse(self) -> "PowerGraph":
        return PowerGraph(self.m, self.coef, self.eps, not self.inverted)

    @property
    def growth_constant(self) -> float:
        if not self.inverted:
            return self.coef + self.eps if self.m == 1.0 else math.inf
        if self.m == 1.0:
            return 1.0 / (self.coef + self.eps)
        return 1.0 / self.eps if self.eps > 0 else math.inf

    def local_growth(self, bound: float) -> float:
        if not math.isfinite(bound) or self.inverted:
            return self.growth_constant
        return self.coef * bound ** (self.m - 1.0) + self.eps

    def kernel_data(self):
        params = np.array([self.coef, self.m, self.eps, 1.0 if self.inverted else 0.0])
        return 1, params, np.zeros((2, 1)), np.zeros(4)


@dataclass(frozen=True, eq=False)
class _ShiftedGraph(MonotoneGraph):
    """``base + eps*id`` for bases with no closed-form shift; uses bisection."""

    base: MonotoneGraph
    eps: float
    spec: GraphSpec | None = None

    def value_interval(self, x: float) -> tuple[float, float]:
        lo, hi = self.base.value_interval(x)
        return (lo + self.eps * x, hi + self.eps * x)

    def resolvent(self, c: float, r: float) -> tuple[float, float]:
        return bisect_resolvent(self, c, r)

    def potential(self, x: float) -> float:
        return self.base.potential(x) + 0.5 * self.eps * x * x

    def regularize(self, eps: float) -> MonotoneGraph:
        return _ShiftedGraph(self.base, self.eps + eps)

    def inverse(self) -> MonotoneGraph:
        raise NotImplementedError("inverse of a bisection-only graph is not supported")

    @property
    def growth_constant(self) -> float:
        return self.base.growth_constant + self.eps

    def local_growth(self, bound: float) -> float:
        return self.base.local_growth(bound) + self.eps

    def kernel_data(self):
        raise NotImplementedError("no compiled kernel for this graph")


def build_graph(spec: GraphSpec) -> MonotoneGraph:
    """Construct the filled graph described by ``spec``.

    Power graphs are odd-extended. The Heaviside graph ``u*H(u - e_c)`` is
    filled with ``[0, e_c]`` at ``e_c`` and continued by the identity on the
    negative half-line.
    """
    spec.validate()
    if spec.kind == "linear":
        return PolylineGraph(np.zeros(1), np.zeros(1), (1.0, spec.a), (1.0, spec.a), spec=spec)
    if spec.kind == "heaviside":
        e = spec.e_c
        if e == 0.0:
            return PolylineGraph(np.zeros(1), np.zeros(1), (1.0, 1.0), (1.0, 1.0), spec=spec)
        return PolylineGraph(
            np.array([0.0, e, e]),
            np.array([0.0, 0.0, e]),
            (1.0, 1.0),
            (1.0, 1.0),
            spec=spec,
        )
    if spec.kind == "power":
        return PowerGraph(spec.m, 1.0, 0.0, False, spec)
    pts = np.array(spec.table, dtype=float)
    pos = pts[1:]
    xs = np.concatenate((-pos[::-1, 0], [0.0], pos[:, 0]))
    ws = np.concatenate((-pos[::-1, 1], [0.0], pos[:, 1]))
    xk, wk = pos[-1]
    return PolylineGraph(xs, ws, (xk, wk), (xk, wk), spec=spec)


def minimal_section(g: MonotoneGraph, x: float) -> float:
    return g.minimal_section(x)


def value_interval(g: MonotoneGraph, x: float) -> tuple[float, float]:
    return g.value_interval(x)


def resolvent_scalar(g: MonotoneGraph, c: float, r: float) -> tuple[float, float]:
    """Solve ``x + c*beta(x) ∋ r``; returns ``(x, w)`` with ``w = (r - x)/c``."""
    x, w = g.resolvent(c, r)
    return x, w


def bisect_resolvent(g: MonotoneGraph, c: float, r: float) -> tuple[float, float]:
    """Generic resolvent by bisection on ``x -> x + c*beta(x)``.

    Terminates early when ``r`` lies in ``x + c*[w-, w+]`` (a filled jump).
    """
    if not c > 0:
        raise ValueError(f"resolvent needs c > 0, got {c}")

    def bracket(x):
        lo, hi = g.value_interval(x)
        return x + c * lo, x + c * hi

    a = -max(abs(r), 1.0)
    while bracket(a)[1] > r:
        a *= 2.0
        if abs(a) > 1e300:
            raise RuntimeError("resolvent bracket failed; graph is not maximal monotone")
    b = max(abs(r), 1.0)
    while bracket(b)[0] < r:
        b *= 2.0
        if abs(b) > 1e300:
            raise RuntimeError("resolvent bracket failed; graph is not maximal monotone")
    x = 0.5 * (a + b)
    for _ in range(BISECT_MAXITER * 2):
        x = 0.5 * (a + b)
        lo, hi = bracket(x)
        if lo <= r <= hi:
            break
        if hi < r:
            a = x
        else:
            b = x
        if b - a <= BISECT_TOL:
            x = 0.5 * (a + b)
            break
    return x, (r - x) / c


def potential_j(g: MonotoneGraph, x: float) -> float:
    return g.potential(x)


def phi_section(g: MonotoneGraph, x: float) -> float:
    """``sqrt(beta°(x)/x)`` for x > 0 and 0 otherwise."""
    return g.phi(x)


def regularize(g: MonotoneGraph, eps: float) -> MonotoneGraph:
    return g.regularize(eps)


def inverse_graph(g: MonotoneGraph) -> MonotoneGraph:
    return g.inverse()


def value_interval_array(g: MonotoneGraph, x) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``value_interval``."""
    x = np.asarray(x, dtype=float)
    if isinstance(g, PowerGraph) and not g.inverted:
        v = g.coef * np.abs(x) ** (g.m - 1.0) * x + g.eps * x
        return v, v.copy()
    if isinstance(g, PolylineGraph) and g.left_dir[0] > 0 and g.right_dir[0] > 0:
        xs, ws = g.xs, g.ws
        k = xs.size
        sl = g.left_dir[1] / g.left_dir[0]
        sr = g.right_dir[1] / g.right_dir[0]

        def along(i_right):
            # value on the piece ending at breakpoint i_right (0 = left ray, k = right ray)
            out = np.empty_like(x)
            left = i_right == 0
            right = i_right == k
            mid = ~(left | right)
            out[left] = ws[0] + (x[left] - xs[0]) * sl
            out[right] = ws[-1] + (x[right] - xs[-1]) * sr
            i = i_right[mid]
            x0, x1 = xs[i - 1], xs[i]
            w0, w1 = ws[i - 1], ws[i]
            with np.errstate(invalid="ignore", divide="ignore"):
                t = np.where(x1 > x0, (x[mid] - x0) / np.where(x1 > x0, x1 - x0, 1.0), 0.0)
            out[mid] = w0 + t * (w1 - w0)
            return out

        il = np.searchsorted(xs, x, side="left")
        lo = along(il)
        hit = (il < k) & (xs[np.minimum(il, k - 1)] == x)
        lo[hit] = ws[il[hit]]
        ir = np.searchsorted(xs, x, side="right")
        hi = along(ir)
        hit = (ir > 0) & (xs[np.maximum(ir - 1, 0)] == x)
        hi[hit] = ws[ir[hit] - 1]
        return lo, hi
    pairs = [g.value_interval(float(v)) for v in x.ravel()]
    lo = np.array([p[0] for p in pairs]).reshape(x.shape)
    hi = np.array([p[1] for p in pairs]).reshape(x.shape)
    return lo, hi


def minimal_section_array(g: MonotoneGraph, x) -> np.ndarray:
    lo, hi = value_interval_array(g, x)
    out = np.where(lo > 0.0, lo, np.where(hi < 0.0, hi, 0.0))
    return out


def phi_array(g: MonotoneGraph, x) -> np.ndarray:
    """Vectorised ``phi_section``."""
    x = np.asarray(x, dtype=float)
    b = minimal_section_array(g, x)
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = np.sqrt(np.clip(b[pos], 0.0, None) / x[pos])
    return out


def potential_array(g: MonotoneGraph, x: Sequence[float] | np.ndarray) -> np.ndarray:
    """Vectorised potential; closed forms for the built-in kinds."""
    x = np.asarray(x, dtype=float)
    if isinstance(g, PowerGraph) and not g.inverted:
        return g.coef * np.abs(x) ** (g.m + 1.0) / (g.m + 1.0) + 0.5 * g.eps * x * x
    if isinstance(g, PolylineGraph):
        return _polyline_potential_array(g, x)
    return np.array([g.potential(float(v)) for v in x.ravel()]).reshape(x.shape)


def _polyline_potential_array(g: PolylineGraph, x: np.ndarray) -> np.ndarray:
    """Exact integral from 0 of the single-valued part of a polyline graph."""
    knots = np.unique(np.concatenate((g.xs, [0.0])))
    ivals = [g.value_interval(float(k)) for k in knots]
    after = np.array([hi for _, hi in ivals])  # value just right of each knot
    before = np.array([lo for lo, _ in ivals])  # value just left of each knot
    seg = 0.5 * (after[:-1] + before[1:]) * np.diff(knots)
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    cum -= cum[int(np.searchsorted(knots, 0.0))]
    xlo, xhi = g._x_lo_bound(), g._x_hi_bound()
    flat = np.ravel(x)
    out = np.empty(flat.shape)
    idx = np.searchsorted(knots, flat, side="right") - 1
    for k, (xv, i) in enumerate(zip(flat, idx)):
        if xv < xlo or xv > xhi:
            out[k] = math.inf
        elif i < 0:
            d = knots[0] - xv
            slope = g.left_dir[1] / g.left_dir[0]
            out[k] = cum[0] - d * (before[0] - 0.5 * slope * d)
        elif i >= knots.size - 1:
            d = xv - knots[-1]
            if d == 0.0:
                out[k] = cum[-1]
                continue
            slope = g.right_dir[1] / g.right_dir[0]
            out[k] = cum[-1] + d * (after[-1] + 0.5 * slope * d)
        else:
            x0, x1 = knots[i], knots[i + 1]
            w0, w1 = after[i], before[i + 1]
            d = xv - x0
            wx = w0 + (w1 - w0) * d / (x1 - x0)
            out[k] = cum[i] + 0.5 * (w0 + wx) * d
    return out.reshape(np.shape(x))
