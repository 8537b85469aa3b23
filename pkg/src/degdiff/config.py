"""Run configuration: TOML in, validated dataclasses out."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .graphs import GraphSpec, GraphSpecError, MonotoneGraph, build_graph
from .grid import Grid, GridField, gaussian, read_field_csv

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "ORACLES", "PROFILES"]

PROFILES = ("gaussian", "indicator", "barenblatt", "csv")
ORACLES = ("heat", "barenblatt", "stationary")
MODES = ("coupled", "selfconsistent")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class ParticleConfig:
    N: int = 100_000
    substeps: int = 4
    seed: int = 12345
    mode: str = "coupled"
    bandwidth: float | None = None
    eps: float = 0.0
    stratified: bool = True
    full_dump: bool = False
    workers: int = 1
    ks_tolerance: float = 0.02


@dataclass(frozen=True)
class RunConfig:
    graph: GraphSpec
    L: float
    n: int
    initial: dict
    T: float
    steps: int
    output: str
    regularization: float = 0.0
    snapshots: tuple[float, ...] = ()
    eps_list: tuple[float, ...] = ()
    particles: ParticleConfig | None = None
    oracle: str | None = None
    oracle_tolerance: float | None = None
    ladder: tuple[tuple[int, int], ...] = ()
    base_dir: str = field(default=".", compare=False)

    @property
    def grid(self) -> Grid:
        return Grid(self.L, self.n)

    def base_graph(self) -> MonotoneGraph:
        return build_graph(self.graph)

    def build_graph(self) -> MonotoneGraph:
        g = self.base_graph()
        return g.regularize(self.regularization) if self.regularization > 0 else g

    def initial_field(self, grid: Grid | None = None) -> GridField:
        return initial_field(self.initial, grid or self.grid, self.base_dir)

    def snapshot_times(self) -> tuple[float, ...]:
        return self.snapshots if self.snapshots else (0.0, self.T)

    def with_seed(self, seed: int) -> "RunConfig":
        if self.particles is None:
            return self
        return replace(self, particles=replace(self.particles, seed=seed))

    def with_resolution(self, n: int, steps: int) -> "RunConfig":
        return replace(self, n=n, steps=steps)

    def to_dict(self) -> dict:
        d = {
            "output": self.output,
            "snapshots": list(self.snapshot_times()),
            "graph": {**self.graph.to_dict(), "eps": self.regularization},
            "grid": {"L": self.L, "n": self.n},
            "initial": dict(self.initial),
            "time": {"T": self.T, "steps": self.steps},
        }
        if self.eps_list:
            d["epsilon"] = {"values": list(self.eps_list)}
        if self.particles is not None:
            d["particles"] = {k: v for k, v in asdict(self.particles).items() if v is not None}
        if self.oracle is not None:
            d["oracle"] = {"name": self.oracle}
            if self.oracle_tolerance is not None:
                d["oracle"]["tolerance"] = self.oracle_tolerance
        if self.ladder:
            d["compare"] = {"ladder": [list(p) for p in self.ladder]}
        return d


def initial_field(spec: dict, grid: Grid, base_dir: str = ".") -> GridField:
    x = grid.x
    kind = spec["profile"]
    if kind == "gaussian":
        vals = spec.get("mass", 1.0) * gaussian(x - spec.get("mean", 0.0), spec.get("variance", 1.0))
    elif kind == "indicator":
        a, b = spec.get("a", -0.5), spec.get("b", 0.5)
        vals = np.where((x >= a) & (x <= b), spec.get("height", 1.0), 0.0)
    elif kind == "barenblatt":
        from .oracles import barenblatt

        vals = barenblatt(spec.get("m", 2.0), spec.get("mass", 1.0), spec.get("t0", 0.5), x)
    else:
        path = Path(spec["path"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        cols = read_field_csv(path)
        vals = np.interp(x, cols["x"], cols["u"], left=0.0, right=0.0)
    return grid.field(vals)


# accepted keys per table, with the expected type
_INITIAL_KEYS = {
    "gaussian": {"variance": float, "mean": float, "mass": float},
    "indicator": {"height": float, "a": float, "b": float},
    "barenblatt": {"m": float, "mass": float, "t0": float},
    "csv": {"path": str},
}
_PARTICLE_KEYS = {
    "N": int,
    "substeps": int,
    "seed": int,
    "mode": str,
    "bandwidth": float,
    "eps": float,
    "stratified": bool,
    "full_dump": bool,
    "workers": int,
    "ks_tolerance": float,
}


def _get(table: dict, key: str, typ, where: str, default: Any = ...):
    if key not in table:
        if default is ...:
            raise ConfigError(f"{where}.{key}: missing required key")
        return default
    v = table[key]
    if isinstance(v, bool) and typ is not bool:
        raise ConfigError(f"{where}.{key}: expected {typ.__name__}, got {v!r}")
    if typ is float and isinstance(v, int):
        v = float(v)
    if not isinstance(v, typ):
        raise ConfigError(f"{where}.{key}: expected {typ.__name__}, got {v!r}")
    if typ is float and not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: must be finite, got {v!r}")
    return v


def _table(d: dict, key: str, where: str = "", required: bool = True) -> dict | None:
    name = f"{where}.{key}" if where else key
    if key not in d:
        if required:
            raise ConfigError(f"{name}: missing required table")
        return None
    if not isinstance(d[key], dict):
        raise ConfigError(f"{name}: expected a table")
    return d[key]


def _no_extra(table: dict, allowed, where: str) -> None:
    extra = sorted(set(table) - set(allowed))
    if extra:
        raise ConfigError(f"{where}.{extra[0]}: unknown key")


def _float_list(v, where: str) -> tuple[float, ...]:
    if not isinstance(v, list) or not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in v):
        raise ConfigError(f"{where}: expected a list of numbers")
    return tuple(float(e) for e in v)


def parse_config(data: dict, base_dir: str = ".") -> RunConfig:
    """Validate a parsed TOML document."""
    _no_extra(data, {"output", "snapshots", "graph", "grid", "initial", "time", "epsilon", "particles", "oracle", "compare"}, "config")

    gt = dict(_table(data, "graph"))
    reg = _get(gt, "eps", float, "graph", 0.0)
    gt.pop("eps", None)
    if reg < 0:
        raise ConfigError("graph.eps: must be >= 0")
    try:
        gspec = GraphSpec.from_dict(gt)
    except GraphSpecError as err:
        raise ConfigError(f"graph: {err}") from None
    except (TypeError, ValueError):
        raise ConfigError(f"graph: non-numeric parameter in {gt!r}") from None

    grid_t = _table(data, "grid")
    _no_extra(grid_t, {"L", "n"}, "grid")
    L = _get(grid_t, "L", float, "grid")
    n = _get(grid_t, "n", int, "grid")
    if not L > 0:
        raise ConfigError("grid.L: must be positive")
    if n < 3:
        raise ConfigError("grid.n: must be >= 3")

    init = dict(_table(data, "initial"))
    profile = _get(init, "profile", str, "initial")
    if profile not in PROFILES:
        raise ConfigError(f"initial.profile: expected one of {PROFILES}, got {profile!r}")
    keys = _INITIAL_KEYS[profile]
    _no_extra(init, {"profile", *keys}, "initial")
    for k, typ in keys.items():
        if k in init:
            init[k] = _get(init, k, typ, "initial")
    if profile == "csv":
        p = Path(_get(init, "path", str, "initial"))
        if not p.is_absolute():
            p = Path(base_dir) / p
        if not p.is_file():
            raise ConfigError(f"initial.path: file not found: {p}")
    if profile == "gaussian" and not init.get("variance", 1.0) > 0:
        raise ConfigError("initial.variance: must be positive")
    if profile == "barenblatt":
        if not init.get("m", 2.0) > 1:
            raise ConfigError("initial.m: must exceed 1")
        if not init.get("t0", 0.5) > 0:
            raise ConfigError("initial.t0: must be positive")

    time_t = _table(data, "time")
    _no_extra(time_t, {"T", "steps"}, "time")
    T = _get(time_t, "T", float, "time")
    steps = _get(time_t, "steps", int, "time")
    if not T > 0:
        raise ConfigError("time.T: must be positive")
    if steps < 1:
        raise ConfigError("time.steps: must be >= 1")

    snaps = _float_list(data["snapshots"], "snapshots") if "snapshots" in data else ()
    for s in snaps:
        if not 0 <= s <= T:
            raise ConfigError(f"snapshots: time {s} outside [0, {T}]")
    output = _get(data, "output", str, "config")

    eps_list: tuple[float, ...] = ()
    eps_t = _table(data, "epsilon", required=False)
    if eps_t is not None:
        _no_extra(eps_t, {"values"}, "epsilon")
        eps_list = _float_list(eps_t.get("values", []), "epsilon.values")
        if any(not e > 0 for e in eps_list):
            raise ConfigError("epsilon.values: entries must be positive")
        if any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
            raise ConfigError("epsilon.values: must be strictly decreasing")

    particles = None
    pt = _table(data, "particles", required=False)
    if pt is not None:
        _no_extra(pt, _PARTICLE_KEYS, "particles")
        kw = {k: _get(pt, k, typ, "particles") for k, typ in _PARTICLE_KEYS.items() if k in pt}
        particles = ParticleConfig(**kw)
        if particles.N < 1:
            raise ConfigError("particles.N: must be >= 1")
        if particles.substeps < 1:
            raise ConfigError("particles.substeps: must be >= 1")
        if particles.mode not in MODES:
            raise ConfigError(f"particles.mode: expected one of {MODES}, got {particles.mode!r}")
        if particles.bandwidth is not None and not particles.bandwidth > 0:
            raise ConfigError("particles.bandwidth: must be positive")
        if particles.workers < 1:
            raise ConfigError("particles.workers: must be >= 1")

    oracle = tol = None
    ot = _table(data, "oracle", required=False)
    if ot is not None:
        _no_extra(ot, {"name", "tolerance"}, "oracle")
        oracle = _get(ot, "name", str, "oracle")
        if oracle not in ORACLES:
            raise ConfigError(f"oracle.name: expected one of {ORACLES}, got {oracle!r}")
        tol = _get(ot, "tolerance", float, "oracle", None)

    ladder: tuple[tuple[int, int], ...] = ()
    ct = _table(data, "compare", required=False)
    if ct is not None:
        _no_extra(ct, {"ladder"}, "compare")
        raw = ct.get("ladder", [])
        if not isinstance(raw, list) or not all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(e, int) and e > 0 for e in p) for p in raw
        ):
            raise ConfigError("compare.ladder: expected a list of [n, steps] pairs of positive integers")
        ladder = tuple((p[0], p[1]) for p in raw)

    return RunConfig(
        graph=gspec,
        L=L,
        n=n,
        initial=init,
        T=T,
        steps=steps,
        output=output,
        regularization=reg,
        snapshots=snaps,
        eps_list=eps_list,
        particles=particles,
        oracle=oracle,
        oracle_tolerance=tol,
        ladder=ladder,
        base_dir=base_dir,
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a TOML run file.

    Raises
    ------
    ConfigError
        With the line/column for syntax errors or the dotted key otherwise.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None
    return parse_config(data, str(path.parent))
