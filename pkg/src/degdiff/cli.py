"""Command-line front end: ``degdiff run | compare | diagnose``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_config
from .diagnostics import InvariantViolation, chi_field, invariant_report
from .elliptic import ConvergenceError
from .graphs import value_interval_array
from .grid import GridField, read_field_csv, write_field_csv
from .oracles import ExactSolution, barenblatt, stationary_subcritical
from .particles import (
    fourth_moment_scaling,
    law_distance,
    moment_check,
    simulate_coupled,
    simulate_selfconsistent,
)
from .semigroup import Trajectory, epsilon_continuation, evolve

logger = logging.getLogger("degdiff")

OUTPUT_ROOT_ENV = "DEGDIFF_OUTPUT_ROOT"
ENSEMBLE_QUANTILES = np.arange(1, 1000) / 1000.0
# keep every PDE step of the ensemble only while it stays below this many doubles
MAX_STORED = 20_000_000
EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


def output_dir(cfg: RunConfig, override: str | None = None) -> Path:
    out = Path(override) if override else Path(cfg.output)
    if out.is_absolute():
        return out
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return (Path(root) if root else Path.cwd()) / out


def _dump_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _clean(obj):
    """Replace non-finite floats by None so the JSON stays strict."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def snapshot_label(t: float) -> str:
    return f"t_{t:.6f}.csv"


def _snapshot_index(traj: Trajectory, t: float) -> int:
    return min(int(round(t / traj.dt)), traj.steps) if traj.steps else 0


def build_oracle(cfg: RunConfig, name: str, u0: GridField) -> ExactSolution:
    """Exact solution matching the configured graph and initial profile."""
    init = cfg.initial
    if name == "heat":
        if cfg.graph.kind != "linear" or init["profile"] != "gaussian":
            raise ConfigError("oracle.name: 'heat' needs a linear graph and a gaussian initial profile")
        d = cfg.graph.a + cfg.regularization
        var0 = init.get("variance", 1.0)
        mass, mean = init.get("mass", 1.0), init.get("mean", 0.0)

        def heat(t, x):
            v = var0 + d * t
            return mass * np.exp(-0.5 * (x - mean) ** 2 / v) / math.sqrt(2.0 * math.pi * v)

        return ExactSolution("heat", {"variance": var0, "diffusivity": d}, heat)
    if name == "barenblatt":
        m = init.get("m", 2.0)
        if cfg.graph.kind != "power" or init["profile"] != "barenblatt" or cfg.graph.m != m or cfg.regularization:
            raise ConfigError("oracle.name: 'barenblatt' needs an unregularized power graph and a matching barenblatt profile")
        mass, t0 = init.get("mass", 1.0), init.get("t0", 0.5)
        return ExactSolution("barenblatt", {"m": m, "mass": mass, "t0": t0}, lambda t, x: barenblatt(m, mass, t0 + t, x))
    if name == "stationary":
        if cfg.graph.kind != "heaviside" or cfg.regularization:
            raise ConfigError("oracle.name: 'stationary' needs an unregularized heaviside graph")
        try:
            return stationary_subcritical(cfg.graph.e_c, u0)
        except ValueError as err:
            raise ConfigError(f"oracle.name: {err}") from None
    raise ConfigError(f"oracle.name: unknown oracle {name!r}")


def oracle_errors(traj: Trajectory, sol: ExactSolution, times) -> list[dict]:
    rows = []
    for t in times:
        j = _snapshot_index(traj, t)
        tj = float(traj.times[j])
        diff = traj.u[j] - sol(tj, traj.grid.x)
        rows.append({"t": tj, "l1": float(traj.grid.h * np.sum(np.abs(diff))), "linf": float(np.max(np.abs(diff)))})
    return rows


def _solve(cfg: RunConfig, grid=None):
    grid = grid or cfg.grid
    g = cfg.build_graph()
    u0 = cfg.initial_field(grid)
    try:
        return evolve(g, u0, cfg.T, cfg.steps), None
    except ConvergenceError as err:
        logger.error("solver stopped at step %d: %s", err.step, err)
        return err.trajectory, err


def _particles(cfg: RunConfig, traj: Trajectory, snap_idx: list[int], out: Path) -> tuple[dict, bool]:
    p = cfg.particles
    keep_all = p.N * (traj.steps + 1) <= MAX_STORED
    if p.mode == "coupled":
        store = None if keep_all else sorted(set(snap_idx) | {0, traj.steps})
        path = simulate_coupled(traj, p.N, p.substeps, p.seed, stratified=p.stratified, workers=p.workers, store=store)
    else:
        path = simulate_selfconsistent(
            traj.graph if p.eps == 0 else traj.graph.regularize(p.eps),
            traj.snapshot(0), cfg.T, cfg.steps, p.N, p.seed,
            bandwidth=p.bandwidth, substeps=p.substeps, stratified=p.stratified, workers=p.workers,
        )
        if not keep_all:
            rows = sorted(set(snap_idx) | {0, traj.steps})
            path.times, path.positions = path.times[rows], path.positions[rows]
    row_of = {int(round(t / traj.dt)): k for k, t in enumerate(path.times)}

    ens_dir = out / "ensemble"
    ens_dir.mkdir(parents=True, exist_ok=True)
    comparisons = []
    for j in snap_idx:
        k = row_of[j]
        y = path.positions[k]
        t = float(traj.times[j])
        write_field_csv(
            ens_dir / snapshot_label(t),
            {"t": np.full(ENSEMBLE_QUANTILES.size, t), "quantile": ENSEMBLE_QUANTILES, "position": np.quantile(y, ENSEMBLE_QUANTILES)},
        )
        if p.full_dump:
            write_field_csv(ens_dir / ("full_" + snapshot_label(t)), {"position": y})
        comparisons.append(law_distance(y, traj.snapshot(j), t).to_dict())
    with open(ens_dir / "comparison.jsonl", "w", encoding="utf-8") as fh:
        for row in comparisons:
            fh.write(json.dumps(_clean(row), sort_keys=True) + "\n")

    y0, yT = path.positions[0], path.positions[-1]
    drift = abs(float(yT.mean() - y0.mean()))
    drift_lim = 4.0 * float(yT.std()) / math.sqrt(p.N)
    final = law_distance(yT, traj.snapshot(traj.steps), cfg.T)
    res = {
        "mode": p.mode,
        "N": p.N,
        "seed": p.seed,
        "ks_T": final.ks,
        "w1_T": final.wasserstein1,
        "hist_l1_T": final.hist_l1,
        "ks_tolerance": p.ks_tolerance,
        "mean_drift": drift,
        "mean_drift_limit": drift_lim,
    }
    if keep_all and traj.steps >= 2:
        res["fourth_moment"] = fourth_moment_scaling(path)
        res["moments"] = moment_check(path, traj)[-1]
    ok = final.ks <= p.ks_tolerance and drift <= drift_lim
    return res, ok


def run(cfg: RunConfig, out: Path) -> int:
    """Solve, simulate, diagnose and write the artifact tree under ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    for sub in ("fields", "ensemble"):
        d = out / sub
        if d.is_dir():
            for f in d.glob("*"):
                f.unlink()
    (out / "fields").mkdir(exist_ok=True)

    traj, failure = _solve(cfg)
    report = invariant_report(traj)
    flags: dict[str, bool] = {"converged": failure is None, "invariants": report.ok}
    summary: dict = {
        "invariants": report.summary,
        "violations": report.violations,
        "solver": {
            "converged": failure is None,
            "steps_completed": int(traj.steps),
            "total_sweeps": int(np.sum(traj.sweeps)),
            "max_residual": float(np.max(traj.residuals)) if traj.residuals.size else 0.0,
        },
    }

    times = [t for t in cfg.snapshot_times() if t <= traj.T + 1e-12]
    snap_idx = sorted({_snapshot_index(traj, t) for t in times})
    summary["snapshots"] = []
    floor = traj.u_floor()
    for j in snap_idx:
        t = float(traj.times[j])
        try:
            chi = chi_field(traj.u[j], traj.w[j], floor)
        except InvariantViolation as err:
            report.violations.append({"invariant": "chi_sign", "index": j, "t": t, "value": math.nan, "limit": 0.0})
            flags["invariants"] = False
            logger.error("%s", err)
            chi = np.zeros_like(traj.u[j])
        write_field_csv(out / "fields" / snapshot_label(t), {"x": traj.grid.x, "u": traj.u[j], "eta": traj.w[j], "chi": chi})
        summary["snapshots"].append({"t": t, "index": j, "file": f"fields/{snapshot_label(t)}", "chi_max": float(chi.max())})

    if cfg.oracle is not None:
        sol = build_oracle(cfg, cfg.oracle, traj.snapshot(0))
        errs = oracle_errors(traj, sol, [traj.times[j] for j in snap_idx])
        tol = cfg.oracle_tolerance if cfg.oracle_tolerance is not None else (1e-9 if cfg.oracle == "stationary" else None)
        summary["oracle"] = {"name": cfg.oracle, "errors": errs, "tolerance": tol}
        if tol is not None:
            flags["oracle"] = all(e["l1"] <= tol for e in errs)

    if cfg.eps_list and failure is None:
        trajs, gaps = epsilon_continuation(cfg.base_graph(), traj.snapshot(0), cfg.T, cfg.steps, cfg.eps_list)
        ratios = [b / a for a, b in zip(gaps[:-1], gaps[1:]) if a > 0]
        summary["epsilon"] = {"values": list(cfg.eps_list), "sup_l1_gaps": gaps, "ratios": ratios}
        flags["epsilon_gaps_decreasing"] = all(b < a for a, b in zip(gaps[:-1], gaps[1:]))

    if cfg.particles is not None and failure is None:
        summary["particles"], flags["particles"] = _particles(cfg, traj, snap_idx, out)

    summary["pass"] = flags
    report.to_jsonl(out / "report.jsonl")
    report.to_csv(out / "report.csv")
    _dump_json(out / "summary.json", _clean(summary))
    _dump_json(out / "manifest.json", {"version": __version__, "config": _clean(cfg.to_dict())})
    hard_ok = failure is None and flags["invariants"]
    return EXIT_OK if hard_ok else EXIT_VIOLATION


def compare(cfg: RunConfig, oracle: str, out: Path) -> tuple[int, list[dict]]:
    """Errors against ``oracle`` per snapshot and rung, plus observed orders."""
    ladder = list(cfg.ladder) or [(cfg.n // 4, max(cfg.steps // 4, 1)), (cfg.n // 2, max(cfg.steps // 2, 1)), (cfg.n, cfg.steps)]
    rows, finals = [], []
    status = EXIT_OK
    for n, steps in ladder:
        c = cfg.with_resolution(n, steps)
        traj, failure = _solve(c)
        if failure is not None or not invariant_report(traj).ok:
            status = EXIT_VIOLATION
        sol = build_oracle(c, oracle, traj.snapshot(0))
        errs = oracle_errors(traj, sol, c.snapshot_times())
        for e in errs:
            rows.append({"n": n, "steps": steps, **e})
        finals.append((n, errs[-1]["l1"]))
    for k in range(1, len(finals)):
        (n0, e0), (n1, e1) = finals[k - 1], finals[k]
        order = math.log(e0 / e1) / math.log(n1 / n0) if e0 > 0 and e1 > 0 and n1 != n0 else math.nan
        rows.append({"n": n1, "observed_order": order})
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"compare_{oracle}.jsonl", "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(_clean(r), sort_keys=True) + "\n")
    return status, rows


def diagnose(art: Path) -> tuple[int, dict]:
    """Recheck the invariants of a written artifact tree from its field snapshots."""
    with open(art / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    with open(art / "summary.json", encoding="utf-8") as fh:
        summary = json.load(fh)
    cfg = parse_config(manifest["config"], str(art))
    g = cfg.build_graph()
    grid = cfg.grid
    snaps = summary["snapshots"]
    times, U, W = [], [], []
    for s in snaps:
        cols = read_field_csv(art / s["file"])
        times.append(s["t"])
        U.append(cols["u"])
        W.append(cols["eta"])
    U, W = np.array(U), np.array(W)
    traj = Trajectory(grid, g, np.array(times), U, W)
    rep = invariant_report(traj, per_step=False)
    violations = list(rep.violations)
    for k, (u, w) in enumerate(zip(U, W)):
        # distance to the graph, measured horizontally: u carries the solver tolerance
        du = 1e-8 * (1.0 + np.abs(u))
        lo, _ = value_interval_array(g, u - du)
        _, hi = value_interval_array(g, u + du)
        slack = 1e-8 * (1.0 + np.abs(w))
        bad = (w < lo - slack) | (w > hi + slack)
        if np.any(bad):
            violations.append({"invariant": "selection", "index": k, "t": times[k], "value": float(np.sum(bad)), "limit": 0.0})
    result = {"summary": rep.summary, "violations": violations, "version": manifest.get("version")}
    return (EXIT_OK if not violations else EXIT_VIOLATION), _clean(result)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="degdiff", description="Degenerate nonlinear diffusion solver and particle checks.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve a configured problem and write artifacts")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None, help="override particles.seed")
    r.add_argument("--output", default=None, help="override the output directory")
    c = sub.add_parser("compare", help="errors against an exact solution over a refinement ladder")
    c.add_argument("config")
    c.add_argument("--oracle", required=True, choices=["heat", "barenblatt", "stationary"])
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--output", default=None)
    d = sub.add_parser("diagnose", help="recheck invariants of an artifact directory")
    d.add_argument("artifact_dir")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "diagnose":
            status, result = diagnose(Path(args.artifact_dir))
            print(json.dumps(result, indent=2, sort_keys=True))
            return status
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = output_dir(cfg, args.output)
        if args.command == "run":
            status = run(cfg, out)
            with open(out / "summary.json", encoding="utf-8") as fh:
                flags = json.load(fh)["pass"]
            print(" ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in flags.items()), f"-> {out}")
            return status
        status, rows = compare(cfg, args.oracle, out)
        for r in rows:
            if "observed_order" in r:
                print(f"order n={r['n']:>6d}  {r['observed_order']:.3f}")
            else:
                print(f"n={r['n']:>6d} steps={r['steps']:>5d} t={r['t']:.4f}  L1={r['l1']:.3e}  Linf={r['linf']:.3e}")
        return status
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, KeyError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
