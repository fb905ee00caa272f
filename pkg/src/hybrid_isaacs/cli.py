"""Batch command-line front end.

Subcommands: ``validate``, ``solve``, ``simulate``, ``verify``, ``analyze``.
Exit codes are a stable contract:

    0  success
    1  config parse or structural error
    2  cost-assumption violation (rejected before any solve)
    3  no convergence / simulation aborted
    4  artifact mismatch (value file does not fit the problem or grid)
    5  verification failure

All numeric output is written with 17 significant digits, so value files
round-trip exactly; identical inputs and seed produce byte-identical CSVs
and reports (manifests additionally record wall-clock timings).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError
from .discretize import GridSpec, interp_weights, make_grid
from .hybridsim import ChatterError, evaluate_cost, simulate
from .operators import Variant, isaacs_gap
from .problem import (ProblemSpec, SpecStructureError, check_y1_y2, lipschitz_probe,
                      load_config, validate_a2)
from .solver import SolverConfig, solve
from .verify import (VerificationReport, dpp_consistency, obstacle_chain_check,
                     post_impulse_strictness, run_all)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_ASSUMPTION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_MISMATCH = 4
EXIT_VERIFY = 5

SUITES = ("chain", "impulse", "dpp", "isaacs", "uniqueness", "probes")


def fmt(x: float) -> str:
    return f"{x:.16e}"


class MismatchError(ValueError):
    """Value file does not belong to this problem/grid combination."""


# ---------------------------------------------------------------------------
# file formats

def write_value_csv(path: Path, spec: ProblemSpec, grid: GridSpec,
                    values: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# value field\n")
        fh.write(f"# dimension = {spec.dimension}\n")
        fh.write(f"# counts = {','.join(str(c) for c in grid.counts)}\n")
        for d in range(spec.dimension):
            fh.write(f"# box{d} = {fmt(grid.box[d, 0])},{fmt(grid.box[d, 1])}\n")
        fh.write(f"# d1_labels = {','.join(spec.d1_labels)}\n")
        fh.write(f"# d2_labels = {','.join(spec.d2_labels)}\n")
        fh.write(f"# discount = {fmt(spec.discount)}\n")
        coords = ",".join(f"x{d}" for d in range(spec.dimension))
        fh.write(f"d1,d2,{coords},value\n")
        pts = grid.points
        for i1 in range(spec.m1):
            for i2 in range(spec.m2):
                slab = values[i1, i2]
                for p in range(grid.n_points):
                    xs = ",".join(fmt(c) for c in pts[p])
                    fh.write(f"{i1},{i2},{xs},{fmt(slab[p])}\n")


def read_value_csv(path: Path, spec: ProblemSpec) -> tuple[GridSpec, np.ndarray]:
    """Read a value file and check it belongs to ``spec``.

    Raises MismatchError when the metadata disagrees with the problem.
    """
    meta: dict[str, str] = {}
    rows: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "=" in line:
                    key, _, value = line[1:].partition("=")
                    meta[key.strip()] = value.strip()
                continue
            rows.append(line)
    if not rows:
        raise MismatchError(f"{path}: empty value file")

    try:
        dim = int(meta["dimension"])
        counts = tuple(int(c) for c in meta["counts"].split(","))
        d1_labels = tuple(meta["d1_labels"].split(","))
        d2_labels = tuple(meta["d2_labels"].split(","))
        box = np.array([[float(v) for v in meta[f"box{d}"].split(",")]
                        for d in range(dim)])
    except KeyError as exc:
        raise MismatchError(f"{path}: missing metadata line {exc}") from None

    if dim != spec.dimension:
        raise MismatchError(f"{path}: dimension {dim} != problem dimension {spec.dimension}")
    if d1_labels != spec.d1_labels or d2_labels != spec.d2_labels:
        raise MismatchError(f"{path}: mode labels do not match the problem")
    if not np.array_equal(box, spec.box):
        raise MismatchError(f"{path}: box does not match the problem")

    grid = make_grid(spec, counts)
    expected = spec.m1 * spec.m2 * grid.n_points
    if len(rows) - 1 != expected:
        raise MismatchError(f"{path}: expected {expected} value rows, found {len(rows) - 1}")

    values = np.empty((spec.m1, spec.m2, grid.n_points))
    for ln, line in enumerate(rows[1:]):
        parts = line.split(",")
        if len(parts) != 3 + spec.dimension:
            raise MismatchError(f"{path}: malformed row {ln + 1}")
        i1, i2 = int(parts[0]), int(parts[1])
        p = ln % grid.n_points
        if i1 != ln // (spec.m2 * grid.n_points) or i2 != (ln // grid.n_points) % spec.m2:
            raise MismatchError(f"{path}: rows out of order at line {ln + 1}")
        values[i1, i2, p] = float(parts[-1])
    return grid, values


def write_residual_csv(path: Path, history: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,sup_change\n")
        for i, change in enumerate(history, start=1):
            fh.write(f"{i},{fmt(change)}\n")


def write_trajectory_csv(path: Path, spec: ProblemSpec, traj) -> None:
    lam = spec.discount
    w = (1.0 - np.exp(-lam * traj.dt)) / lam
    with open(path, "w", encoding="utf-8") as fh:
        coords = ",".join(f"x{d}" for d in range(spec.dimension))
        fh.write(f"time,{coords},d1,d2,u1,u2,impulses,switches1,switches2,"
                 "cum_running,cum_switch1,cum_switch2,cum_impulse\n")
        cum_run = 0.0
        for n in range(traj.steps):
            t = traj.times[n]
            cum_run += np.exp(-lam * t) * w * traj.step_costs[n]
            cum_s1 = sum(np.exp(-lam * e.time) * e.cost
                         for e in traj.switch1_events if e.time <= t)
            cum_s2 = sum(np.exp(-lam * e.time) * e.cost
                         for e in traj.switch2_events if e.time <= t)
            cum_imp = sum(np.exp(-lam * e.time) * e.cost
                          for e in traj.impulse_events if e.time <= t)
            xs = ",".join(fmt(c) for c in traj.states[n])
            d1, d2 = traj.modes[n]
            u1, u2 = traj.controls[n]
            imp_f, s1_f, s2_f = traj.event_flags[n]
            fh.write(f"{fmt(t)},{xs},{d1},{d2},{fmt(u1)},{fmt(u2)},"
                     f"{imp_f},{s1_f},{s2_f},"
                     f"{fmt(cum_run)},{fmt(cum_s1)},{fmt(cum_s2)},{fmt(cum_imp)}\n")


def write_manifest(path: Path, command: str, inputs: dict, outputs: list[Path],
                   started: float) -> None:
    manifest = {
        "command": command,
        "inputs": inputs,
        "outputs": [p.name for p in outputs],
        "version": __version__,
        "wall_seconds": round(time.perf_counter() - started, 6),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# argument plumbing

def _parse_grid(text: str | None, grid_cfg: dict, spec: ProblemSpec):
    if text:
        return tuple(int(c) for c in text.split(","))
    if "points" in grid_cfg:
        points = grid_cfg["points"]
        return tuple(int(c) for c in (points if isinstance(points, list) else [points]))
    return (101,) * spec.dimension


def _solver_config(args, solver_cfg: dict) -> SolverConfig:
    dt = args.dt if args.dt is not None else solver_cfg.get("dt")
    tol = args.tol if args.tol is not None else solver_cfg.get("tolerance", 1e-9)
    iters = (args.max_iters if args.max_iters is not None
             else solver_cfg.get("max_iterations", 100_000))
    init = args.init if getattr(args, "init", None) else solver_cfg.get("init", "zero")
    variant = Variant.parse(args.variant if getattr(args, "variant", None)
                            else solver_cfg.get("variant", "plus"))
    return SolverConfig(dt=dt, tolerance=float(tol), max_iterations=int(iters),
                        init=init, variant=variant)


def _resolve_threads(args) -> int:
    raw = args.threads if args.threads is not None else \
        os.environ.get("HYBRID_ISAACS_THREADS", "1")
    threads = int(raw)
    if threads < 1:
        raise ValueError("--threads must be >= 1")
    return threads


def _out_dir(args, config_path: Path) -> Path:
    out = Path(args.out) if args.out else config_path.parent
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(config_path: Path):
    return load_config(config_path)


def _mode_index(labels: tuple[str, ...], raw: str, player: int) -> int:
    if raw in labels:
        return labels.index(raw)
    try:
        idx = int(raw)
    except ValueError:
        raise MismatchError(f"unknown player-{player} mode {raw!r}; "
                            f"choose from {', '.join(labels)}") from None
    if not 0 <= idx < len(labels):
        raise MismatchError(f"player-{player} mode index {idx} out of range")
    return idx


# ---------------------------------------------------------------------------
# commands

def cmd_validate(args) -> int:
    started = time.perf_counter()
    config_path = Path(args.config)
    spec, _, _ = _load(config_path)
    report = validate_a2(spec, samples=args.samples, seed=args.seed)
    out_dir = _out_dir(args, config_path)
    stem = config_path.stem
    txt = out_dir / f"{stem}.validation.txt"
    kv = out_dir / f"{stem}.validation.kv"
    txt.write_text(report.to_text(), encoding="utf-8")
    kv.write_text(report.to_kv(), encoding="utf-8")
    sys.stdout.write(report.to_text())
    write_manifest(out_dir / f"{stem}.validate-manifest.json", "validate",
                   {"config": str(config_path), "samples": args.samples, "seed": args.seed},
                   [txt, kv], started)
    if not report.mandatory_ok:
        for check in report.failures():
            sys.stderr.write(f"assumption violated: {check.name}: {check.detail}\n")
        return EXIT_ASSUMPTION
    return EXIT_OK


def _gate(spec: ProblemSpec, samples: int, seed: int) -> int | None:
    """Run the cost-assumption gate; EXIT_ASSUMPTION on failure."""
    report = validate_a2(spec, samples=samples, seed=seed)
    if not report.mandatory_ok:
        for check in report.failures():
            sys.stderr.write(f"assumption violated: {check.name}: {check.detail}\n")
        return EXIT_ASSUMPTION
    return None


def cmd_solve(args) -> int:
    started = time.perf_counter()
    config_path = Path(args.config)
    spec, grid_cfg, solver_cfg = _load(config_path)
    gate = _gate(spec, args.samples, args.seed)
    if gate is not None:
        return gate

    grid = make_grid(spec, _parse_grid(args.grid, grid_cfg, spec))
    config = _solver_config(args, solver_cfg)
    threads = _resolve_threads(args)
    result = solve(spec, grid, config)

    out_dir = _out_dir(args, config_path)
    stem = config_path.stem
    value_path = out_dir / f"{stem}.value.csv"
    residual_path = out_dir / f"{stem}.residuals.csv"
    write_value_csv(value_path, spec, grid, result.values)
    write_residual_csv(residual_path, result.change_history)
    write_manifest(out_dir / f"{stem}.solve-manifest.json", "solve", {
        "config": str(config_path),
        "grid": list(grid.counts),
        "dt": result.dt,
        "tolerance": config.tolerance,
        "max_iterations": config.max_iterations,
        "init": str(config.init),
        "variant": config.variant.value,
        "seed": args.seed,
        "threads": threads,
        "iterations": result.iterations,
        "converged": result.converged,
    }, [value_path, residual_path], started)

    status = "converged" if result.converged else "NOT CONVERGED"
    sys.stdout.write(
        f"{status} in {result.iterations} iteration(s); last change "
        f"{fmt(result.last_change)}; field written to {value_path}\n")
    if not result.converged:
        sys.stderr.write(
            f"no convergence within {config.max_iterations} iterations "
            f"(last change {fmt(result.last_change)}); partial field kept\n")
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    config_path = Path(args.config)
    spec, grid_cfg, solver_cfg = _load(config_path)
    grid, values = read_value_csv(Path(args.values), spec)

    d1 = _mode_index(spec.d1_labels, args.d1, 1)
    d2 = _mode_index(spec.d2_labels, args.d2, 2)
    start = np.array([float(v) for v in args.start.split(",")]) if args.start \
        else grid.box.mean(axis=1)
    if start.size != spec.dimension:
        raise MismatchError(f"--start needs {spec.dimension} coordinate(s)")

    traj = simulate(spec, grid, values, start, d1, d2, horizon=args.horizon,
                    dt=args.dt, action_tol=args.action_tol,
                    variant=Variant.parse(args.variant or solver_cfg.get("variant", "plus")))

    out_dir = _out_dir(args, config_path)
    stem = config_path.stem
    traj_path = out_dir / f"{stem}.trajectory.csv"
    write_trajectory_csv(traj_path, spec, traj)

    total = traj.total_cost()
    recomputed = evaluate_cost(traj, spec.discount)
    idx, wts = interp_weights(grid, grid.clamp(start).reshape(1, -1))
    v0 = float((values[d1, d2][idx[0]] * wts[0]).sum())
    summary = (
        f"trajectory: {traj.steps} step(s), {len(traj.impulse_events)} impulse(s), "
        f"{len(traj.switch1_events)} player-1 switch(es), "
        f"{len(traj.switch2_events)} player-2 switch(es)\n"
        f"cost decomposition:\n"
        f"  running          = {fmt(traj.running_total)}\n"
        f"  player-1 switches = -{fmt(traj.switch1_total)}\n"
        f"  player-2 switches = +{fmt(traj.switch2_total)}\n"
        f"  impulses          = +{fmt(traj.impulse_total)}\n"
        f"  total             = {fmt(total)}  (recomputed {fmt(recomputed)})\n"
        f"value at start      = {fmt(v0)}  (gap {fmt(abs(total - v0))})\n")
    summary_path = out_dir / f"{stem}.simulation.txt"
    summary_path.write_text(summary, encoding="utf-8")
    sys.stdout.write(summary)
    write_manifest(out_dir / f"{stem}.simulate-manifest.json", "simulate", {
        "config": str(config_path),
        "values": str(args.values),
        "start": start.tolist(),
        "d1": d1, "d2": d2,
        "horizon": args.horizon,
        "dt": traj.dt,
        "action_tol": args.action_tol,
    }, [traj_path, summary_path], started)
    return EXIT_OK


def cmd_verify(args) -> int:
    started = time.perf_counter()
    config_path = Path(args.config)
    spec, grid_cfg, solver_cfg = _load(config_path)
    gate = _gate(spec, args.samples, args.seed)
    if gate is not None:
        return gate

    config = _solver_config(args, solver_cfg)
    suites = set(args.suite) if args.suite else None

    if args.values:
        grid, values = read_value_csv(Path(args.values), spec)
        checks = []
        if suites is None or "chain" in suites:
            checks.append(obstacle_chain_check(values, spec, grid))
        if suites is None or "impulse" in suites:
            checks.append(post_impulse_strictness(values, spec, grid))
        if suites is None or "dpp" in suites:
            checks.append(dpp_consistency(values, spec, grid, variant=config.variant))
        report = VerificationReport(checks, args.seed)
    else:
        grid = make_grid(spec, _parse_grid(args.grid, grid_cfg, spec))
        report = run_all(spec, grid, config, seed=args.seed, trials=args.trials,
                         suites=suites)

    out_dir = _out_dir(args, config_path)
    stem = config_path.stem
    txt = out_dir / f"{stem}.verification.txt"
    kv = out_dir / f"{stem}.verification.kv"
    txt.write_text(report.to_text(), encoding="utf-8")
    kv.write_text(report.to_kv(), encoding="utf-8")
    sys.stdout.write(report.to_text())
    write_manifest(out_dir / f"{stem}.verify-manifest.json", "verify", {
        "config": str(config_path),
        "values": str(args.values) if args.values else None,
        "suite": sorted(suites) if suites else "all",
        "seed": args.seed,
        "trials": args.trials,
    }, [txt, kv], started)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_analyze(args) -> int:
    config_path = Path(args.config)
    spec, grid_cfg, _ = _load(config_path)
    grid = make_grid(spec, _parse_grid(args.grid, grid_cfg, spec))

    y = check_y1_y2(spec)
    gap = isaacs_gap(spec, grid, costate_samples=args.costates, seed=args.seed)
    lip = lipschitz_probe(spec, samples=args.samples, seed=args.seed)
    report = validate_a2(spec, samples=args.samples, seed=args.seed)

    sys.stdout.write(y.to_text(spec))
    sys.stdout.write(f"saddle-order gap estimate: {fmt(gap)}"
                     + (" (orders agree on the sample)\n" if gap == 0.0 else "\n"))
    sys.stdout.write(f"drift Lipschitz estimate: {fmt(lip)}\n")
    for key in sorted(report.estimates):
        sys.stdout.write(f"{key} = {fmt(report.estimates[key])}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybrid-isaacs",
        description="Solve, simulate, and verify zero-sum hybrid differential games.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeded=True):
        p.add_argument("config", help="problem definition file")
        p.add_argument("--out", help="output directory (default: beside the config)")
        if seeded:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=int, default=256,
                       help="sample count for the cost-assumption gate")

    p = sub.add_parser("validate", help="check the cost assumptions")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="compute the value field")
    common(p)
    p.add_argument("--grid", help="points per dimension, e.g. 101 or 65,65")
    p.add_argument("--dt", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--init", choices=["zero", "upper"])
    p.add_argument("--variant", choices=["plus", "minus"])
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (mirrors HYBRID_ISAACS_THREADS; results "
                        "are identical for any value)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="roll out the feedback policy")
    p.add_argument("config")
    p.add_argument("values", help="value CSV produced by solve")
    p.add_argument("--out")
    p.add_argument("--start", help="comma-separated start state")
    p.add_argument("--d1", default="0", help="starting player-1 mode (label or index)")
    p.add_argument("--d2", default="0", help="starting player-2 mode (label or index)")
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--action-tol", type=float, default=1e-8, dest="action_tol")
    p.add_argument("--variant", choices=["plus", "minus"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the structural property checks")
    common(p)
    p.add_argument("--grid")
    p.add_argument("--dt", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--variant", choices=["plus", "minus"])
    p.add_argument("--suite", action="append", choices=SUITES,
                   help="restrict to named checks (repeatable)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--values", help="check an existing value CSV instead of solving")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", help="print structure conditions and estimates")
    common(p)
    p.add_argument("--grid")
    p.add_argument("--costates", type=int, default=16)
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SpecStructureError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    except MismatchError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_MISMATCH
    except ChatterError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NO_CONVERGENCE
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE


def app() -> None:
    raise SystemExit(main())
