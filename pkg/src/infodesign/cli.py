"""Command-line front end: solve, evaluate and verify subcommands.

All numeric CSV fields carry 17 significant digits so files round-trip
losslessly.  Exit codes: 0 success, 1 configuration error, 2 numeric
failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import backends
from .config import RunConfig, parse_config
from .errors import ConfigError, DomainError, NumericError
from .observations import trap_info
from .oracle import (
    exhaustive_search,
    fd_sensitivity,
    monte_carlo_fisher,
    poisson_info_series,
)
from .sensitivity import (
    Trajectory,
    simulate,
    total_fisher_information,
    trace_objective,
)
from .solver import solve

__all__ = ["main", "entry"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_VERIFY = 3

# Canonical short experiment used by `verify mc`; admissible for any
# m=1 preset with inputs in [0, 1].
MC_CHECK_INPUTS = (0.5, 0.3, 0.2, 0.1)

POISSON_CHECK_RATES = ((0.5, 200), (1.0, 200), (5.0, 200), (320.0, 1000))


def _fmt(value) -> str:
    return f"{float(value):.17g}"


def _write_inputs_csv(path: Path, inputs: np.ndarray) -> None:
    m = inputs.shape[1]
    header = ["t"] + (["u"] if m == 1 else [f"u{i}" for i in range(m)])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for t in range(inputs.shape[0]):
            fh.write(",".join([str(t)] + [_fmt(v) for v in inputs[t]]) + "\n")


def _write_states_csv(path: Path, traj: Trajectory) -> None:
    n, p = traj.sens.shape[1], traj.sens.shape[2]
    header = ["t"]
    header += ["x"] if n == 1 else [f"x{i}" for i in range(n)]
    header += [f"s{i}_{j}" for i in range(n) for j in range(p)]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for t in range(traj.xs.shape[0]):
            row = [str(t)]
            row += [_fmt(v) for v in traj.xs[t]]
            row += [_fmt(v) for v in traj.sens[t].reshape(-1)]
            fh.write(",".join(row) + "\n")


def _write_matrix_csv(path: Path, matrix: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"col{j}" for j in range(matrix.shape[1])) + "\n")
        for row in matrix:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_summary(path: Path, entries) -> None:
    with open(path, "w") as fh:
        for key, value in entries:
            fh.write(f"{key} = {value}\n")


def _read_inputs_csv(path, m: int) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"inputs file {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty inputs file") from None
        if len(header) != m + 1 or header[0].strip() != "t":
            raise ConfigError(
                f"{path}: expected header 't' plus {m} input column(s), got {header}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = int(row[0])
                values = [float(tok) for tok in row[1:]]
            except (ValueError, IndexError) as err:
                raise ConfigError(f"{path}: row {lineno}: malformed entry ({err})") from err
            if len(values) != m:
                raise ConfigError(f"{path}: row {lineno}: expected {m} input value(s)")
            if t != len(rows):
                raise ConfigError(
                    f"{path}: row {lineno}: expected t={len(rows)}, got t={t} "
                    "(stages must be contiguous from 0)"
                )
            rows.append(values)
    if not rows:
        raise ConfigError(f"{path}: no input rows")
    return np.asarray(rows, dtype=np.float64)


def _grid_summary_entries(grid):
    for d, ax in enumerate(grid.axes):
        yield f"grid_axis_{d}", f"{_fmt(ax.lo)},{_fmt(ax.hi)},{ax.points}"


def cmd_solve(cfg: RunConfig) -> int:
    model, obs = cfg.build_models()
    params = cfg.build_params(model)
    input_grid = cfg.build_input_grid()
    result, induction = solve(
        model,
        obs,
        params,
        input_grid,
        cfg.horizon,
        grid=cfg.grid,
        weights=cfg.weights,
        pilot_count=cfg.pilot_count,
        seed=cfg.seed,
        grid_points=cfg.grid_points,
        workers=cfg.workers or None,
    )
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    _write_inputs_csv(outdir / "inputs.csv", result.inputs)
    _write_states_csv(outdir / "states.csv", result.trajectory)
    entries = [
        ("command", "solve"),
        ("model", cfg.model_name),
        ("objective", _fmt(result.objective)),
        ("horizon", cfg.horizon),
        ("backend", result.backend),
        ("seed", cfg.seed),
        ("workers", cfg.workers),
        ("runtime_s", f"{result.runtime_s:.3f}"),
        ("clamp_counts", ",".join(str(c) for c in result.stage_clamp_counts)),
        ("offgrid_stages", ",".join(str(s) for s in result.offgrid_stages)),
    ]
    entries.extend(_grid_summary_entries(result.grid))
    _write_summary(outdir / "summary.txt", entries)
    print(f"objective {_fmt(result.objective)} in {result.runtime_s:.1f}s; outputs in {outdir}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, inputs_file) -> int:
    model, obs = cfg.build_models()
    params = cfg.build_params(model)
    inputs = _read_inputs_csv(inputs_file, model.m)
    traj = simulate(model, params, inputs)
    info = total_fisher_information(model, obs, traj, cfg.weights)
    trace = trace_objective(info, cfg.weights)
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    _write_matrix_csv(outdir / "information.csv", info.matrix)
    _write_states_csv(outdir / "states.csv", traj)
    _write_summary(
        outdir / "evaluation.txt",
        [
            ("command", "evaluate"),
            ("model", cfg.model_name),
            ("inputs_file", str(inputs_file)),
            ("horizon", traj.horizon),
            ("objective", _fmt(trace)),
        ],
    )
    print(f"objective {_fmt(trace)}; outputs in {outdir}")
    return EXIT_OK


class _Check:
    def __init__(self, name: str, value: float, target: str, passed: bool):
        self.name = name
        self.value = value
        self.target = target
        self.passed = passed


def _finish_verify(cfg: RunConfig, which: str, checks, extra_entries=()) -> int:
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / f"verify_{which}.csv", "w", newline="") as fh:
        fh.write("check,value,target,passed\n")
        for chk in checks:
            fh.write(f"{chk.name},{_fmt(chk.value)},{chk.target},{chk.passed}\n")
    all_passed = all(chk.passed for chk in checks)
    entries = [("command", f"verify {which}"), ("model", cfg.model_name), ("seed", cfg.seed)]
    entries.extend(extra_entries)
    entries.append(("passed", all_passed))
    _write_summary(outdir / f"verify_{which}.txt", entries)
    for chk in checks:
        status = "pass" if chk.passed else "FAIL"
        print(f"[{status}] {chk.name}: {_fmt(chk.value)} (target {chk.target})")
    return EXIT_OK if all_passed else EXIT_VERIFY


def cmd_verify(cfg: RunConfig, which: str) -> int:
    model, obs = cfg.build_models()
    params = cfg.build_params(model)

    if which == "poisson":
        checks = []
        for lam, truncation in POISSON_CHECK_RATES:
            series = poisson_info_series(lam, truncation)
            err = abs(series * lam - 1.0)
            checks.append(_Check(f"series_rate_{lam:g}", err, "<=1e-09", err <= 1e-9))
        checks.append(
            _Check("trap_info_closed_trap", trap_info(1000.0, 0.0), "==0", trap_info(1000.0, 0.0) == 0.0)
        )
        checks.append(
            _Check("trap_info_empty_population", trap_info(0.0, 0.5), "==0", trap_info(0.0, 0.5) == 0.0)
        )
        return _finish_verify(cfg, which, checks)

    if which == "fd":
        rng = np.random.default_rng(cfg.seed)
        worst = 0.0
        for _ in range(50):
            inputs = rng.uniform(0.0, 0.9, size=(cfg.horizon + 1, model.m))
            analytic = simulate(model, params, inputs).sens
            numeric = fd_sensitivity(model, params, inputs, rel_step=1e-6)
            scale = np.maximum(np.abs(analytic), 1e-9)
            worst = max(worst, float(np.max(np.abs(numeric - analytic) / scale)))
        checks = [_Check("fd_max_rel_err", worst, "<=1e-05", worst <= 1e-5)]
        return _finish_verify(cfg, which, checks, [("sequences", 50), ("horizon", cfg.horizon)])

    if which == "mc":
        inputs = np.asarray(MC_CHECK_INPUTS)[:, None]
        traj = simulate(model, params, inputs)
        analytic = total_fisher_information(model, obs, traj).matrix
        report = monte_carlo_fisher(
            model, obs, params, inputs, sample_count=cfg.mc_samples, seed=cfg.seed
        )
        checks = []
        for i in range(model.p):
            for j in range(model.p):
                err = abs(report.estimate[i, j] - analytic[i, j])
                band = 3.0 * report.standard_errors[i, j]
                checks.append(
                    _Check(f"information_{i}{j}", err, f"<=3se={_fmt(band)}", err <= band)
                )
        for j in range(model.p):
            band = 3.0 * report.mean_score_se[j]
            err = abs(report.mean_score[j])
            checks.append(_Check(f"mean_score_{j}", err, f"<=3se={_fmt(band)}", err <= band))
        return _finish_verify(
            cfg, which, checks, [("samples", report.sample_count), ("mc_seed", report.seed)]
        )

    if which == "oracle":
        input_grid = cfg.build_input_grid()
        result, _ = solve(
            model,
            obs,
            params,
            input_grid,
            cfg.horizon,
            grid=cfg.grid,
            weights=cfg.weights,
            pilot_count=cfg.pilot_count,
            seed=cfg.seed,
            grid_points=cfg.grid_points,
            workers=cfg.workers or None,
        )
        report = exhaustive_search(
            model,
            obs,
            params,
            input_grid,
            cfg.horizon,
            weights=cfg.weights,
            budget=cfg.oracle_budget,
            dp_objective=result.objective,
        )
        checks = [
            _Check("dp_vs_oracle_ratio", report.ratio, ">=0.95", report.ratio >= 0.95),
            _Check(
                "ratio_upper_sanity", report.ratio, "<=1+1e-09", report.ratio <= 1.0 + 1e-9
            ),
        ]
        extra = [
            ("sequences_evaluated", report.sequences_evaluated),
            ("oracle_objective", _fmt(report.best_objective)),
            ("dp_objective", _fmt(result.objective)),
            ("oracle_inputs", ",".join(_fmt(v) for v in report.best_inputs.reshape(-1))),
        ]
        return _finish_verify(cfg, which, checks, extra)

    raise ConfigError(f"unknown verification {which!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def main(argv=None) -> int:
    parser = _Parser(
        prog="infodesign",
        description="Optimal input design for parameter estimation via dynamic programming",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_solve = sub.add_parser("solve", help="compute the optimal input sequence")
    p_solve.add_argument("config")
    p_eval = sub.add_parser("evaluate", help="evaluate a fixed input sequence")
    p_eval.add_argument("config")
    p_eval.add_argument("inputs_csv")
    p_verify = sub.add_parser("verify", help="run an independent correctness check")
    p_verify.add_argument("config")
    p_verify.add_argument("which", choices=["oracle", "fd", "mc", "poisson"])

    try:
        args = parser.parse_args(argv)
        cfg = parse_config(args.config)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.inputs_csv)
        return cmd_verify(cfg, args.which)
    except (ConfigError, DomainError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
