"""Command-line entry point: ``aircomp --config run.yaml [--mode M] [--seed S] [--out DIR]``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .baselines import BaselineKind, run_baseline
from .celldual import NonConvergence
from .centralized import MseProfile, pareto_sweep, solve_p1, two_cell_profiles
from .config import ConfigError, RunConfig, parse_config, serialize_config
from .coordination import CoordinationParams, PairStalled, init_it_from_allocation, run_algorithm2
from .feasibility import PhaseOneError
from .mse import empirical_mse_samples, mse_of_cell
from .network import draw_realization

log = logging.getLogger(__name__)

# Failures of a single run that are recorded in the output instead of aborting.
RUN_ERRORS = (NonConvergence, PhaseOneError, PairStalled, RuntimeError, ValueError, ArithmeticError)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _error_text(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def _profiles(config: RunConfig) -> list[MseProfile]:
    if config.centralized.profiles:
        return [MseProfile.from_mse(beta) for beta in config.centralized.profiles]
    return two_cell_profiles(config.centralized.num_profiles)


def _run_profiles(config: RunConfig, out: Path, name: str) -> None:
    scenario = config.scenario.build()
    num_cells = scenario.num_cells
    profiles = _profiles(config)
    rows = []
    for r in range(config.realizations):
        realization = draw_realization(scenario, config.seed, r)
        for point in pareto_sweep(realization, profiles, scenario.power_budgets, config.centralized.bisect_tol):
            mse = point.mse if point.mse is not None else [None] * num_cells
            rows.append([r, *point.beta, *mse, None if point.error else point.eps, point.error or ""])
    header = (["realization"] + [f"beta_{i + 1}" for i in range(num_cells)]
              + [f"mse_{i + 1}" for i in range(num_cells)] + ["eps", "error"])
    _write_csv(out / f"{name}.csv", header, rows)


def _coordination_params(config: RunConfig) -> CoordinationParams:
    d = config.distributed
    return CoordinationParams(alpha=d.alpha, step_fraction=d.step_fraction, det_tol=d.det_tol, tol=d.tol,
                              max_rounds=d.max_rounds, solver_tol=d.solver_tol)


def _run_distributed(config: RunConfig, out: Path) -> None:
    scenario = config.scenario.build()
    num_cells = scenario.num_cells
    params = _coordination_params(config)
    trace_rows, summary_rows = [], []
    with open(out / "messages.jsonl", "w", encoding="utf-8") as log_file:
        for r in range(config.realizations):
            realization = draw_realization(scenario, config.seed, r)
            budgets = scenario.power_budgets
            start = run_baseline(realization, BaselineKind.IGNORE_INTERFERENCE, budgets)
            try:
                result = run_algorithm2(realization, init_it_from_allocation(realization, start.allocation.powers),
                                        budgets, params)
            except RUN_ERRORS as exc:
                summary_rows.append([r, None, "error", *[None] * (2 * num_cells), *start.mse, _error_text(exc)])
                continue
            for row in result.trace:
                first, second = row.pair if row.pair is not None else (None, None)
                trace_rows.append([r, row.round, first, second, *row.mse])
            summary_rows.append([r, result.rounds, result.stop_reason, *result.mse, *result.true_mse,
                                 *start.mse, ""])
            for message in result.messages:
                log_file.write(json.dumps({"realization": r, **message.to_dict()}) + "\n")
    cells = range(1, num_cells + 1)
    _write_csv(out / "convergence.csv",
               ["realization", "round", "pair_first", "pair_second"] + [f"mse_{i}" for i in cells], trace_rows)
    _write_csv(out / "distributed.csv",
               ["realization", "rounds", "stop_reason"] + [f"mse_{i}" for i in cells]
               + [f"true_mse_{i}" for i in cells] + [f"start_mse_{i}" for i in cells] + ["error"],
               summary_rows)


BASELINE_ORDER = ("centralized", BaselineKind.MAX_INTERFERENCE.value, BaselineKind.IGNORE_INTERFERENCE.value,
                  BaselineKind.FULL_POWER.value)


def _baseline_sums(realization, budgets, config: RunConfig) -> dict[str, float]:
    eta_flag = config.baselines.true_interference_eta
    sums = {}
    for kind in BaselineKind:
        sums[kind.value] = run_baseline(realization, kind, budgets, eta_flag).sum_mse
    reference = run_baseline(realization, BaselineKind.MAX_INTERFERENCE, budgets)
    sol = solve_p1(realization, MseProfile.from_mse(reference.mse), budgets, config.centralized.bisect_tol)
    sums["centralized"] = float(sol.mse.sum())
    return sums


def _run_baselines(config: RunConfig, out: Path) -> None:
    sweeps = [("power_w", p, dict(power_budget=p)) for p in config.baselines.power_sweep_w]
    sweeps += [("devices_per_cell", k, dict(devices_per_cell=k)) for k in config.baselines.device_sweep]
    rows = []
    for sweep, value, kwargs in sweeps:
        scenario = config.scenario.build(**kwargs)
        samples = {name: [] for name in BASELINE_ORDER}
        errors = []
        for r in range(config.realizations):
            realization = draw_realization(scenario, config.seed, r)
            try:
                sums = _baseline_sums(realization, scenario.power_budgets, config)
            except RUN_ERRORS as exc:
                errors.append(f"realization {r}: {_error_text(exc)}")
                continue
            for name in BASELINE_ORDER:
                samples[name].append(sums[name])
        for name in BASELINE_ORDER:
            values = np.array(samples[name])
            mean = float(values.mean()) if len(values) else None
            stderr = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else None
            rows.append([name, sweep, value, mean, stderr, len(values), "; ".join(errors)])
    _write_csv(out / "baselines.csv",
               ["scheme", "sweep", "value", "mean_sum_mse", "std_error", "realizations", "errors"], rows)


def _run_validate(config: RunConfig, out: Path) -> None:
    scenario = config.scenario.build()
    budgets = scenario.power_budgets
    trials = config.validate.trials
    rows = []
    kinds = (BaselineKind.FULL_POWER, BaselineKind.IGNORE_INTERFERENCE)
    for r in range(config.realizations):
        realization = draw_realization(scenario, config.seed, r)
        for k, kind in enumerate(kinds):
            allocation = run_baseline(realization, kind, budgets).allocation
            mc_seed = int(np.random.SeedSequence(config.seed, spawn_key=(r, 3, k)).generate_state(1)[0])
            for ell in range(realization.num_cells):
                analytic = mse_of_cell(realization, allocation, ell)
                samples = empirical_mse_samples(realization, allocation, ell, trials, mc_seed)
                empirical = math.fsum(samples) / trials
                stderr = float(samples.std(ddof=1) / math.sqrt(trials))
                rows.append([r, kind.value, ell + 1, analytic, empirical, stderr,
                             (empirical - analytic) / stderr, ""])
    _write_csv(out / "validate.csv",
               ["realization", "allocation", "cell", "analytic_mse", "empirical_mse", "std_error", "z_score",
                "error"], rows)


def run(config: RunConfig) -> int:
    """Execute one configured run; returns the process exit status."""
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(serialize_config(config), encoding="utf-8")
    if config.mode in ("pareto", "centralized"):
        _run_profiles(config, out, config.mode)
    elif config.mode == "distributed":
        _run_distributed(config, out)
    elif config.mode == "baselines":
        _run_baselines(config, out)
    else:
        _run_validate(config, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aircomp", description="Multi-cell AirComp power control experiments.")
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--mode", choices=["centralized", "distributed", "baselines", "pareto", "validate"],
                        help="override the configured mode")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        config = parse_config(args.config).with_overrides(args.mode, args.seed, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(config)
    except OSError as exc:
        print(f"system error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
