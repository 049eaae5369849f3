"""Command-line front end: run benchmark experiments and the diagnostic suite.

``trsqp run`` sweeps (noise level, seed) pairs for a chosen problem,
writing one trajectory CSV per run plus a JSON summary. ``trsqp check``
runs the diagnostic suite and prints a pass/fail table. Configuration is
plain key=value text with command-line overrides; re-running an identical
spec reproduces the CSVs byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import benchmarks, diagnostics
from .estimator import AccuracyParams
from .problem import GaussianNoiseSpec, gaussian_noisy, load_labeled_csv
from .solver import IterationRecord, SolverConfig, run

PROBLEM_CHOICES = ("saddle", "logistic-normal", "logistic-exponential", "quadratic")

# Flat key=value names accepted in config files, split between solver and
# accuracy parameters.
_ACCURACY_KEYS = {f.name for f in dataclasses.fields(AccuracyParams)} - {"alpha"}
_CONFIG_KEYS = {f.name for f in dataclasses.fields(SolverConfig)} - {"accuracy"}


@dataclasses.dataclass
class ExperimentSpec:
    """A resolved experiment: problem, solver settings, sweep lists, output."""

    problem: str
    config: SolverConfig
    noise_levels: list
    seeds: list
    out_dir: Path
    full_size: bool = False
    data_seed: int = 0


def _parse_value(raw: str, target_type):
    if target_type is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def read_config_file(path) -> dict:
    """Parse key=value lines; '#' starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = raw
    return values


def build_config(file_values: dict, cli_overrides: dict) -> SolverConfig:
    """Assemble a SolverConfig from defaults, a config file, and CLI flags."""
    defaults = SolverConfig()
    acc_defaults = AccuracyParams()
    solver_kwargs = {}
    accuracy_kwargs = {}
    for key, raw in file_values.items():
        if key in _ACCURACY_KEYS:
            accuracy_kwargs[key] = _parse_value(raw, type(getattr(acc_defaults, key)))
        elif key in _CONFIG_KEYS:
            default = getattr(defaults, key)
            target = bool if key == "use_true_kkt" else type(default)
            solver_kwargs[key] = _parse_value(raw, target)
        else:
            raise ValueError(f"unknown config key {key!r}")
    solver_kwargs.update({k: v for k, v in cli_overrides.items() if v is not None})
    alpha = solver_kwargs.get("alpha", 0)
    if accuracy_kwargs:
        kwargs = dict(accuracy_kwargs)
        kwargs.setdefault("alpha", alpha)
        if "kappa_f" not in kwargs:
            eta = solver_kwargs.get("eta", 0.4)
            kfcd = solver_kwargs.get("kappa_fcd", 1.0)
            dmax = solver_kwargs.get("delta_max", 5.0)
            kwargs["kappa_f"] = kfcd * eta**3 / (16.0 * max(1.0, dmax))
        solver_kwargs["accuracy"] = AccuracyParams(**kwargs)
    return SolverConfig(**solver_kwargs)


def _initial_point(problem_name: str, problem, seed: int) -> np.ndarray:
    if problem_name == "saddle":
        # Uniform draw in the 0.01-ball around the saddle point.
        rng = np.random.default_rng(1000 + seed)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        radius = 0.01 * np.sqrt(rng.uniform())
        return np.array([1.0, 0.0]) + radius * np.array([np.cos(angle), np.sin(angle)])
    if problem_name == "quadratic":
        return np.array([3.0, -1.0])
    return np.zeros(problem.dim)


def build_problem(spec: ExperimentSpec, noise: float):
    name = spec.problem
    if name == "quadratic":
        return gaussian_noisy(benchmarks.make_quadratic(), GaussianNoiseSpec(noise))
    if name == "saddle":
        return gaussian_noisy(benchmarks.make_saddle(), GaussianNoiseSpec(noise))
    if name.startswith("logistic-") or name.startswith("csv:"):
        if noise != 0.0:
            raise ValueError(
                "finite-sum problems are driven by subsampling; use --noise 0"
            )
        data_rng = np.random.default_rng(913_000 + spec.data_seed)
        if name.startswith("csv:"):
            features, labels = load_labeled_csv(name[4:])
            return benchmarks.make_logistic_from_data(features, labels, rng=data_rng)
        law = name.split("-", 1)[1]
        n_records = 60_000 if spec.full_size else 6_000
        lspec = benchmarks.SyntheticLogisticSpec(n_records=n_records, feature_law=law)
        return benchmarks.make_logistic(lspec, data_rng)
    raise ValueError(f"unknown problem {name!r}")


def _run_name(problem: str, noise: float, seed: int) -> str:
    tag = problem.replace(":", "_").replace("/", "_")
    return f"{tag}_noise{noise:g}_seed{seed}"


def cmd_run(spec: ExperimentSpec) -> int:
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"problem": spec.problem, "runs": []}
    for noise in spec.noise_levels:
        problem = build_problem(spec, noise)
        for seed in spec.seeds:
            config = dataclasses.replace(spec.config, seed=seed)
            x0 = _initial_point(spec.problem, problem, seed)
            t0 = time.perf_counter()
            result = run(problem, x0, config)
            elapsed = time.perf_counter() - t0
            name = _run_name(spec.problem, noise, seed)
            csv_path = spec.out_dir / f"{name}.csv"
            with open(csv_path, "w") as fh:
                fh.write(IterationRecord.CSV_FIELDS + "\n")
                for rec in result.records:
                    fh.write(rec.csv_row() + "\n")
            summary["runs"].append(
                {
                    "name": name,
                    "noise": noise,
                    "seed": seed,
                    "converged": result.converged,
                    "stop_reason": result.stop_reason,
                    "iterations": result.state.k,
                    "final_kkt": result.final_kkt,
                    "final_tau": result.final_tau,
                    "final_x": [float(v) for v in result.state.x],
                    "invariant_violations": result.invariants.total_violations,
                    "wall_time": elapsed,
                }
            )
            print(
                f"{name}: {result.stop_reason} after {result.state.k} iterations "
                f"(kkt={result.final_kkt:.3e}, {elapsed:.2f}s)"
            )
    with open(spec.out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return 0


def cmd_check(module_filter: str | None, fault: str | None) -> int:
    results = diagnostics.run_checks(module_filter, fault)
    width = max(len(f"{r.module}: {r.name}") for r in results)
    failures = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        failures += not r.passed
        print(f"[{status}] {f'{r.module}: {r.name}':<{width}}  {r.detail}")
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 0 if failures == 0 else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trsqp",
        description="Trust-region SQP solver benchmarks for stochastic "
        "equality-constrained problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a benchmark sweep over noise levels and seeds")
    runp.add_argument(
        "--problem",
        required=True,
        help=f"one of {', '.join(PROBLEM_CHOICES)}, or csv:<path> for a labeled dataset",
    )
    runp.add_argument("--alpha", type=int, choices=(0, 1), default=None)
    runp.add_argument("--noise", type=float, nargs="+", default=[0.0], help="noise variances")
    runp.add_argument("--seeds", type=int, nargs="+", default=None)
    runp.add_argument("--max-iters", type=int, default=None)
    runp.add_argument("--kkt-tol", type=float, default=None)
    runp.add_argument("--hessian", choices=("id", "sr1", "esth", "aveh"), default=None)
    runp.add_argument("--out", default="runs", help="output directory")
    runp.add_argument("--config", default=None, help="key=value config file")
    runp.add_argument("--full-size", action="store_true", help="full-size logistic datasets")
    runp.add_argument("--data-seed", type=int, default=0, help="dataset generation seed")

    checkp = sub.add_parser("check", help="run the diagnostic suite")
    checkp.add_argument("--filter", default=None, help="restrict checks to one module")
    checkp.add_argument(
        "--inject-fault",
        default=None,
        choices=("pred-sign",),
        help="test hook: corrupt a known quantity to confirm the suite catches it",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "check":
        try:
            return cmd_check(args.filter, args.inject_fault)
        except ValueError as exc:
            parser.error(str(exc))
    if args.problem not in PROBLEM_CHOICES and not args.problem.startswith("csv:"):
        parser.error(
            f"unknown problem {args.problem!r}; choose from "
            f"{', '.join(PROBLEM_CHOICES)} or csv:<path>"
        )
    if args.seeds is None:
        env_seed = os.environ.get("TRSQP_SEED")
        args.seeds = [int(env_seed)] if env_seed else [0]
    overrides = {
        "alpha": args.alpha,
        "max_iters": args.max_iters,
        "kkt_tol": args.kkt_tol,
        "hessian": {"id": "identity"}.get(args.hessian, args.hessian),
    }
    try:
        file_values = read_config_file(args.config) if args.config else {}
        config = build_config(file_values, overrides)
        spec = ExperimentSpec(
            problem=args.problem,
            config=config,
            noise_levels=list(args.noise),
            seeds=list(args.seeds),
            out_dir=Path(args.out),
            full_size=args.full_size,
            data_seed=args.data_seed,
        )
        return cmd_run(spec)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
