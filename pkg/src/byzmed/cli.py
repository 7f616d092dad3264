"""Command-line entry point.

    byzmed run --config PATH --out DIR [--replicates K] [--seed S]
    byzmed verify --n N --q Q --d D --sigma S --gnorm G
    byzmed list

``BYZMED_MAX_WORKERS`` caps how many replicates run in parallel (default 1).
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import aggregators, attacks, problems
from .aggregators import AggregatorSpec, agg_krum, agg_mean, agg_medoid
from .attacks import AttackSpec
from .config import ConfigError, load_manifest
from .gradcore import ContractError
from .resilience import ETA, build_mean_counterexample, build_selection_counterexample
from .results import summarize_final, write_averaged_csv, write_metrics_csv
from .simulator import ExperimentConfig, SimulationError, train

MAX_WORKERS_ENV = "BYZMED_MAX_WORKERS"


def _max_workers() -> int:
    raw = os.environ.get(MAX_WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{MAX_WORKERS_ENV} must be an integer, got {raw!r}") from None


def _run_one(config: ExperimentConfig):
    try:
        return train(config).metrics, None
    except SimulationError as exc:
        return exc.metrics, str(exc)


def cmd_run(args) -> int:
    try:
        manifest = load_manifest(args.config, args.out, args.replicates, args.seed)
        workers = _max_workers()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    jobs = [
        (cell, r, dataclasses.replace(cell.config, seed=manifest.seed_base + r))
        for cell in manifest.cells
        for r in range(manifest.replicates)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, [cfg for _, _, cfg in jobs]))
    else:
        outcomes = [_run_one(cfg) for _, _, cfg in jobs]

    status = 0
    by_cell: dict[str, list] = {}
    for (cell, r, _), (metrics, error) in zip(jobs, outcomes):
        write_metrics_csv(manifest.out_dir / f"{cell.name}_rep{r}.csv", metrics)
        if error is not None:
            print(f"error: {cell.name} replicate {r}: {error}", file=sys.stderr)
            status = 1
        else:
            by_cell.setdefault(cell.name, []).append(metrics)

    for cell in manifest.cells:
        runs = by_cell.get(cell.name, [])
        if len(runs) != manifest.replicates:
            continue
        write_averaged_csv(manifest.out_dir / f"{cell.name}_mean.csv", runs)
        mean, std = summarize_final(runs)
        print(f"{cell.name}: final eval_metric {mean:.4f} +- {std:.4f} over {len(runs)} replicate(s)")
    return status


def verify_report(n: int, q: int, d: int, sigma: float, gnorm: float) -> tuple[list[str], bool]:
    """Build the text of the ``verify`` report; the flag is False if a counterexample check failed."""
    lines = [f"n={n} q={q} d={d} sigma={sigma:g} ||g||={gnorm:g}",
             f"{'rule':<8} {'eta':>12} {'sin_alpha':>12}  condition"]
    for rule, fn in ETA.items():
        try:
            eta = fn(n, q)
        except ContractError:
            lines.append(f"{rule:<8} {'N/A':>12} {'N/A':>12}  N/A")
            continue
        sin_alpha = eta * math.sqrt(d) * sigma / gnorm
        verdict = "SATISFIED" if sin_alpha < 1.0 else "VIOLATED"
        lines.append(f"{rule:<8} {eta:12.6f} {sin_alpha:12.6g}  {verdict}")

    ok = True
    g = np.full(d, gnorm / math.sqrt(d))
    if n >= 2:
        ip = float(agg_mean(build_mean_counterexample(g, n)) @ g)
        passed = ip < 0
        ok &= passed
        lines.append(f"mean counterexample: <Aggr, g> = {ip:.6g} -> {'PASS' if passed else 'FAIL'}")
    else:
        lines.append("mean counterexample: N/A (n < 2)")

    if n <= d:
        m = build_selection_counterexample(g, n, d)
        for name, rule in (("medoid", agg_medoid), ("krum", lambda x: agg_krum(x, q))):
            try:
                ip = float(rule(m) @ g)
            except ContractError:
                lines.append(f"selection counterexample ({name}): N/A")
                continue
            passed = ip < 0
            ok &= passed
            lines.append(f"selection counterexample ({name}): <Aggr, g> = {ip:.6g} -> {'PASS' if passed else 'FAIL'}")
    else:
        lines.append("selection counterexample: N/A (needs n <= d)")
    return lines, ok


def cmd_verify(args) -> int:
    if args.n < 1 or args.q < 0 or args.d < 1 or args.sigma < 0 or args.gnorm <= 0:
        print("error: need n >= 1, q >= 0, d >= 1, sigma >= 0, gnorm > 0", file=sys.stderr)
        return 2
    lines, ok = verify_report(args.n, args.q, args.d, args.sigma, args.gnorm)
    print("\n".join(lines))
    return 0 if ok else 1


ATTACK_PARAMS = {
    "none": (),
    "gaussian": ("q", "sigma", "byzantine_selection"),
    "omniscient": ("q", "scale", "byzantine_selection"),
    "bitflip": ("num_dims", "bit_positions", "same_worker"),
    "gambler": ("num_servers", "target_server", "prob", "factor"),
}

AGGREGATOR_PARAMS = {
    "mean": (),
    "medoid": (),
    "krum": ("q",),
    "multikrum": ("q", "multikrum_m"),
    "geomed": ("geomed_tolerance", "geomed_max_iters"),
    "marmed": (),
    "meamed": ("q",),
}

PROBLEM_PARAMS = {
    "quadratic": "d, sigma, optimum, data_seed",
    "logistic": "n_samples, n_features, n_classes, n_eval, l2, label_noise, data_seed",
    "mnist": "path, max_per_class, eval_max_per_class, l2",
}


def list_lines() -> list[str]:
    agg_defaults = AggregatorSpec()
    atk_defaults = AttackSpec()
    lines = ["aggregators:"]
    for kind in aggregators.AGGREGATOR_KINDS:
        params = ", ".join(f"{p}={getattr(agg_defaults, p)!r}" for p in AGGREGATOR_PARAMS[kind])
        lines.append(f"  {kind}({params})")
    lines.append("attacks:")
    for kind in attacks.ATTACK_KINDS:
        params = ", ".join(f"{p}={getattr(atk_defaults, p)!r}" for p in ATTACK_PARAMS[kind])
        lines.append(f"  {kind}({params})")
    lines.append("problems:")
    for kind in problems.PROBLEM_KINDS:
        lines.append(f"  {kind}({PROBLEM_PARAMS[kind]})")
    return lines


def cmd_list(args) -> int:
    print("\n".join(list_lines()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="byzmed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment grid and write metrics CSVs")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--replicates", type=int, default=1)
    run.add_argument("--seed", type=int, default=None, help="seed of replicate 0 (default: config seed)")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="print resilience bounds and run the counterexample checks")
    verify.add_argument("--n", type=int, required=True)
    verify.add_argument("--q", type=int, required=True)
    verify.add_argument("--d", type=int, required=True)
    verify.add_argument("--sigma", type=float, required=True)
    verify.add_argument("--gnorm", type=float, required=True)
    verify.set_defaults(func=cmd_verify)

    lst = sub.add_parser("list", help="list aggregators, attacks and problems")
    lst.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
