"""Metrics CSV files: one per replicate plus an across-replicate average."""
from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path

import numpy as np

from .simulator import METRIC_FIELDS, MetricsRecord

HEADER = ("round",) + METRIC_FIELDS
AVERAGED_HEADER = HEADER + tuple(f"{name}_stddev" for name in METRIC_FIELDS)


def _fmt(x) -> str:
    # repr gives the shortest string that round-trips
    return repr(float(x))


def _write_atomic(path: Path, rows: list[list[str]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_metrics_csv(path, records: list[MetricsRecord]) -> None:
    rows = [list(HEADER)]
    for r in records:
        rows.append([str(r.round)] + [_fmt(getattr(r, name)) for name in METRIC_FIELDS])
    _write_atomic(path, rows)


def read_metrics_csv(path) -> list[MetricsRecord]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [
            MetricsRecord(round=int(row["round"]), **{name: float(row[name]) for name in METRIC_FIELDS})
            for row in reader
        ]


def average_records(runs: list[list[MetricsRecord]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(rounds, mean, stddev)`` with one metric per column, over replicates.

    Replicates must share their round grid.  The standard deviation is the
    population one (ddof=0), so a single replicate yields zeros.
    """
    if not runs:
        raise ValueError("no replicates to average")
    rounds = np.array([r.round for r in runs[0]])
    for run in runs[1:]:
        if [r.round for r in run] != rounds.tolist():
            raise ValueError("replicates have different round grids")
    stack = np.array([[[getattr(r, name) for name in METRIC_FIELDS] for r in run] for run in runs])
    with np.errstate(invalid="ignore", over="ignore"):
        return rounds, stack.mean(axis=0), stack.std(axis=0)


def write_averaged_csv(path, runs: list[list[MetricsRecord]]) -> None:
    rounds, mean, std = average_records(runs)
    rows = [list(AVERAGED_HEADER)]
    for i, rnd in enumerate(rounds):
        rows.append([str(int(rnd))] + [_fmt(v) for v in mean[i]] + [_fmt(v) for v in std[i]])
    _write_atomic(path, rows)


def summarize_final(runs: list[list[MetricsRecord]]) -> tuple[float, float]:
    """Mean and stddev of the final eval metric across replicates."""
    finals = np.array([run[-1].eval_metric for run in runs])
    return float(finals.mean()), float(finals.std())
