"""Synchronous parameter-server SGD with Byzantine corruption.

Each round: every worker computes a mini-batch gradient at the current
parameters, the attack corrupts the assembled ``(n, d)`` matrix, the server
aggregates it and steps ``x <- x - lr_t * Aggr``.

Randomness is keyed by ``(seed, round, worker)`` for gradients and by
``(seed, round)`` for the attacker, so a run is a pure function of its config.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .aggregators import AggregatorSpec, aggregate
from .attacks import AttackContext, AttackSpec, apply_attack, attack_rng
from .gradcore import ContractError
from .problems import ProblemSpec

LR_SCHEDULES = ("constant", "inverse_t")


@dataclass(frozen=True)
class LRSchedule:
    """``constant``: gamma every round.  ``inverse_t``: gamma / (1 + t)."""

    kind: str = "constant"
    gamma: float = 0.1

    def __post_init__(self):
        if self.kind not in LR_SCHEDULES:
            raise ContractError(f"lr.kind: expected one of {LR_SCHEDULES}, got {self.kind!r}")
        if not self.gamma > 0:
            raise ContractError(f"lr.gamma must be > 0, got {self.gamma}")

    def __call__(self, t: int) -> float:
        if self.kind == "constant":
            return self.gamma
        return self.gamma / (1.0 + t)


@dataclass(frozen=True)
class ExperimentConfig:
    n_workers: int = 20
    rounds: int = 500
    batch_size: int = 32
    lr: LRSchedule = field(default_factory=LRSchedule)
    aggregator: AggregatorSpec = field(default_factory=AggregatorSpec)
    attack: AttackSpec = field(default_factory=AttackSpec)
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    seed: int = 0
    num_servers: int = 1
    eval_every: int = 10
    record_timing: bool = False

    def __post_init__(self):
        if self.rounds < 1:
            raise ContractError(f"rounds must be >= 1, got {self.rounds}")
        if self.n_workers < 1:
            raise ContractError(f"n_workers must be >= 1, got {self.n_workers}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.num_servers < 1:
            raise ContractError(f"num_servers must be >= 1, got {self.num_servers}")
        if self.eval_every < 1:
            raise ContractError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.attack.kind in ("gaussian", "omniscient") and self.attack.q > self.n_workers:
            raise ContractError(f"attack.q={self.attack.q} exceeds n_workers={self.n_workers}")


@dataclass(frozen=True)
class MetricsRecord:
    round: int
    train_loss: float
    eval_metric: float
    grad_norm: float
    agg_wall_time: float


METRIC_FIELDS = ("train_loss", "eval_metric", "grad_norm", "agg_wall_time")


@dataclass
class SimState:
    x: np.ndarray
    round: int = 0


@dataclass
class RoundInfo:
    aggregate: np.ndarray
    grad_norm: float
    agg_wall_time: float


@dataclass
class TrainResult:
    params: np.ndarray
    metrics: list[MetricsRecord]


class SimulationError(RuntimeError):
    """A round failed; ``metrics`` holds everything recorded before the failure."""

    def __init__(self, message: str, round: int, metrics: list[MetricsRecord]):
        super().__init__(message)
        self.round = round
        self.metrics = metrics


def worker_rng(seed: int, round: int, worker: int) -> np.random.Generator:
    return np.random.default_rng([seed, round, 0, worker])


def worker_gradient(problem, x, batch_rng: np.random.Generator, batch_size: int = 32) -> np.ndarray:
    return problem.worker_gradient(x, batch_rng, batch_size)


def collect_gradients(problem, x, config: ExperimentConfig, t: int) -> np.ndarray:
    """Assemble the honest ``(n, d)`` matrix in worker-index order."""
    return np.stack([
        worker_gradient(problem, x, worker_rng(config.seed, t, i), config.batch_size)
        for i in range(config.n_workers)
    ])


def run_round(state: SimState, config: ExperimentConfig, problem) -> tuple[np.ndarray, RoundInfo]:
    t = state.round
    if t >= config.rounds:
        raise ContractError(f"round {t} is past the configured {config.rounds} rounds")
    # a diverged run overflows to inf/nan; that is recorded, not raised
    with np.errstate(over="ignore", invalid="ignore"):
        honest = collect_gradients(problem, state.x, config, t)
        ctx = AttackContext(round=t, rng=attack_rng(config.seed, t), correct_matrix=honest,
                            num_servers=config.num_servers)
        received = apply_attack(config.attack, ctx, honest)
        start = time.perf_counter()
        agg = aggregate(config.aggregator, received)
        elapsed = time.perf_counter() - start
        x_new = state.x - config.lr(t) * agg
        grad_norm = float(np.linalg.norm(agg))
    return x_new, RoundInfo(aggregate=agg, grad_norm=grad_norm,
                            agg_wall_time=elapsed if config.record_timing else math.nan)


def _evaluate(problem, x) -> tuple[float, float]:
    with np.errstate(over="ignore", invalid="ignore"):
        return problem.loss(x), problem.eval_metric(x)


def train(config: ExperimentConfig, problem=None, x0=None) -> TrainResult:
    """Run every round of ``config``; metrics are recorded every ``eval_every`` rounds and at the end.

    ``problem`` may be passed in to reuse an already built dataset; it must
    match ``config.problem``.
    """
    if problem is None:
        problem = config.problem.build()
    x = problem.init() if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (problem.d,):
        raise ContractError(f"initial point has shape {x.shape}, expected ({problem.d},)")
    state = SimState(x=x, round=0)
    metrics: list[MetricsRecord] = []
    for t in range(config.rounds):
        try:
            x_new, info = run_round(state, config, problem)
        except Exception as exc:
            raise SimulationError(f"round {t}: {exc}", t, metrics) from exc
        state = SimState(x=x_new, round=t + 1)
        if state.round % config.eval_every == 0 or state.round == config.rounds:
            loss, metric = _evaluate(problem, state.x)
            metrics.append(MetricsRecord(round=state.round, train_loss=loss, eval_metric=metric,
                                         grad_norm=info.grad_norm, agg_wall_time=info.agg_wall_time))
    return TrainResult(params=state.x, metrics=metrics)


def run_experiment(config: ExperimentConfig, problem=None) -> list[MetricsRecord]:
    return train(config, problem).metrics
