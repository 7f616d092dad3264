"""Resilience bounds and empirical checks.

Each rule has a variance-amplification factor ``eta(n, q)``; the guarantee
holds when ``eta * sqrt(d) * sigma < ||g||``, in which case the aggregate
stays within angle ``alpha`` of the true gradient with
``sin(alpha) = eta * sqrt(d) * sigma / ||g||``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .aggregators import AggregatorSpec, aggregate, max_tolerated
from .attacks import AttackContext, AttackSpec, apply_attack, dimensional_worst_case
from .gradcore import ContractError, as_grad_matrix, as_grad_vector

# attack callable: (matrix, rng, g) -> corrupted matrix
Adversary = Callable[[np.ndarray, np.random.Generator, np.ndarray], np.ndarray]


def _check_median_domain(n: int, q: int) -> None:
    if n < 1 or q < 0 or q > max_tolerated(n):
        raise ContractError(f"need 0 <= q <= ceil(n/2) - 1, got n={n}, q={q}")


def eta_krum(n: int, q: int) -> float:
    if q < 0 or 2 * q + 2 >= n:
        raise ContractError(f"Krum bound needs 2q + 2 < n, got n={n}, q={q}")
    inner = n - q + (q * (n - q - 2) + q * q * (n - q - 1)) / (n - 2 * q - 2)
    return math.sqrt(2.0 * inner)


def eta_geomed(n: int, q: int) -> float:
    _check_median_domain(n, q)
    return (2 * n - 2 * q) / (n - 2 * q) * math.sqrt(n - q)


def eta_marmed(n: int, q: int) -> float:
    _check_median_domain(n, q)
    return math.sqrt(n - q)


def eta_meamed(n: int, q: int) -> float:
    _check_median_domain(n, q)
    return math.sqrt(10 * (n - q))


ETA = {
    "krum": eta_krum,
    "geomed": eta_geomed,
    "marmed": eta_marmed,
    "meamed": eta_meamed,
}


@dataclass(frozen=True)
class ResilienceBound:
    eta: float
    sin_alpha: float
    satisfiable: bool


def resilience_bound(rule: str, n: int, q: int, d: int, sigma: float, gnorm: float) -> ResilienceBound:
    """Evaluate the bound of ``rule`` for the given noise level and gradient norm."""
    if gnorm <= 0:
        raise ContractError("gnorm must be positive")
    eta = ETA[rule](n, q)
    sin_alpha = eta * math.sqrt(d) * sigma / gnorm
    return ResilienceBound(eta=eta, sin_alpha=sin_alpha, satisfiable=sin_alpha < 1.0)


# -- counterexamples ------------------------------------------------------------

def build_mean_counterexample(g, n: int, rng: np.random.Generator | None = None, sigma: float = 1.0):
    """Rows ``v_1..v_{n-1}`` plus a last row ``-g - sum(v)``, so the mean is ``-g/n``.

    Without ``rng`` the honest rows are fixed at ``g``; otherwise they are
    drawn as ``g + N(0, sigma^2 I)``.
    """
    g = as_grad_vector(g)
    if n < 2:
        raise ContractError("mean counterexample needs n >= 2")
    if rng is None:
        honest = np.tile(g, (n - 1, 1))
    else:
        honest = g + sigma * rng.standard_normal((n - 1, g.size))
    last = -g - honest.sum(axis=0)
    return np.vstack([honest, last])


def build_selection_counterexample(g, n: int, d: int | None = None,
                                   rng: np.random.Generator | None = None, sigma: float = 0.0):
    """Honest rows (``g`` plus optional noise) with the diagonal worst-case corruption."""
    g = as_grad_vector(g, d)
    d = g.size
    if n > d:
        raise ContractError(f"selection counterexample needs n <= d, got n={n}, d={d}")
    rows = np.tile(g, (n, 1))
    if rng is not None and sigma > 0:
        rows = rows + sigma * rng.standard_normal(rows.shape)
    return dimensional_worst_case(rows, g)


# -- adversaries for Monte-Carlo checks ----------------------------------------

def mean_adversary(m: np.ndarray, rng: np.random.Generator, g: np.ndarray) -> np.ndarray:
    """Replace the last row so the average becomes ``-g/n``."""
    out = m.copy()
    out[-1] = -g - m[:-1].sum(axis=0)
    return out


def diagonal_adversary(m: np.ndarray, rng: np.random.Generator, g: np.ndarray) -> np.ndarray:
    return dimensional_worst_case(m, g)


def random_dimensional_adversary(q: int, magnitude: float = 1e20) -> Adversary:
    """Per column, ``q`` randomly placed values replaced by ``+-magnitude`` times a random factor."""

    def attack(m: np.ndarray, rng: np.random.Generator, g: np.ndarray) -> np.ndarray:
        n, d = m.shape
        out = m.copy()
        for j in range(d):
            rows = rng.choice(n, size=q, replace=False)
            out[rows, j] = magnitude * rng.uniform(-1.0, 1.0, size=q)
        return out

    return attack


@dataclass(frozen=True)
class ConditionEstimate:
    """Monte-Carlo estimate of ``<E[Aggr], g>`` with a normal-approximation 95% CI."""

    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    trials: int
    gnorm_sq: float


def check_condition_i(agg: AggregatorSpec, attack: AttackSpec | Adversary | None, g, sigma: float,
                      n: int, trials: int = 10_000, seed: int = 0) -> ConditionEstimate:
    """Estimate ``<E[Aggr], g>`` when honest rows are ``g + N(0, sigma^2 I)``.

    ``attack`` is either an :class:`AttackSpec` or a callable
    ``(matrix, rng, g) -> matrix``.  Trials run sequentially with one stream per
    trial, so the estimate is reproducible for a given seed.
    """
    g = as_grad_vector(g)
    if trials < 100:
        raise ContractError(f"trials must be >= 100, got {trials}")
    values = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        m = g + sigma * rng.standard_normal((n, g.size))
        if attack is None:
            corrupted = m
        elif isinstance(attack, AttackSpec):
            corrupted = apply_attack(attack, AttackContext(round=t, rng=rng, correct_matrix=m), m)
        else:
            corrupted = attack(m, rng, g)
        values[t] = float(aggregate(agg, corrupted) @ g)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(trials))
    return ConditionEstimate(
        mean=mean, stderr=stderr,
        ci_low=mean - 1.96 * stderr, ci_high=mean + 1.96 * stderr,
        trials=trials, gnorm_sq=float(g @ g),
    )


def check_condition_ii_sanity(agg: AggregatorSpec, g, sigma: float, n: int, q: int,
                              trials: int = 1000, seed: int = 0) -> tuple[float, float]:
    """Finite-sample sanity check for the second-moment bound under no attack.

    Returns ``(E||Aggr||^2, (n - q) * E||G||^2)``; the first should not exceed
    the second.  This is not a test of the full moment condition.
    """
    g = as_grad_vector(g)
    agg_sq = np.empty(trials)
    grad_sq = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        m = as_grad_matrix(g + sigma * rng.standard_normal((n, g.size)))
        a = aggregate(agg, m)
        agg_sq[t] = a @ a
        grad_sq[t] = np.mean(np.einsum("ij,ij->i", m, m))
    return float(agg_sq.mean()), float((n - q) * grad_sq.mean())
