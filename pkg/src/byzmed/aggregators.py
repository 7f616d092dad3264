"""Aggregation rules reducing an ``(n, d)`` gradient matrix to one vector.

Baselines: Mean, Medoid, Krum, Multi-Krum.  Median-based: GeoMed (Weiszfeld),
MarMed (coordinate-wise median) and MeaMed (mean of the ``n - q`` values
closest to the coordinate-wise median).

Ties are always broken in favour of the lowest worker index.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .gradcore import ContractError, as_grad_matrix, column_median

AGGREGATOR_KINDS = ("mean", "medoid", "krum", "multikrum", "geomed", "marmed", "meamed")
# scores this close are treated as equal, so tie-breaking survives rounding
TIE_RTOL = 1e-12


class ResilienceWarning(UserWarning):
    """The rule still computes, but outside the regime where its guarantee holds."""


@dataclass(frozen=True)
class AggregatorSpec:
    """Which rule to run and its hyperparameters.

    ``q`` is the estimated number of Byzantine values per coordinate (or
    workers, for the Krum family).  ``multikrum_m=None`` means ``n - q``.
    """

    kind: str = "mean"
    q: int = 0
    geomed_tolerance: float = 1e-8
    geomed_max_iters: int = 200
    multikrum_m: int | None = None

    def __post_init__(self):
        if self.kind not in AGGREGATOR_KINDS:
            raise ContractError(
                f"aggregator.kind: unknown kind {self.kind!r}; valid kinds are {', '.join(AGGREGATOR_KINDS)}"
            )
        if self.q < 0:
            raise ContractError(f"aggregator.q must be >= 0, got {self.q}")
        if self.geomed_tolerance < 0:
            raise ContractError("aggregator.geomed_tolerance must be >= 0")
        if self.geomed_max_iters < 1:
            raise ContractError("aggregator.geomed_max_iters must be >= 1")
        if self.multikrum_m is not None and self.multikrum_m < 1:
            raise ContractError("aggregator.multikrum_m must be >= 1")


def agg_mean(m) -> np.ndarray:
    m = as_grad_matrix(m)
    return m.mean(axis=0)


def _distances(m: np.ndarray, metric: str) -> np.ndarray:
    # pdist works on explicit differences, so equal far-away rows get distance exactly 0
    if m.shape[0] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(m, metric=metric))


def argmin_lowest(values, rtol: float = TIE_RTOL) -> int:
    """Index of the minimum; values within ``rtol`` of it count as ties and the lowest index wins."""
    values = np.asarray(values, dtype=np.float64)
    best = values.min()
    return int(np.flatnonzero(values <= best + rtol * abs(best))[0])


def medoid_index(m) -> int:
    m = as_grad_matrix(m)
    return argmin_lowest(_distances(m, "euclidean").sum(axis=1))


def agg_medoid(m) -> np.ndarray:
    """Input row with the smallest sum of Euclidean distances to all rows."""
    m = as_grad_matrix(m)
    return m[medoid_index(m)].copy()


def _check_krum(n: int, q: int) -> int:
    if q < 0 or 2 * q + 2 >= n:
        raise ContractError(f"Krum needs 2q + 2 < n, got q={q}, n={n}")
    return n - q - 2


def krum_scores(m, q: int) -> np.ndarray:
    """Sum of squared distances from each row to its ``n - q - 2`` nearest other rows."""
    m = as_grad_matrix(m)
    n = m.shape[0]
    k = _check_krum(n, q)
    dist = _distances(m, "sqeuclidean")
    np.fill_diagonal(dist, np.inf)
    # the neighbour multiset, hence its sum, does not depend on how ties are broken
    nearest = np.sort(np.partition(dist, k - 1, axis=1)[:, :k], axis=1)
    return nearest.sum(axis=1)


def agg_krum(m, q: int) -> np.ndarray:
    m = as_grad_matrix(m)
    return m[argmin_lowest(krum_scores(m, q))].copy()


def agg_multikrum(m, q: int, mk: int | None = None) -> np.ndarray:
    """Average of the ``mk`` rows with the lowest Krum scores (scores computed once)."""
    m = as_grad_matrix(m)
    n = m.shape[0]
    if mk is None:
        mk = n - q
    if not 1 <= mk <= n - q:
        raise ContractError(f"multikrum_m must lie in [1, n - q] = [1, {n - q}], got {mk}")
    scores = krum_scores(m, q)
    chosen = np.sort(np.argsort(scores, kind="stable")[:mk])
    return m[chosen].mean(axis=0)


def geomed_objective(m: np.ndarray, z: np.ndarray) -> float:
    """Sum of Euclidean distances from ``z`` to every row of ``m``."""
    return float(np.linalg.norm(m - z, axis=1).sum())


def agg_geomed(m, tol: float = 1e-8, max_iters: int = 200) -> np.ndarray:
    """Approximate geometric median by Weiszfeld iteration.

    Starts from the coordinate-wise mean.  When the iterate lands on an input
    row the Vardi-Zhang step is used instead of the plain update, so the
    iteration can stop at (or move away from) a data point.

    Weiszfeld converges linearly, sometimes with a rate close to one.  The
    rate ``r`` is read off successive step lengths; in the slow phase the
    iterate is extrapolated to its projected limit (kept only if it lowers the
    objective), and the stopping test inflates the last decrease by the
    remaining geometric tail before comparing it with ``tol`` times the
    objective.  The returned point never has a larger objective than the mean
    or any input row.
    """
    m = as_grad_matrix(m)
    n = m.shape[0]
    if n == 1:
        return m[0].copy()
    scale = max(float(np.abs(m).max()), 1e-300)
    coincide = 1e-12 * scale

    z = m.mean(axis=0)
    obj = geomed_objective(m, z)
    prev_step = math.nan
    for _ in range(max_iters):
        dist = np.linalg.norm(m - z, axis=1)
        at_point = dist < coincide
        w = np.zeros(n)
        w[~at_point] = 1.0 / dist[~at_point]
        if not w.any():
            break
        t = (w[:, None] * m).sum(axis=0) / w.sum()
        n_at = int(at_point.sum())
        if n_at:
            # Vardi-Zhang: pull towards the data point by its multiplicity
            r = np.linalg.norm((w[:, None] * (m - z)).sum(axis=0))
            if r <= n_at:
                break
            t = (1.0 - n_at / r) * t + (n_at / r) * z
        new_obj = geomed_objective(m, t)
        if new_obj > obj:
            break
        improvement = obj - new_obj
        step = float(np.linalg.norm(t - z))
        rate = step / prev_step if prev_step > 0 else math.nan
        prev_step = step
        if 0.5 < rate < 1.0:
            jump = t + (t - z) * (rate / (1.0 - rate))
            jump_obj = geomed_objective(m, jump)
            if jump_obj < new_obj:
                z, obj = jump, jump_obj
                prev_step = math.nan
                continue
        z, obj = t, new_obj
        # objective gaps shrink like rate**2 near a smooth minimum
        # without a rate estimate only a stalled step counts as converged
        tail = 1.0 / (1.0 - min(rate, 0.9999) ** 2) if rate == rate else math.inf
        if improvement == 0.0 or improvement * tail <= tol * obj:
            break

    totals = _distances(m, "euclidean").sum(axis=1)
    best_row = int(np.argmin(totals))
    if totals[best_row] < obj:
        return m[best_row].copy()
    return z


def agg_marmed(m) -> np.ndarray:
    """Coordinate-wise lower median."""
    m = as_grad_matrix(m)
    return column_median(m)


def meamed_mask(m: np.ndarray, q: int) -> np.ndarray:
    """Boolean ``(n, d)`` mask of the ``n - q`` entries per column nearest to the column median."""
    n = m.shape[0]
    keep = n - q
    mu = column_median(m)
    with np.errstate(invalid="ignore"):
        dist = np.abs(m - mu)
    dist = np.where(np.isnan(dist), np.inf, dist)
    cutoff = np.partition(dist, keep - 1, axis=0)[keep - 1]
    below = dist < cutoff
    at = dist == cutoff
    # fill the remaining slots from the boundary ties in worker order
    missing = keep - below.sum(axis=0)
    return below | (at & (np.cumsum(at, axis=0) <= missing))


def agg_meamed(m, q: int) -> np.ndarray:
    """Per coordinate, average of the ``n - q`` values closest to the median."""
    m = as_grad_matrix(m)
    n = m.shape[0]
    if not 0 <= q <= n - 1:
        raise ContractError(f"MeaMed needs 0 <= q <= n - 1, got q={q}, n={n}")
    if q == 0:
        return m.mean(axis=0)
    mask = meamed_mask(m, q)
    return np.where(mask, m, 0.0).sum(axis=0) / (n - q)


def max_tolerated(n: int) -> int:
    """Largest q for which the median-based guarantees apply: ceil(n/2) - 1."""
    return math.ceil(n / 2) - 1


def aggregate(spec: AggregatorSpec, m) -> np.ndarray:
    """Dispatch on ``spec.kind``."""
    m = as_grad_matrix(m)
    n = m.shape[0]
    kind = spec.kind
    if kind in ("marmed", "meamed") and spec.q > max_tolerated(n):
        warnings.warn(
            f"{kind} with q={spec.q} > ceil(n/2)-1={max_tolerated(n)}: resilience bound does not apply",
            ResilienceWarning,
            stacklevel=2,
        )
    if kind == "mean":
        return agg_mean(m)
    if kind == "medoid":
        return agg_medoid(m)
    if kind == "krum":
        if n == 1:
            return m[0].copy()
        return agg_krum(m, spec.q)
    if kind == "multikrum":
        if n == 1:
            return m[0].copy()
        return agg_multikrum(m, spec.q, spec.multikrum_m)
    if kind == "geomed":
        return agg_geomed(m, spec.geomed_tolerance, spec.geomed_max_iters)
    if kind == "marmed":
        return agg_marmed(m)
    if kind == "meamed":
        return agg_meamed(m, spec.q if n > 1 else 0)
    raise ContractError(f"unknown aggregator kind {kind!r}")
