"""Numeric foundations: gradient matrices, order statistics and the 32-bit wire format.

A round of synchronous SGD produces an ``(n, d)`` array with one row per worker.
Everything downstream (attacks, aggregators) consumes that array in float64;
float32 only appears at the wire boundary, where the bit-flip attack lives.
"""
from __future__ import annotations

import random

import numpy as np


class ContractError(ValueError):
    """Raised when an operation is called outside its documented domain."""


def as_grad_matrix(rows) -> np.ndarray:
    """Validate and return ``rows`` as a float64 ``(n, d)`` array.

    A 1-D input is treated as a single worker.
    """
    m = np.asarray(rows, dtype=np.float64)
    if m.ndim == 1:
        m = m[np.newaxis, :]
    if m.ndim != 2:
        raise ContractError(f"gradient matrix must be 2-D, got shape {m.shape}")
    n, d = m.shape
    if n < 1 or d < 1:
        raise ContractError(f"gradient matrix needs n >= 1 and d >= 1, got {m.shape}")
    return m


def as_grad_vector(values, d: int | None = None) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ContractError(f"gradient vector must be non-empty 1-D, got shape {v.shape}")
    if d is not None and v.size != d:
        raise ContractError(f"gradient vector has length {v.size}, expected {d}")
    return v


# -- order statistics ---------------------------------------------------------

def select_kth(values, k: int, seed: int = 0):
    """Return the element of rank ``k`` (0-based) in ascending order.

    Randomized quickselect with three-way partitioning; the pivot stream is a
    ``random.Random(seed)`` so the sequence of comparisons is reproducible.
    Works on a scratch copy, the caller's container is left untouched.
    Average O(n), worst case O(n^2).
    """
    a = list(values)
    n = len(a)
    if n == 0:
        raise ContractError("select_kth of an empty sequence")
    if not 0 <= k < n:
        raise ContractError(f"rank k={k} out of range for {n} values")
    rng = random.Random(seed)
    while True:
        if len(a) == 1:
            return a[0]
        pivot = a[rng.randrange(len(a))]
        lows = [x for x in a if x < pivot]
        if k < len(lows):
            a = lows
            continue
        n_eq = sum(1 for x in a if x == pivot)
        if k < len(lows) + n_eq:
            return pivot
        k -= len(lows) + n_eq
        a = [x for x in a if x > pivot]


def lower_median_rank(n: int) -> int:
    """Rank of the lower middle order statistic; equals the middle one for odd ``n``."""
    return (n - 1) // 2


def median_1d(values, seed: int = 0):
    """One-dimensional median; for even length the lower middle element is returned."""
    a = list(values)
    if not a:
        raise ContractError("median of an empty sequence")
    return select_kth(a, lower_median_rank(len(a)), seed=seed)


def column_select(m: np.ndarray, k: int) -> np.ndarray:
    """k-th order statistic of every column of ``m``.

    Uses numpy's introselect (``np.partition``), which is linear on average.
    NaNs sort last, matching ``np.sort``.
    """
    n = m.shape[0]
    if not 0 <= k < n:
        raise ContractError(f"rank k={k} out of range for {n} rows")
    return np.partition(m, k, axis=0)[k]


def column_median(m: np.ndarray) -> np.ndarray:
    """Lower median of every column; each entry is an element of its column."""
    return column_select(m, lower_median_rank(m.shape[0]))


# -- wire format ----------------------------------------------------------------

def to_wire(x):
    """Round ``x`` to IEEE-754 single precision and return its bit pattern.

    Scalars map to a Python ``int``; arrays map to a ``uint32`` array of the same shape.
    """
    arr = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore"):
        bits = arr.astype(np.float32).view(np.uint32)
    if bits.ndim == 0:
        return int(bits)
    return bits


def from_wire(w):
    """Decode a 32-bit pattern (int or uint32 array) to float64, exactly."""
    arr = np.asarray(w, dtype=np.uint32)
    out = arr.view(np.float32).astype(np.float64)
    if out.ndim == 0:
        return float(out)
    return out
