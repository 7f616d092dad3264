"""Independent brute-force references used by the tests.

Nothing here imports the implementation under test.
"""
import itertools
import math
import struct

import numpy as np


def sorted_rank(values, k):
    return sorted(values)[k]


def lower_median(values):
    s = sorted(values)
    return s[(len(s) - 1) // 2]


def sqdist(a, b):
    return math.fsum((x - y) ** 2 for x, y in zip(a, b))


def krum_scores_bruteforce(rows, q):
    """Minimum over all neighbour subsets of size n - q - 2 of the summed squared distances."""
    n = len(rows)
    k = n - q - 2
    scores = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        best = math.inf
        for subset in itertools.combinations(others, k):
            best = min(best, math.fsum(sqdist(rows[i], rows[j]) for j in subset))
        scores.append(best)
    return scores


def lowest_index_min(values, rtol=1e-12):
    best = min(values)
    return next(i for i, v in enumerate(values) if v <= best + rtol * abs(best))


def krum_bruteforce(rows, q):
    return list(rows[lowest_index_min(krum_scores_bruteforce(rows, q))])


def meamed_column_sort(column, q):
    """Mean of the n - q values nearest the lower median, ties by index, via sorting."""
    mu = lower_median(column)
    order = sorted(range(len(column)), key=lambda i: (abs(column[i] - mu), i))
    chosen = order[: len(column) - q]
    return math.fsum(column[i] for i in chosen) / len(chosen)


def meamed_column_enumerate(column, q):
    """Enumerate index subsets of size n - q in lexicographic order; return the first one
    in which every member is at least as close to the median as every non-member."""
    n = len(column)
    mu = lower_median(column)
    dist = [abs(v - mu) for v in column]
    for subset in itertools.combinations(range(n), n - q):
        inside = set(subset)
        worst_in = max(dist[i] for i in subset)
        best_out = min((dist[j] for j in range(n) if j not in inside), default=math.inf)
        if worst_in <= best_out:
            return math.fsum(column[i] for i in subset) / len(subset)
    raise AssertionError("no valid subset")


def medoid_bruteforce(rows):
    totals = [math.fsum(math.sqrt(sqdist(a, b)) for b in rows) for a in rows]
    return list(rows[lowest_index_min(totals)])


def geomed_objective(points, z):
    return math.fsum(math.hypot(*(np.asarray(p, dtype=float) - z)) for p in points)


def geomed_grid_2d(points, levels=14, steps=41):
    """Zooming grid search for the 2-D geometric median; returns (point, objective).

    The objective is convex, so shrinking the window around the best grid
    node keeps the minimiser inside it.
    """
    pts = np.asarray(points, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = (lo + hi) / 2
    half = np.maximum((hi - lo) / 2, 1e-9) * 1.01
    best_z, best_f = None, math.inf
    for _ in range(levels):
        xs = np.linspace(center[0] - half[0], center[0] + half[0], steps)
        ys = np.linspace(center[1] - half[1], center[1] + half[1], steps)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
        f = np.sqrt(((grid[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)).sum(axis=1)
        i = int(np.argmin(f))
        if f[i] < best_f:
            best_f, best_z = float(f[i]), grid[i]
        center = grid[i]
        half = half * 4.0 / (steps - 1)
    for p in pts:
        f = geomed_objective(pts, p)
        if f < best_f:
            best_f, best_z = f, p
    return best_z, best_f


def geomed_grid_1d(values, steps=100001):
    vals = np.asarray(values, dtype=float)
    xs = np.linspace(vals.min(), vals.max(), steps)
    f = np.abs(xs[:, None] - vals[None, :]).sum(axis=1)
    i = int(np.argmin(f))
    return xs[i], float(f[i])


def float32_bits(x):
    """Bit pattern of single-precision x via struct, independent of numpy views."""
    return struct.unpack(">I", struct.pack(">f", x))[0]


def decode_float32(bits):
    """Manual IEEE-754 single-precision decode (normal and subnormal numbers)."""
    sign = -1.0 if bits >> 31 else 1.0
    exponent = (bits >> 23) & 0xFF
    mantissa = bits & 0x7FFFFF
    if exponent == 0xFF:
        return sign * math.inf if mantissa == 0 else math.nan
    if exponent == 0:
        return sign * mantissa * 2.0 ** -149
    return sign * (1.0 + mantissa / 2 ** 23) * 2.0 ** (exponent - 127)
