import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from byzmed.aggregators import (
    AggregatorSpec,
    ResilienceWarning,
    agg_geomed,
    agg_krum,
    agg_marmed,
    agg_meamed,
    agg_mean,
    agg_medoid,
    agg_multikrum,
    aggregate,
    geomed_objective,
    krum_scores,
)
from byzmed.gradcore import ContractError
from oracles import (
    geomed_grid_1d,
    geomed_grid_2d,
    krum_bruteforce,
    krum_scores_bruteforce,
    lower_median,
    meamed_column_enumerate,
    meamed_column_sort,
    medoid_bruteforce,
)


# -- Mean -------------------------------------------------------------------------

def test_mean_examples():
    assert agg_mean([[1, 1], [3, 3]]).tolist() == [2, 2]
    assert agg_mean([[5, -2]]).tolist() == [5, -2]
    # honest rows at g = [1], last row -g - v1 - v2
    assert agg_mean([[1], [1], [-3]])[0] == pytest.approx(-1 / 3, abs=1e-15)


# -- Medoid -----------------------------------------------------------------------

@pytest.mark.parametrize(
    "rows,expected",
    [
        ([[0], [1], [10]], [1]),
        ([[2, 3], [2, 3], [2, 3]], [2, 3]),
        ([[0, 0], [0, 0], [9, 9]], [0, 0]),
    ],
)
def test_medoid_examples(rows, expected):
    assert medoid_bruteforce(rows) == expected
    assert agg_medoid(rows).tolist() == expected


def test_medoid_matches_bruteforce_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n, d = rng.integers(1, 9), rng.integers(1, 5)
        rows = rng.standard_normal((n, d))
        assert agg_medoid(rows).tolist() == medoid_bruteforce(rows.tolist())


# -- Krum -------------------------------------------------------------------------

def test_krum_scores_examples():
    rows = [[0], [1], [2], [10]]
    assert krum_scores_bruteforce(rows, 0) == [5, 2, 5, 145]
    assert krum_scores(rows, 0).tolist() == [5, 2, 5, 145]
    # two neighbours each: three zero-distance rows share score 0
    assert krum_scores_bruteforce([[0], [0], [0], [1]], 0) == [0, 0, 0, 2]
    assert krum_scores([[0], [0], [0], [1]], 0).tolist() == [0, 0, 0, 2]
    assert krum_scores(np.ones((6, 3)), 1).tolist() == [0] * 6


def test_krum_examples():
    assert agg_krum([[0], [1], [2], [10]], 0).tolist() == [1]
    assert agg_krum([[0, 0], [0.1, 0], [5, 5], [0.05, 0]], 0).tolist() == [0.05, 0]
    rows = np.tile([3.0, -1.0], (5, 1))
    assert agg_krum(rows, 1).tolist() == [3.0, -1.0]


@pytest.mark.parametrize("n,q", [(3, 1), (4, 1), (2, 0)])
def test_krum_parameter_error(n, q):
    with pytest.raises(ContractError):
        krum_scores(np.zeros((n, 2)), q)


def test_krum_matches_bruteforce_random():
    rng = np.random.default_rng(1)
    for _ in range(150):
        n = int(rng.integers(4, 9))
        q = int(rng.integers(0, (n - 3) // 2 + 1))
        rows = rng.standard_normal((n, int(rng.integers(1, 4))))
        assert agg_krum(rows, q).tolist() == krum_bruteforce(rows.tolist(), q)


# -- Multi-Krum -------------------------------------------------------------------

def test_multikrum_examples():
    rows = np.array([[0.0], [1.0], [2.0], [10.0]])
    assert agg_multikrum(rows, 0, 1).tolist() == agg_krum(rows, 0).tolist()
    assert agg_multikrum(rows, 0, 2).tolist() == [0.5]
    same = np.tile([4.0, 2.0], (7, 1))
    assert agg_multikrum(same, 2).tolist() == [4.0, 2.0]


def test_multikrum_default_count_is_n_minus_q():
    rng = np.random.default_rng(2)
    rows = rng.standard_normal((9, 3))
    scores = krum_scores(rows, 2)
    chosen = sorted(np.argsort(scores, kind="stable")[:7])
    np.testing.assert_array_equal(agg_multikrum(rows, 2), rows[chosen].mean(axis=0))


@pytest.mark.parametrize("mk", [0, 5])
def test_multikrum_count_range(mk):
    with pytest.raises(ContractError):
        agg_multikrum(np.zeros((5, 1)), 1, mk)


# -- GeoMed -----------------------------------------------------------------------

def test_geomed_symmetric_square():
    rows = [[0, 0], [2, 0], [1, 1], [1, -1]]
    np.testing.assert_allclose(agg_geomed(rows), [1, 0], atol=1e-9)


def test_geomed_one_dimensional():
    x, f = geomed_grid_1d([0, 0, 10])
    assert x == pytest.approx(0.0, abs=1e-3)
    out = agg_geomed([[0], [0], [10]])
    assert out[0] == pytest.approx(0.0, abs=1e-9)
    assert geomed_objective(np.array([[0], [0], [10]]), out) <= f * (1 + 1e-8)


def test_geomed_single_row():
    assert agg_geomed([[3.5, -1.0]]).tolist() == [3.5, -1.0]


def test_geomed_collinear_even_count():
    # any point in [1, 2] is optimal; the result must reach the optimal objective
    rows = np.array([[0.0], [1.0], [2.0], [3.0]])
    assert geomed_objective(rows, agg_geomed(rows)) == pytest.approx(4.0, rel=1e-9)


def test_geomed_vertex_optimum():
    # obtuse triangle: the geometric median is the vertex with the 150 degree angle
    rows = np.array([[0.0, 0.0], [10.0, 0.0], [10 * math.cos(math.radians(150)), 10 * math.sin(math.radians(150))]])
    np.testing.assert_allclose(agg_geomed(rows), [0.0, 0.0], atol=1e-12)


def test_geomed_dominates_rows_and_mean():
    rng = np.random.default_rng(4)
    for _ in range(100):
        rows = rng.standard_normal((int(rng.integers(2, 15)), int(rng.integers(1, 6))))
        rows[0] *= 1e3
        f = geomed_objective(rows, agg_geomed(rows))
        assert f <= geomed_objective(rows, rows.mean(axis=0))
        assert all(f <= geomed_objective(rows, r) for r in rows)


def test_geomed_close_to_grid_oracle_2d():
    rng = np.random.default_rng(5)
    for _ in range(30):
        rows = rng.standard_normal((int(rng.integers(2, 12)), 2)) * rng.uniform(0.1, 10)
        _, f_oracle = geomed_grid_2d(rows)
        assert geomed_objective(rows, agg_geomed(rows)) <= (1 + 1e-7) * f_oracle


# -- MarMed -----------------------------------------------------------------------

def test_marmed_examples():
    assert agg_marmed([[1, 10], [2, 20], [3, 30]]).tolist() == [2, 20]
    assert agg_marmed([[1, 30], [2, 10], [3, 20]]).tolist() == [2, 20]
    assert agg_marmed([[4, -4]]).tolist() == [4, -4]


def test_marmed_even_count_uses_lower_median():
    assert agg_marmed([[1], [2], [3], [4]]).tolist() == [2]


# -- MeaMed -----------------------------------------------------------------------

def test_meamed_examples():
    col = [1, 2, 3, 100, 101]
    assert meamed_column_sort(col, 2) == 2
    assert meamed_column_enumerate(col, 2) == 2
    assert agg_meamed(np.array(col, dtype=float)[:, None], 2).tolist() == [2]
    rows = np.random.default_rng(6).standard_normal((7, 4))
    np.testing.assert_array_equal(agg_meamed(rows, 0), agg_mean(rows))
    assert agg_meamed(np.full((6, 2), 1.25), 3).tolist() == [1.25, 1.25]


def test_meamed_ties_resolved_by_worker_index():
    # median 0; candidates at distance 1 are -1 (worker 1) and 1 (worker 2); keep two values
    col = [0.0, -1.0, 1.0, 5.0]
    assert agg_meamed(np.array(col)[:, None], 2)[0] == pytest.approx(-0.5)
    assert meamed_column_enumerate(col, 2) == pytest.approx(-0.5)


@pytest.mark.parametrize("q", [-1, 4])
def test_meamed_q_range(q):
    with pytest.raises(ContractError):
        agg_meamed(np.zeros((4, 1)), q)


def test_meamed_matches_enumeration_small():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(1, 10))
        q = int(rng.integers(0, n))
        col = rng.integers(-4, 5, size=n).astype(float)  # small integers force ties
        got = agg_meamed(col[:, None], q)[0]
        assert got == pytest.approx(meamed_column_enumerate(col.tolist(), q), rel=1e-12, abs=1e-12)


# -- dispatch ---------------------------------------------------------------------

def test_aggregate_dispatch_and_single_worker():
    row = np.array([[1.5, -2.0, 0.25]])
    for kind in ("mean", "medoid", "krum", "multikrum", "geomed", "marmed", "meamed"):
        assert aggregate(AggregatorSpec(kind, q=0), row).tolist() == row[0].tolist()


def test_aggregate_warns_outside_guarantee():
    with pytest.warns(ResilienceWarning):
        aggregate(AggregatorSpec("meamed", q=3), np.zeros((6, 2)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        aggregate(AggregatorSpec("meamed", q=2), np.zeros((6, 2)))


def test_spec_rejects_unknown_kind():
    with pytest.raises(ContractError, match="valid kinds"):
        AggregatorSpec("krumm")


# -- properties -------------------------------------------------------------------

EXACT_RULES = {
    "mean": agg_mean,
    "medoid": agg_medoid,
    "krum": lambda m: agg_krum(m, 1),
    "multikrum": lambda m: agg_multikrum(m, 1),
    "marmed": agg_marmed,
    "meamed": lambda m: agg_meamed(m, 2),
}


def distinct_integer_matrix(rng, n, d):
    # distinct integer entries keep sums exact and rule out ties in values and distances (w.h.p.)
    return rng.permutation(np.arange(-10 * n * d, 10 * n * d))[: n * d].reshape(n, d).astype(float) * 3.0


@pytest.mark.parametrize("name", sorted(EXACT_RULES))
def test_permutation_invariance(name):
    rule = EXACT_RULES[name]
    rng = np.random.default_rng(8)
    for _ in range(40):
        m = distinct_integer_matrix(rng, int(rng.integers(5, 12)), int(rng.integers(1, 5)))
        if name in ("medoid", "krum", "multikrum"):
            from scipy.spatial.distance import pdist
            if len(set(pdist(m, "sqeuclidean"))) < len(pdist(m)):
                continue
        perm = rng.permutation(m.shape[0])
        np.testing.assert_array_equal(rule(m[perm]), rule(m))


def test_geomed_permutation_invariance():
    rng = np.random.default_rng(9)
    for _ in range(30):
        m = rng.standard_normal((int(rng.integers(3, 12)), 3))
        perm = rng.permutation(m.shape[0])
        np.testing.assert_allclose(agg_geomed(m[perm]), agg_geomed(m), rtol=1e-6, atol=1e-6)


TRANSLATION_RULES = {
    "mean": agg_mean,
    "marmed": agg_marmed,
    "meamed": lambda m: agg_meamed(m, 2),
    "geomed": agg_geomed,
    "medoid": agg_medoid,
    "krum": lambda m: agg_krum(m, 1),
}


@pytest.mark.parametrize("name", sorted(TRANSLATION_RULES))
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_translation_equivariance(name, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((7, 3))
    c = rng.uniform(-50, 50, size=3)
    rule = TRANSLATION_RULES[name]
    tol = 1e-5 if name == "geomed" else 1e-10
    np.testing.assert_allclose(rule(m + c), rule(m) + c, rtol=0, atol=tol * (1 + np.abs(c).max()))


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 31), st.data())
def test_marmed_bounded_by_correct_values(n, data):
    q = data.draw(st.integers(0, math.ceil(n / 2) - 1))
    correct = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=n - q, max_size=n - q))
    byz = data.draw(st.lists(st.floats(-1e30, 1e30), min_size=q, max_size=q))
    col = data.draw(st.permutations(correct + byz))
    mu = agg_marmed(np.array(col)[:, None])[0]
    assert min(correct) <= mu <= max(correct)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 31), st.data())
def test_meamed_bounded_around_median(n, data):
    q = data.draw(st.integers(0, math.ceil(n / 2) - 1))
    correct = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=n - q, max_size=n - q))
    byz = data.draw(st.lists(st.floats(-1e30, 1e30), min_size=q, max_size=q))
    col = np.array(data.draw(st.permutations(correct + byz)))
    rho = agg_meamed(col[:, None], q)[0]
    mu = lower_median(col.tolist())
    bound = max(abs(u - mu) for u in correct)
    assert abs(rho - mu) <= bound + 4 * np.spacing(max(abs(mu), bound, 1e-300))


def test_meamed_sort_oracle_random_columns():
    rng = np.random.default_rng(10)
    for _ in range(200):
        n = int(rng.integers(1, 60))
        q = int(rng.integers(0, n))
        col = rng.standard_normal(n)
        assert agg_meamed(col[:, None], q)[0] == pytest.approx(meamed_column_sort(col.tolist(), q), rel=1e-12, abs=1e-14)
