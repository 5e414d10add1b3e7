import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stablecluster.clustering import same_partition
from stablecluster.coreset import build_multiplicative_coreset, check_multiplicative_property, solve_via_coreset
from stablecluster.dp import solve_dp
from stablecluster.errors import BudgetError
from stablecluster.geometry import EUCLIDEAN, L1, MetricSpec, Objective, pairwise
from stablecluster.one_clustering import one_cluster_cost
from stablecluster.oracle import brute_force_optimal
from stablecluster.seeding import gonzalez_kcenter
from stablecluster.stability import generate_stable_instance

POLY2 = MetricSpec.polyhedral(2, 0.05)
METRIC = {Objective.MEANS: EUCLIDEAN, Objective.MEDIAN: POLY2, Objective.CENTER: POLY2}


def test_gonzalez_trivial_cases(rng):
    X = rng.random((8, 2))
    S, r = gonzalez_kcenter(X, 8)
    assert r == 0.0 and sorted(S) == list(range(8))
    S, r = gonzalez_kcenter(X, 1)
    assert list(S) == [0] and r == pytest.approx(pairwise(X[:1], X).max())


def test_gonzalez_two_approximation(rng):
    for _ in range(20):
        X = rng.random((12, 2))
        _, r = gonzalez_kcenter(X, 3)
        D = pairwise(X, X)
        opt = min(D[:, list(S)].min(axis=1).max() for S in itertools.combinations(range(12), 3))
        assert r <= 2 * opt + 1e-12


def test_singleton_and_duplicates():
    assert list(build_multiplicative_coreset([[1.0, 2.0]], 1).indices) == [0]
    X = np.repeat(np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 1.0]]), 4, axis=0)
    Q = build_multiplicative_coreset(X, 3)
    assert sorted(map(tuple, X[Q.indices])) == sorted(map(tuple, np.unique(X, axis=0)))


def test_coreset_hits_every_cluster():
    inst = generate_stable_instance(3, 300, 2, 2.0, seed=8)
    Q = build_multiplicative_coreset(inst.points, 3, eps=1.0)
    assert set(inst.labels[Q.indices]) == {0, 1, 2}
    assert len(Q) == len(set(Q.indices)) and len(Q.provenance) == len(Q)


@given(arrays(np.float64, st.tuples(st.integers(3, 60), st.just(2)),
              elements=st.floats(-50, 50, allow_nan=False)), st.integers(1, 3))
def test_multiplicative_property_spot_check(X, k):
    Q = build_multiplicative_coreset(X, k, eps=1.0)
    assert set(Q.indices) <= set(range(len(X)))
    report = check_multiplicative_property(X, Q, k, 1.0, trials=20)
    assert report["failures"] == 0


def test_budget_guard(rng):
    X = rng.random((500, 2))
    with pytest.raises(BudgetError) as err:
        build_multiplicative_coreset(X, 3, eps=0.1, budget=10)
    assert err.value.diagnostics["budget"] == 10


@pytest.mark.parametrize("objective", list(Objective))
def test_k1_is_one_clustering(objective, rng):
    X = rng.random((40, 2))
    result = solve_via_coreset(X, 1, objective, METRIC[objective])
    assert result.total_cost == pytest.approx(one_cluster_cost(X, objective, METRIC[objective])[0], rel=1e-9)


@pytest.mark.parametrize("objective", list(Objective))
def test_small_instance_matches_oracle(objective):
    inst = generate_stable_instance(3, 14, 2, 6.0, seed=12)
    m = METRIC[objective]
    result = solve_via_coreset(inst.points, 3, objective, m)
    oracle = brute_force_optimal(inst.points, 3, objective, m)
    assert same_partition(result.labels, oracle.labels)
    assert result.total_cost == pytest.approx(oracle.total_cost, rel=1e-9)


def test_matches_dp_on_larger_instance():
    inst = generate_stable_instance(3, 500, 2, 6.0, seed=13)
    for objective in (Objective.MEANS, Objective.MEDIAN):
        m = METRIC[objective]
        a = solve_via_coreset(inst.points, 3, objective, m)
        b, _ = solve_dp(inst.points, 3, objective, m)
        assert same_partition(a.labels, b.labels)
        assert a.extra["coreset_size"] <= 500
