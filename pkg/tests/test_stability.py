import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stablecluster.clustering import same_partition
from stablecluster.errors import BudgetError, InfeasibleError, ParameterError
from stablecluster.geometry import EUCLIDEAN, L1, MetricSpec, Objective, pairwise
from stablecluster.one_clustering import one_cluster_cost
from stablecluster.oracle import brute_force_optimal
from stablecluster.stability import (
    SQRT3_THRESHOLD,
    SQRT5_THRESHOLD,
    StableInstance,
    generate_stable_instance,
    perturbation_trial,
    perturbed_distances,
    spread,
    structured_multipliers,
    verify_center_proximity,
    verify_separation,
)

POLY2 = MetricSpec.polyhedral(2, 0.05)


def test_single_cluster_is_vacuous(rng):
    inst = generate_stable_instance(1, 20, 2, 3.0, seed=0)
    assert inst.certificate["passed"]
    report = verify_center_proximity(inst.points, inst.labels, inst.centers, 3.0)
    assert report["passed"] and report["certified_alpha"] == math.inf


def test_generator_example_passes_proximity():
    inst = generate_stable_instance(3, 300, 2, 6.0, seed=1)
    report = verify_center_proximity(inst.points, inst.labels, inst.centers, 6.0)
    assert report["passed"] and report["certified_alpha"] >= 6.0
    assert np.bincount(inst.labels).min() >= 1
    assert 0 < inst.spread < math.inf


def test_intra_inter_separation_at_threshold():
    inst = generate_stable_instance(2, 100, 2, SQRT3_THRESHOLD, seed=2)
    sep = verify_separation(inst.points, inst.labels, inst.centers, SQRT3_THRESHOLD)
    assert sep["properties"]["strict_separation"]["passed"]
    assert sep["properties"]["p4_threshold"]["passed"]


def test_two_singletons_on_their_centers():
    X = np.array([[0.0], [1.0]])
    report = verify_center_proximity(X, [0, 1], X, 10.0)
    assert report["certified_alpha"] == math.inf and report["passed"]
    sep = verify_separation(X, [0, 1], X, 10.0)
    assert sep["passed"]


@pytest.mark.parametrize("alpha", [SQRT3_THRESHOLD + 0.01, SQRT5_THRESHOLD + 0.01, 6.0])
def test_all_properties_hold_on_generator_output(alpha):
    for seed in range(5):
        inst = generate_stable_instance(4, 80, 3, alpha, seed=seed)
        sep = verify_separation(inst.points, inst.labels, inst.centers, alpha)
        assert sep["passed"]
        props = sep["properties"]
        assert all(props[f"p{i}"]["passed"] for i in range(1, 6))
        assert props["p4_threshold"]["applies"] and props["p4_threshold"]["passed"]
        if alpha >= SQRT5_THRESHOLD:
            assert props["p5_threshold"]["passed"]


def test_merged_clusters_break_property_four():
    inst = generate_stable_instance(3, 60, 2, 6.0, seed=5)
    labels = np.where(inst.labels == 1, 0, inst.labels)
    labels = np.where(labels == 2, 1, labels)
    centers = np.array([inst.centers[:2].mean(axis=0), inst.centers[2]])
    sep = verify_separation(inst.points, labels, centers, 6.0)
    assert not sep["properties"]["p4"]["passed"]
    assert not sep["passed"]


def test_generator_validation():
    with pytest.raises(ParameterError):
        generate_stable_instance(0, 10)
    with pytest.raises(ParameterError):
        generate_stable_instance(5, 3)
    with pytest.raises(ParameterError):
        generate_stable_instance(2, 10, alpha=1.0)


def test_generator_is_deterministic():
    a = generate_stable_instance(3, 50, 2, 5.0, seed=42)
    b = generate_stable_instance(3, 50, 2, 5.0, seed=42)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.labels, b.labels)


def test_save_and_load_round_trip(tmp_path):
    inst = generate_stable_instance(3, 40, 2, 6.0, seed=7)
    side = inst.save(tmp_path / "inst.csv")
    assert side == tmp_path / "inst.json"
    back = StableInstance.load(tmp_path / "inst.csv")
    assert np.array_equal(back.points, inst.points)
    assert np.array_equal(back.labels, inst.labels)
    assert np.array_equal(back.centers, inst.centers)
    assert back.alpha_target == inst.alpha_target


def test_spread_examples(rng):
    assert spread([[0.0], [1.0], [2.0]]) == 2.0
    assert spread([[0.0], [1.0]]) == 1.0
    X = rng.random((100, 2))
    D = pairwise(X, X)
    assert spread(X) == pytest.approx(D.max() / D[D > 0].min(), rel=1e-12)
    with pytest.raises(ParameterError):
        spread([[1.0, 1.0], [1.0, 1.0]])


@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 3)),
              elements=st.floats(-100, 100, allow_nan=False)),
       st.sampled_from([EUCLIDEAN, L1]))
def test_spread_matches_scan(X, m):
    D = pairwise(X, X, m)
    nz = D[D > 0]
    if nz.size == 0:
        return
    assert spread(X, m) == pytest.approx(nz.max() / nz.min(), rel=1e-9)


def test_perturbed_distance_sandwich(rng):
    X = rng.random((10, 2))
    D = pairwise(X, X)
    Dt = perturbed_distances(X, 3.0, rng=rng)
    assert (D <= Dt + 1e-15).all() and (Dt <= 3.0 * D + 1e-15).all()
    assert not np.allclose(Dt, Dt.T)  # symmetry is not required
    with pytest.raises(ParameterError):
        perturbed_distances(X, 2.0, multipliers=np.full((10, 10), 2.5))


def test_identity_perturbation_keeps_partition():
    inst = generate_stable_instance(3, 10, 2, 6.0, seed=1)
    D = perturbed_distances(inst.points, 6.0, multipliers=np.ones((10, 10)))
    got = brute_force_optimal(inst.points, 3, "median", distances=D)
    ref = brute_force_optimal(inst.points, 3, "median", distances=pairwise(inst.points, inst.points))
    assert np.array_equal(got.labels, ref.labels)


@pytest.mark.parametrize("objective", list(Objective))
def test_structured_perturbation_keeps_partition(objective):
    inst = generate_stable_instance(3, 11, 2, 6.0, seed=3)
    W = structured_multipliers(inst.labels, 6.0)
    D = perturbed_distances(inst.points, 6.0, multipliers=W)
    got = brute_force_optimal(inst.points, 3, objective, distances=D)
    assert same_partition(got.labels, inst.labels)


def test_random_perturbation_trials():
    inst = generate_stable_instance(3, 10, 2, 6.0, seed=4)
    report = perturbation_trial(inst, trials=100, rng=0)
    assert report["failures"] == 0
    assert same_partition(report["reference_labels"], inst.labels)


@pytest.mark.parametrize("objective", list(Objective))
def test_oracle_trivial_cases(objective, rng):
    X = rng.random((4, 2))
    m = L1
    assert brute_force_optimal(X, 4, objective, m).total_cost == 0.0
    one = brute_force_optimal(X, 1, objective, m)
    assert one.total_cost == pytest.approx(one_cluster_cost(X, objective, m)[0], rel=1e-9)


@pytest.mark.parametrize("objective", [Objective.MEDIAN, Objective.MEANS])
def test_oracle_modes_agree_on_stable_instances(objective):
    for seed in range(5):
        inst = generate_stable_instance(3, 12, 2, 6.0, seed=seed)
        a = brute_force_optimal(inst.points, 3, objective, mode="partition")
        b = brute_force_optimal(inst.points, 3, objective, mode="centers")
        assert same_partition(a.labels, b.labels)
        assert a.extra["ties"] == 1


def test_oracle_guards():
    X = np.zeros((20, 2))
    with pytest.raises(BudgetError):
        brute_force_optimal(X, 3)
    with pytest.raises(InfeasibleError):
        brute_force_optimal(X[:2], 3)
    with pytest.raises(ParameterError):
        brute_force_optimal(X[:5], 2, "center", EUCLIDEAN)
