"""Acceptance criteria, one test per criterion.

Each check records a PASS/FAIL (or WARN for the soft timing criterion) line
that is printed in the pytest terminal summary.  Running this file directly
executes every check and prints the same lines.
"""

import math
import time
import warnings

import numpy as np
import pytest

from stablecluster.clustering import same_partition
from stablecluster.coreset import build_multiplicative_coreset, solve_via_coreset
from stablecluster.dp import solve_dp
from stablecluster.geometry import EUCLIDEAN, L1, MetricSpec, Objective, paired_distances
from stablecluster.l1_subdivision import RangeIndex
from stablecluster.local_search import local_search_kmedian, swap_cost_accelerated, swap_cost_naive
from stablecluster.mst import build_merge_tree, minimum_spanning_tree
from stablecluster.oracle import brute_force_optimal
from stablecluster.stability import SQRT3_THRESHOLD, generate_stable_instance, perturbation_trial, spread

RESULTS = {}
MARGIN_ALPHA = SQRT3_THRESHOLD + 0.3
# median and center are solved in a polyhedral norm whose slack keeps the margin above the threshold
POLY_EPS = 0.05
INSERTION_LOG = []  # (n, insertions) for every DP run made by this module


def record(number, title, passed, detail, soft=False):
    status = "PASS" if passed else ("WARN" if soft else "FAIL")
    RESULTS[number] = f"criterion {number} [{status}] {title}: {detail}"
    return passed


def metric_for(objective, d):
    return EUCLIDEAN if objective is Objective.MEANS else MetricSpec.polyhedral(d, POLY_EPS)


def logged_dp(X, k, objective, m):
    result, table = solve_dp(X, k, objective, m)
    INSERTION_LOG.append((X.shape[0], table.insertions))
    return result, table


def small_instance(rng, alpha, d, n_max=14, k_max=4):
    k = int(rng.integers(2, k_max + 1))
    n = int(rng.integers(max(k + 2, 6), n_max + 1))
    return generate_stable_instance(k, n, d, alpha, seed=int(rng.integers(2**31)))


def test_dp_matches_oracle():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    failures, worst = [], 0.0
    for i in range(200):
        d = 2 if i % 2 == 0 else 3
        inst = small_instance(rng, MARGIN_ALPHA, d)
        for objective in Objective:
            m = metric_for(objective, d)
            got, _ = logged_dp(inst.points, inst.k, objective, m)
            want = brute_force_optimal(inst.points, inst.k, objective, m)
            rel = abs(got.total_cost - want.total_cost) / max(abs(want.total_cost), 1e-300)
            worst = max(worst, rel)
            if not same_partition(got.labels, want.labels) or rel > 1e-9:
                failures.append((i, objective.value))
    elapsed = time.perf_counter() - t0
    ok = record(1, "DP equals oracle", not failures and elapsed < 60,
                f"600 solves, {len(failures)} mismatches, worst rel cost gap {worst:.2e}, {elapsed:.1f}s")
    assert ok, failures[:10]


def test_local_search_matches_oracle():
    rng = np.random.default_rng(2)
    failures = []
    for i in range(200):
        inst = small_instance(rng, 5.5 + float(rng.random()), 2)
        want = brute_force_optimal(inst.points, inst.k, "median", L1)
        for engine in ("naive", "accelerated"):
            got, _ = local_search_kmedian(inst.points, inst.k, L1, seed=i, engine=engine)
            if not same_partition(got.labels, want.labels):
                failures.append((i, engine))
    ok = record(2, "local search equals oracle", not failures, f"400 runs, {len(failures)} failures")
    assert ok, failures[:10]


def test_engine_cross_check():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst, zero_cases = 0.0, 0
    for _ in range(100):
        n = int(rng.integers(20, 2001))
        X = rng.random((n, 2)) * rng.choice([1.0, 100.0, 1e4])
        if rng.random() < 0.3:
            X = np.round(X)  # coincident coordinates and 45-degree ties
        idx = RangeIndex(X)
        for _ in range(10):
            k = int(rng.integers(1, min(20, n) + 1))
            S = rng.choice(n, k, replace=False)
            a, b = swap_cost_accelerated(idx, X, S), swap_cost_naive(X, S)
            if b > 0:
                worst = max(worst, abs(a - b) / b)
            else:
                # every point sits on a center: no relative scale, so compare with the input's spread
                zero_cases += 1
                worst = max(worst, abs(a) / np.abs(X - X.mean(axis=0)).sum())
    elapsed = time.perf_counter() - t0
    ok = record(3, "accelerated equals naive swap cost", worst <= 1e-9 and elapsed < 120,
                f"1000 pairs ({zero_cases} with zero cost), max rel error {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_metric_sandwich():
    rng = np.random.default_rng(4)
    violations = 0
    for eps in (0.01, 0.1):
        for d in (2, 3):
            m = MetricSpec.polyhedral(d, eps)
            P = rng.normal(size=(100_000, d)) * rng.lognormal(size=(100_000, 1))
            Q = rng.normal(size=(100_000, d)) * rng.lognormal(size=(100_000, 1))
            e = np.linalg.norm(P - Q, axis=1)
            poly = paired_distances(P, Q, m)
            violations += int((poly < e).sum() + (poly > (1 + eps) * e).sum())
    ok = record(4, "polyhedral sandwich", violations == 0, f"4 x 1e5 pairs, {violations} violations")
    assert ok


def test_mst_root_split():
    rng = np.random.default_rng(5)
    violations = 0
    for i in range(500):
        k = int(rng.integers(2, 7))
        n = int(rng.integers(k, 200))
        d = int(rng.choice([2, 3]))
        inst = generate_stable_instance(k, n, d, SQRT3_THRESHOLD + float(rng.random()) * 3, seed=i)
        R = build_merge_tree(minimum_spanning_tree(inst.points))
        a, b, _ = R.split_edge[R.root]
        side = np.zeros(n, dtype=bool)
        side[R.members(R.children(R.root)[0])] = True
        split = any(0 < side[inst.labels == c].sum() < (inst.labels == c).sum() for c in range(k))
        violations += int(inst.labels[a] == inst.labels[b] or split)
    ok = record(5, "root split separates clusters", violations == 0, f"500 instances, {violations} violations")
    assert ok


def test_coreset_covering():
    rng = np.random.default_rng(6)
    missed, mismatched = 0, 0
    objectives = list(Objective)
    t0 = time.perf_counter()
    for i in range(100):
        k = int(rng.integers(2, 4))
        n = int(rng.integers(20, 121))
        inst = generate_stable_instance(k, n, 2, MARGIN_ALPHA, seed=1000 + i)
        objective = objectives[i % 3]
        m = metric_for(objective, 2)
        Q = build_multiplicative_coreset(inst.points, k, eps=1.0, m=m)
        missed += int(len(set(inst.labels[Q.indices])) < k)
        a = solve_via_coreset(inst.points, k, objective, m, eps=1.0)
        b, _ = logged_dp(inst.points, k, objective, m)
        mismatched += int(not same_partition(a.labels, b.labels))
    ok = record(6, "coreset covers clusters and matches DP", missed == 0 and mismatched == 0,
                f"100 instances, {missed} uncovered, {mismatched} partition mismatches, "
                f"{time.perf_counter() - t0:.1f}s")
    assert ok


def test_perturbation_falsification():
    rng = np.random.default_rng(7)
    failures = 0
    for i in range(50):
        k = int(rng.integers(2, 4))
        n = int(rng.integers(k + 3, 13))
        alpha = float(rng.choice([MARGIN_ALPHA, 5.0, 6.0]))
        inst = generate_stable_instance(k, n, 2, alpha, seed=2000 + i)
        assert inst.certificate["passed"]
        report = perturbation_trial(inst, alpha=alpha, trials=100, rng=i)
        failures += report["failures"]
    ok = record(7, "perturbations keep the optimum", failures == 0, f"50 x 100 trials, {failures} changes")
    assert ok


def test_scaling_benchmark():
    from stablecluster.cli import run_dp_bench, run_iteration_check

    rows = run_dp_bench([10_000, 20_000, 40_000, 80_000], k=5, repeats=5, seed=0)
    INSERTION_LOG.extend((r["n"], r["insertions"]) for r in rows)
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    iters = run_iteration_check([250, 500, 1000], k=5, seed=0)
    timing_ok = max(ratios) <= 2.6
    iter_ok = all(r["within"] for r in iters)
    detail = (f"doubling ratios {', '.join(f'{x:.2f}' for x in ratios)}; "
              f"swaps {[r['iterations'] for r in iters]} vs bounds {[round(r['bound']) for r in iters]}")
    record(8, "near-linear scaling (soft)", timing_ok and iter_ok, detail, soft=True)
    if not (timing_ok and iter_ok):
        warnings.warn(f"soft scaling criterion missed: {detail}")


def test_insertion_accounting():
    rng = np.random.default_rng(9)
    for _ in range(30):
        n = int(rng.integers(2, 3000))
        shape = rng.integers(3)
        if shape == 0:
            X = rng.random((n, 2))
        elif shape == 1:  # chain with growing gaps: the most unbalanced merge tree
            X = np.column_stack([np.cumsum(1.0 + np.arange(n) * 1e-3), np.zeros(n)])
        else:
            X = generate_stable_instance(5 if n >= 5 else 1, n, 2, 6.0, seed=int(rng.integers(1000))).points
        logged_dp(X, min(5, n), Objective.MEANS, EUCLIDEAN)
    bad = [(n, c) for n, c in INSERTION_LOG if n > 1 and c > n * math.ceil(math.log2(n))]
    ok = record(9, "small-to-large insertions", not bad,
                f"{len(INSERTION_LOG)} DP runs, {len(bad)} over n*ceil(log2 n)")
    assert ok, bad[:5]


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                pass
    for number in sorted(RESULTS):
        print(RESULTS[number])
