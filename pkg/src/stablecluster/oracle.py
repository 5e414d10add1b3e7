"""Exact brute-force optimal clustering for small instances."""

from __future__ import annotations

import itertools
import math
from typing import Optional

import numpy as np

from .clustering import Clustering, canonical_labels, clustering_from_labels
from .errors import BudgetError, InfeasibleError, ParameterError
from .geometry import EUCLIDEAN, MetricSpec, Objective, aggregate, as_points, pairwise
from .one_clustering import one_cluster_cost
from .seeding import gonzalez_kcenter

PARTITION_MAX_N = 14
PARTITION_MAX_K = 4
CENTER_SUBSETS_MAX = 1_000_000
TIE_RTOL = 1e-12


def _tied(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_RTOL * (1.0 + abs(b))


class _Scorer:
    """Partial-cluster lower bounds and exact cluster costs for one objective.

    With a distance matrix ``dist`` every objective uses discrete centers
    (members of the cluster) and the matrix entry ``dist[p, c]`` as the
    distance from point p to center c.
    """

    def __init__(self, P, objective: Objective, m: MetricSpec, dist: Optional[np.ndarray]):
        self.P = P
        self.objective = objective
        self.m = m
        self.discrete = dist is not None or objective is Objective.MEDIAN
        if self.discrete:
            D = dist if dist is not None else pairwise(P, P, m)
            self.C = D * D if objective is Objective.MEANS else D
        elif objective is Objective.CENTER:
            U = m.family(P.shape[1])
            self.proj = P @ U.T
        self._exact = {}

    # partial state per cluster: list of member ids
    def lower_bound(self, members) -> float:
        if len(members) <= 1:
            return 0.0
        idx = np.asarray(members)
        if self.discrete:
            rows = self.C[idx]
            agg = rows.max(axis=0) if self.objective is Objective.CENTER else rows.sum(axis=0)
            return float(agg.min())
        if self.objective is Objective.MEANS:
            Q = self.P[idx]
            return float(((Q - Q.mean(axis=0)) ** 2).sum())
        pr = self.proj[idx]
        return 0.5 * float((pr.max(axis=0) - pr.min(axis=0)).max())

    def exact(self, members) -> float:
        key = tuple(members)
        got = self._exact.get(key)
        if got is None:
            idx = np.asarray(members)
            if len(idx) == 1:
                got = 0.0
            elif self.discrete:
                sub = self.C[np.ix_(idx, idx)]
                agg = sub.max(axis=0) if self.objective is Objective.CENTER else sub.sum(axis=0)
                got = float(agg.min())
            else:
                got = one_cluster_cost(self.P[idx], self.objective, self.m)[0]
            self._exact[key] = got
        return got


def _partition_search(n: int, k: int, order: np.ndarray, scorer: _Scorer, objective: Objective,
                      upper: float = math.inf):
    center = objective is Objective.CENTER
    join = max if center else (lambda a, b: a + b)
    best = [upper, None, 0]  # cost, canonical labels, number of tied optima
    groups = [[] for _ in range(k)]
    lbs = [0.0] * k
    nodes = [0]

    def bound(used):
        acc = 0.0
        for j in range(used):
            acc = join(acc, lbs[j])
        return acc

    def visit(t: int, used: int):
        nodes[0] += 1
        if n - t < k - used:
            return
        if t == n:
            cost = 0.0
            for j in range(k):
                cost = join(cost, scorer.exact(sorted(groups[j])))
            labels = np.empty(n, dtype=np.int64)
            for j in range(k):
                labels[groups[j]] = j
            labels = canonical_labels(labels)
            if cost < best[0] and not _tied(cost, best[0]):
                best[:] = [cost, labels, 1]
            elif _tied(cost, best[0]):
                best[2] += 1
                if best[1] is None or tuple(labels) < tuple(best[1]):
                    best[0], best[1] = min(cost, best[0]), labels
            return
        p = int(order[t])
        for j in range(min(used + 1, k)):
            groups[j].append(p)
            old = lbs[j]
            lbs[j] = scorer.lower_bound(groups[j])
            lb = bound(max(used, j + 1))
            if not (lb > best[0] and not _tied(lb, best[0])):
                visit(t + 1, max(used, j + 1))
            lbs[j] = old
            groups[j].pop()

    visit(0, 0)
    return best, nodes[0]


def brute_force_optimal(
    X,
    k: int,
    objective="median",
    m: MetricSpec = EUCLIDEAN,
    mode: str = "partition",
    distances: Optional[np.ndarray] = None,
) -> Clustering:
    """Exact optimum by enumeration.

    ``mode="partition"`` searches all k-partitions (branch and bound, n <= 14,
    k <= 4); ``mode="centers"`` tries every k-subset of points as centers and
    scores the induced nearest-center partition.  ``distances`` replaces the
    metric by an arbitrary (possibly asymmetric) matrix, ``distances[p, c]``
    being the distance from point p to center c; centers are then discrete.
    The result carries ``extra["ties"]``, the number of optimal partitions
    found within a relative 1e-12 of the optimum.
    """
    P = as_points(X)
    n = P.shape[0]
    objective = Objective(objective)
    if k < 1:
        raise ParameterError("k must be at least 1")
    if k > n:
        raise InfeasibleError(f"k={k} exceeds n={n}")
    if distances is not None:
        distances = np.asarray(distances, dtype=np.float64)
        if distances.shape != (n, n):
            raise ParameterError("distance matrix must be n x n")
    elif objective is Objective.CENTER and not m.is_polyhedral:
        raise ParameterError("the center objective needs an L1 or polyhedral metric")
    scorer = _Scorer(P, objective, m, distances)
    if mode == "partition":
        if n > PARTITION_MAX_N or k > PARTITION_MAX_K:
            raise BudgetError(
                f"partition oracle limited to n <= {PARTITION_MAX_N}, k <= {PARTITION_MAX_K}",
                n=n, k=k,
            )
        order, _ = gonzalez_kcenter(P, n, EUCLIDEAN)
        # the partition around the first k traversal points seeds the bound
        seeds = order[:k]
        near = np.argmin(scorer.C[:, seeds] if scorer.discrete else pairwise(P, P[seeds], m), axis=1)
        upper = math.inf
        if np.unique(near).size == k:
            upper = aggregate([scorer.exact(list(np.flatnonzero(near == j))) for j in range(k)], objective)
        (cost, labels, ties), nodes = _partition_search(n, k, order, scorer, objective, upper)
    elif mode == "centers":
        total = math.comb(n, k)
        if total > CENTER_SUBSETS_MAX:
            raise BudgetError(f"{total} center subsets exceed {CENTER_SUBSETS_MAX}", n=n, k=k)
        cost, labels, ties, nodes = math.inf, None, 0, 0
        seen = set()
        for S in itertools.combinations(range(n), k):
            nodes += 1
            near = np.argmin(scorer.C[:, S] if scorer.discrete else pairwise(P, P[list(S)], m), axis=1)
            lab = canonical_labels(near)
            key = lab.tobytes()
            if key in seen or np.unique(lab).size < k:
                continue
            seen.add(key)
            c = aggregate([scorer.exact(list(np.flatnonzero(lab == j))) for j in range(k)], objective)
            if labels is None or (c < cost and not _tied(c, cost)):
                cost, labels, ties = c, lab, 1
            elif _tied(c, cost):
                ties += 1
                if tuple(lab) < tuple(labels):
                    cost, labels = min(c, cost), lab
    else:
        raise ParameterError(f"unknown oracle mode {mode!r}")
    if distances is None:
        result = clustering_from_labels(P, labels, objective, m)
    else:
        centers, costs = [], []
        for j in range(k):
            idx = np.flatnonzero(labels == j)
            sub = scorer.C[np.ix_(idx, idx)]
            agg = sub.max(axis=0) if objective is Objective.CENTER else sub.sum(axis=0)
            centers.append(P[idx[int(np.argmin(agg))]])
            costs.append(float(agg.min()))
        result = Clustering(labels, np.array(centers), objective, m, aggregate(costs, objective), costs)
    result.extra = {"ties": int(ties), "nodes": int(nodes), "oracle_cost": float(cost)}
    return result
