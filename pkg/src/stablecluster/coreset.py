"""Multiplicative coresets and exhaustive center selection over them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .clustering import Clustering, canonical_labels, clustering_from_labels
from .errors import BudgetError, ParameterError
from .geometry import EUCLIDEAN, MetricSpec, Objective, aggregate, as_points, pairwise
from .one_clustering import one_cluster_cost
from .seeding import gonzalez_kcenter

__all__ = [
    "Coreset",
    "build_multiplicative_coreset",
    "check_multiplicative_property",
    "gonzalez_kcenter",
    "solve_via_coreset",
]

DEFAULT_BUDGET = 200_000
SUBSET_LIMIT = 10_000_000
# distinct induced partitions re-scored with their exact clustering cost
RESCORE = 64


@dataclass(frozen=True)
class Coreset:
    indices: np.ndarray
    epsilon: float
    provenance: Tuple[Tuple[int, int, int], ...]  # (recursion level, seed index, ring)

    def __len__(self) -> int:
        return int(self.indices.size)


def _snap_level(P, ids, k, eps, m, level, picked, prov):
    centers, R = gonzalez_kcenter(P[ids], k, m)
    if R == 0.0:
        _, first = np.unique(P[ids], axis=0, return_index=True)
        for j in first:
            if ids[j] not in picked:
                picked[ids[j]] = None
                prov.append((level, int(ids[centers[0]]), 0))
        return None
    D = pairwise(P[ids], P[ids[centers]], m)
    near = np.argmin(D, axis=1)
    dist = D[np.arange(ids.size), near]
    r0 = 0.5 * eps * R
    ring = np.zeros(ids.size, dtype=np.int64)
    out = dist > r0
    ring[out] = np.ceil(np.log2(dist[out] / r0)).astype(np.int64)
    width = eps * r0 * np.exp2(ring) / (2.0 * math.sqrt(P.shape[1]))
    rel = P[ids] - P[ids[centers]][near]
    cell = np.floor(rel / width[:, None]).astype(np.int64)
    keys = np.column_stack([near, ring, cell])
    _, first = np.unique(keys, axis=0, return_index=True)  # ids ascending: lowest index per cell
    for j in np.sort(first):
        if ids[j] not in picked:
            picked[ids[j]] = None
            prov.append((level, int(ids[centers[near[j]]]), int(ring[j])))
    counts = np.bincount(near, minlength=k)
    return ids[near != int(np.argmax(counts))]


def build_multiplicative_coreset(
    X, k: int, eps: float = 1.0, m: MetricSpec = EUCLIDEAN, budget: int = DEFAULT_BUDGET
) -> Coreset:
    """Grid-snapped exponential rings around farthest-point seeds, recursing on k-1.

    Each level keeps the lowest-index point of every nonempty grid cell, with
    cells of width proportional to ``eps`` times the ring radius, then drops
    the most populous seed's cluster and repeats with one fewer seed.
    """
    P = as_points(X)
    n = P.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must lie in [1, n]; got k={k}, n={n}")
    if not eps > 0:
        raise ParameterError("eps must be positive")
    picked: dict = {}
    prov: List[Tuple[int, int, int]] = []
    ids = np.arange(n)
    for level in range(k):
        if ids.size == 0:
            break
        ids = _snap_level(P, ids, min(k - level, ids.size), eps, m, level, picked, prov)
        if len(picked) > budget:
            raise BudgetError(
                f"coreset exceeded its budget of {budget} points",
                size=len(picked), budget=budget, level=level, k=k, eps=eps,
            )
        if ids is None:
            break
    order = np.argsort(np.fromiter(picked, dtype=np.int64), kind="stable")
    indices = np.fromiter(picked, dtype=np.int64)[order]
    return Coreset(indices, float(eps), tuple(prov[i] for i in order))


def _discrete_radius(P: np.ndarray, m: MetricSpec) -> Tuple[int, float]:
    D = pairwise(P, P, m)
    far = D.max(axis=1)
    j = int(np.argmin(far))
    return j, float(far[j])


def check_multiplicative_property(X, Q, k: int, eps: float, m: MetricSpec = EUCLIDEAN,
                                  trials: int = 100, seed: int = 0) -> dict:
    """Sample random k-clusterings of the coreset and test ``X ⊆ ∪ B(c_i, (1+eps) r_i)``.

    Cluster centers are the members minimizing the cluster radius.  Returns
    the number of failing samples and the worst uncovered ratio.
    """
    P = as_points(X)
    Qi = np.asarray(Q.indices if isinstance(Q, Coreset) else Q, dtype=np.int64)
    rng = np.random.default_rng(seed)
    failures, worst = 0, 0.0
    kk = min(k, Qi.size)
    for _ in range(trials):
        labels = rng.integers(kk, size=Qi.size)
        labels[rng.permutation(Qi.size)[:kk]] = np.arange(kk)
        reach = np.full(P.shape[0], np.inf)
        for c in range(kk):
            members = Qi[labels == c]
            j, r = _discrete_radius(P[members], m)
            d = pairwise(P, P[members[j]][None], m)[:, 0]
            ratio = np.where(d <= (1 + eps) * r, 0.0, np.where(r > 0, d / np.maximum(r, 1e-300), np.inf))
            reach = np.minimum(reach, ratio)
        bad = reach > 0
        if bad.any():
            failures += 1
            worst = max(worst, float(reach[bad].max()))
    return {"trials": trials, "failures": failures, "worst_ratio": worst}


def _pair_costs(P, Q, objective: Objective, m: MetricSpec) -> np.ndarray:
    if objective is Objective.MEANS:
        diff = P[:, None, :] - Q[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)
    return pairwise(P, Q, m)


def partition_cost(P, labels, objective, m: MetricSpec) -> float:
    objective = Objective(objective)
    vals = [one_cluster_cost(P[labels == c], objective, m)[0] for c in np.unique(labels)]
    return aggregate(np.array(vals), objective)


def solve_via_coreset(
    X,
    k: int,
    objective="means",
    m: MetricSpec = EUCLIDEAN,
    eps: float = 1.0,
    budget: int = DEFAULT_BUDGET,
    subset_limit: int = SUBSET_LIMIT,
) -> Clustering:
    """Try every k-subset of the coreset as centers and keep the cheapest induced partition.

    Subsets are scored by the cost of serving X from the chosen points; the
    best few distinct partitions are then re-scored with their optimal
    per-cluster centers before the winner is returned.
    """
    P = as_points(X)
    objective = Objective(objective)
    if objective is Objective.CENTER and not m.is_polyhedral:
        raise ParameterError("the center objective needs an L1 or polyhedral metric")
    core = build_multiplicative_coreset(P, k, eps, m, budget)
    q = len(core)
    if q < k:
        raise ParameterError(f"coreset has {q} points, fewer than k={k}")
    total = math.comb(q, k)
    if total > subset_limit:
        raise BudgetError(
            f"{total} center subsets exceed the limit of {subset_limit}",
            coreset_size=q, k=k, subsets=total, limit=subset_limit,
        )
    C = _pair_costs(P, P[core.indices], objective, m)
    n = P.shape[0]
    batch = max(1, 4_000_000 // max(1, n * k))
    combos = itertools.combinations(range(q), k)
    keep_cost = np.zeros(0)
    keep_sub = np.zeros((0, k), dtype=np.int64)
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            break
        B = np.array(chunk, dtype=np.int64)
        served = C[:, B].min(axis=2)  # (n, b)
        cost = served.max(axis=0) if objective is Objective.CENTER else served.sum(axis=0)
        keep_cost = np.concatenate([keep_cost, cost])
        keep_sub = np.concatenate([keep_sub, B])
        if keep_cost.size > 8 * RESCORE:
            top = np.argsort(keep_cost, kind="stable")[: 4 * RESCORE]
            top.sort()  # preserve enumeration order among ties
            keep_cost, keep_sub = keep_cost[top], keep_sub[top]
    order = np.argsort(keep_cost, kind="stable")
    seen, best = set(), None
    for t in order:
        labels = canonical_labels(np.argmin(C[:, keep_sub[t]], axis=1))
        key = labels.tobytes()
        if key in seen:
            continue
        seen.add(key)
        if np.unique(labels).size == k:
            exact = partition_cost(P, labels, objective, m)
            if best is None or exact < best[0]:
                best = (exact, labels)
        if len(seen) >= RESCORE:
            break
    if best is None:
        raise ParameterError("no center subset induces k nonempty clusters")
    result = clustering_from_labels(P, best[1], objective, m)
    result.extra = {"coreset_size": q, "subsets_evaluated": total}
    return result
