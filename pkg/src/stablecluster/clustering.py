"""The k-clustering result shared by all solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .errors import ParameterError
from .geometry import MetricSpec, Objective, aggregate, as_points
from .one_clustering import member_costs, one_cluster_cost


def canonical_labels(labels) -> np.ndarray:
    """Relabel so cluster ids appear in order of their lowest point index."""
    labels = np.asarray(labels, dtype=np.int64)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inv.reshape(-1)]


def same_partition(a, b) -> bool:
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and bool(np.array_equal(canonical_labels(a), canonical_labels(b)))


@dataclass
class Clustering:
    labels: np.ndarray
    centers: np.ndarray
    objective: Objective
    metric: MetricSpec
    total_cost: float
    per_cluster_cost: List[float]
    stability_certified: bool = False
    timings: Dict[str, float] = field(default_factory=dict)
    extra: Dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])

    def clusters(self) -> List[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.k)]

    def recompute_cost(self, X) -> float:
        """Cost of assigning each point to its own label's center."""
        P = as_points(X)
        vals = [
            aggregate(member_costs(P[idx], self.centers[c], self.objective, self.metric), self.objective)
            for c, idx in enumerate(self.clusters())
        ]
        return aggregate(np.array(vals), self.objective)

    def to_json(self, algorithm: str, include_timings: bool = True) -> dict:
        out = {
            "algorithm": algorithm,
            "objective": self.objective.value,
            "metric": self.metric.describe(),
            "k": self.k,
            "total_cost": float(self.total_cost),
            "centers": [[float(v) for v in c] for c in self.centers],
            "labels": [int(v) for v in self.labels],
        }
        if include_timings:
            out["timings"] = {name: float(v) for name, v in self.timings.items()}
        out["stability_certified"] = bool(self.stability_certified)
        out.update(self.extra)
        return out


def clustering_from_labels(X, labels, objective, m: MetricSpec, certified: bool = False) -> Clustering:
    """Build a Clustering from a partition, choosing each cluster's optimal center."""
    P = as_points(X)
    objective = Objective(objective)
    labels = canonical_labels(labels)
    if labels.shape[0] != P.shape[0]:
        raise ParameterError("labels and points differ in length")
    k = int(labels.max()) + 1 if labels.size else 0
    centers, costs = [], []
    for c in range(k):
        cost, center = one_cluster_cost(P[labels == c], objective, m)
        centers.append(center)
        costs.append(cost)
    total = aggregate(np.array(costs), objective)
    return Clustering(labels, np.array(centers), objective, m, total, costs, certified)
