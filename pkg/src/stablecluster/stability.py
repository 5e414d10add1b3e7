"""Certified stable instances, stability-derived property checks and perturbation trials."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .clustering import Clustering, same_partition
from .errors import InfeasibleError, ParameterError
from .geometry import (
    EUCLIDEAN,
    MetricKind,
    MetricSpec,
    Objective,
    as_points,
    paired_distances,
    pairwise,
    read_points_csv,
    write_points_csv,
)
from .one_clustering import member_costs
from .oracle import brute_force_optimal

SQRT3_THRESHOLD = 2.0 + math.sqrt(3.0)
SQRT5_THRESHOLD = 2.0 + math.sqrt(5.0)
MAX_ATTEMPTS = 100


def separation_factor(alpha: float) -> float:
    """Minimum site spacing, in units of the cluster radius."""
    return 2.0 * (alpha + 1.0)


def _row_chunk(n: int) -> int:
    return max(1, 2_000_000 // max(1, n))


def _hull_vertices(P: np.ndarray) -> np.ndarray:
    """Indices of a superset of the extreme points; the farthest point from anywhere is one of them."""
    n, d = P.shape
    if d == 1:
        return np.unique([int(np.argmin(P[:, 0])), int(np.argmax(P[:, 0]))])
    if n <= d + 1:
        return np.arange(n)
    try:
        return np.asarray(ConvexHull(P).vertices)
    except QhullError:  # flat or degenerate sets
        return np.arange(n)


def _nearest_other(A: np.ndarray, B: np.ndarray, m: MetricSpec) -> np.ndarray:
    """Distance from each row of A to its nearest row of B."""
    if m.kind in (MetricKind.EUCLIDEAN, MetricKind.L1):
        _, j = cKDTree(B).query(A, p=2 if m.kind is MetricKind.EUCLIDEAN else 1)
        return paired_distances(A, B[j], m)
    out = np.empty(A.shape[0])
    step = _row_chunk(B.shape[0])
    for s in range(0, A.shape[0], step):
        out[s:s + step] = pairwise(A[s:s + step], B, m).min(axis=1)
    return out


def _farthest_in(A: np.ndarray, B: np.ndarray, m: MetricSpec) -> np.ndarray:
    """Distance from each row of A to its farthest row of B."""
    H = B[_hull_vertices(B)]
    out = np.empty(A.shape[0])
    step = _row_chunk(H.shape[0])
    for s in range(0, A.shape[0], step):
        out[s:s + step] = pairwise(A[s:s + step], H, m).max(axis=1)
    return out


def spread(X, m: MetricSpec = EUCLIDEAN) -> float:
    """Largest over smallest nonzero pairwise distance."""
    P = as_points(X)
    if P.shape[0] < 2:
        raise ParameterError("spread needs at least two points")
    U = np.unique(P, axis=0)
    if U.shape[0] < 2:
        raise ParameterError("spread is undefined: all points coincide")
    H = U[_hull_vertices(U)]
    far = float(pairwise(H, H, m).max())
    near = 0.0
    if m.kind in (MetricKind.EUCLIDEAN, MetricKind.L1):
        _, j = cKDTree(U).query(U, k=2, p=2 if m.kind is MetricKind.EUCLIDEAN else 1)
        near = float(paired_distances(U, U[j[:, 1]], m).min())
    if near == 0.0:  # polyhedral metrics, or gaps that underflow to zero
        near = math.inf
        step = _row_chunk(U.shape[0])
        for s in range(0, U.shape[0], step):
            D = pairwise(U[s:s + step], U, m)
            D[D == 0] = np.inf
            near = min(near, float(D.min()))
    if not math.isfinite(near):
        raise ParameterError("spread is undefined: no positive distance")
    return far / near


def duplicate_pairs(X) -> int:
    P = as_points(X)
    _, counts = np.unique(P, axis=0, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def _centers_of(X, labels, centers):
    P = as_points(X)
    labels = np.asarray(labels, dtype=np.int64)
    C = np.asarray(centers, dtype=np.float64)
    if labels.shape[0] != P.shape[0] or labels.min() < 0 or labels.max() >= C.shape[0]:
        raise ParameterError("labels do not match the centers")
    return P, labels, C


def verify_center_proximity(X, labels, centers, alpha: float, m: MetricSpec = EUCLIDEAN) -> dict:
    """Check ``alpha * d(p, own center) < d(p, other center)`` for every point.

    ``certified_alpha`` is the smallest ratio ``d(p, c_j) / d(p, c_i)``; a
    point sitting on a foreign center counts as a violation.
    """
    P, labels, C = _centers_of(X, labels, centers)
    k = C.shape[0]
    if k == 1:
        return {"passed": True, "certified_alpha": math.inf, "violations": 0}
    D = pairwise(P, C, m)
    own = D[np.arange(P.shape[0]), labels]
    other = D.copy()
    other[np.arange(P.shape[0]), labels] = np.inf
    foreign = other.min(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(own > 0, foreign / np.where(own > 0, own, 1.0), np.where(foreign > 0, np.inf, 0.0))
    violations = int((~(alpha * own < foreign)).sum())
    return {"passed": violations == 0, "certified_alpha": float(ratio.min()), "violations": violations}


def _margin(rhs: np.ndarray, lhs: np.ndarray) -> float:
    """Smallest ``rhs / lhs`` (inf when every lhs is zero); > 1 means the strict inequality held."""
    rhs, lhs = np.asarray(rhs, float), np.asarray(lhs, float)
    if lhs.size == 0:
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(lhs > 0, rhs / np.where(lhs > 0, lhs, 1.0), np.where(rhs > 0, np.inf, 1.0))
    return float(r.min())


def verify_separation(X, labels, centers, alpha: float, m: MetricSpec = EUCLIDEAN) -> dict:
    """Exhaustively evaluate the five center-proximity consequences and the strict-separation forms.

    For ``p, p', p''`` in a cluster with center ``c1`` and ``q`` outside it with center ``c2``:

    1. ``(a-1) d(p,c1) < d(p,q)``
    2. ``(a-1) d(p,c1) < d(c1,c2)``
    3. ``(a-1) d(c1,c2) < (a+1) d(p,q)``
    4. ``(a-1) d(p,p') < 2a/(a-1) d(p,q)``
    5. ``(a-1) d(p',p'') < 2(a+1)/(a-1) d(p,q)``

    plus ``d(p,p') < d(p,q)`` (applies from 2+sqrt3), ``d(p',p'') < d(p,q)``
    (from 2+sqrt5) and ``d(p,p') <= d(p'',q)``.  The extremes are exact:
    farthest same-cluster points are searched among hull vertices and nearest
    foreign points by k-d tree (Euclidean, L1) or chunked scans.
    """
    P, labels, C = _centers_of(X, labels, centers)
    n, k = P.shape[0], C.shape[0]
    a = float(alpha)
    if a <= 1:
        raise ParameterError("alpha must exceed 1")
    ecc = np.zeros(n)  # max distance to a same-cluster point
    out = np.full(n, np.inf)  # min distance to a foreign point
    cross = np.full((k, k), np.inf)  # min distance between clusters
    groups = [np.flatnonzero(labels == i) for i in range(k)]
    for i, gi in enumerate(groups):
        if gi.size == 0:
            continue
        ecc[gi] = _farthest_in(P[gi], P[gi], m)
        for j, gj in enumerate(groups):
            if j != i and gj.size:
                near = _nearest_other(P[gi], P[gj], m)
                cross[i, j] = near.min()
                out[gi] = np.minimum(out[gi], near)
    dc = pairwise(P, C, m)
    own = dc[np.arange(n), labels]
    cc = pairwise(C, C, m)
    diam = np.array([ecc[labels == i].max() if (labels == i).any() else 0.0 for i in range(k)])
    out_min = np.array([out[labels == i].min() if (labels == i).any() else np.inf for i in range(k)])
    cc_min = np.array([np.min(np.delete(cc[i], i)) if k > 1 else np.inf for i in range(k)])
    off = ~np.eye(k, dtype=bool)
    b = a - 1.0
    props = {
        "p1": _margin(out, b * own),
        "p2": _margin(cc_min[labels], b * own),
        "p3": _margin((a + 1.0) * cross[off], b * cc[off]),
        "p4": _margin(2 * a / b * out, b * ecc),
        "p5": _margin(2 * (a + 1.0) / b * out_min, b * diam),
    }
    report: Dict[str, dict] = {name: {"margin": v, "passed": v > 1.0} for name, v in props.items()}
    report["p4_threshold"] = {
        "applies": a >= SQRT3_THRESHOLD, "margin": _margin(out, ecc), "passed": _margin(out, ecc) > 1.0,
    }
    report["p5_threshold"] = {
        "applies": a >= SQRT5_THRESHOLD, "margin": _margin(out_min, diam),
        "passed": _margin(out_min, diam) > 1.0,
    }
    sep = _margin(out_min, diam)
    report["strict_separation"] = {"applies": a >= SQRT3_THRESHOLD, "margin": sep, "passed": sep >= 1.0}
    if k == 1:
        for v in report.values():
            v["passed"] = True
    passed = all(v["passed"] for name, v in report.items() if v.get("applies", True))
    return {"passed": passed, "properties": report}


@dataclass
class StableInstance:
    points: np.ndarray
    labels: np.ndarray
    centers: np.ndarray
    alpha_target: float
    certificate: dict
    spread: float
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])

    @property
    def ground_truth(self) -> Clustering:
        costs = [
            float(member_costs(self.points[self.labels == c], self.centers[c], Objective.MEDIAN, EUCLIDEAN).sum())
            for c in range(self.k)
        ]
        return Clustering(self.labels.copy(), self.centers.copy(), Objective.MEDIAN, EUCLIDEAN, sum(costs), costs)

    def sidecar(self) -> dict:
        return {
            "labels": [int(v) for v in self.labels],
            "centers": [[float(x) for x in c] for c in self.centers],
            "alpha_target": float(self.alpha_target),
            "certificate": self.certificate,
            "spread": float(self.spread),
            "seed": self.seed,
        }

    def save(self, csv_path, json_path=None) -> Path:
        csv_path = Path(csv_path)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        write_points_csv(csv_path, self.points)
        json_path.write_text(json.dumps(_jsonable(self.sidecar()), indent=2) + "\n")
        return json_path

    @classmethod
    def load(cls, csv_path, json_path=None) -> "StableInstance":
        csv_path = Path(csv_path)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        side = json.loads(json_path.read_text())
        return cls(
            read_points_csv(csv_path),
            np.asarray(side["labels"], dtype=np.int64),
            np.asarray(side["centers"], dtype=np.float64),
            float(side["alpha_target"]),
            side.get("certificate", {}),
            float(side.get("spread", float("nan"))),
            side.get("seed"),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _uniform_ball(rng, count: int, d: int) -> np.ndarray:
    v = rng.normal(size=(count, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.random(count)[:, None] ** (1.0 / d)


def _place_sites(rng, k: int, d: int, spacing: float) -> np.ndarray:
    side = spacing * max(1.0, k ** (1.0 / d)) * 2.0
    sites = []
    tries = 0
    while len(sites) < k:
        cand = rng.random(d) * side
        if all(np.linalg.norm(cand - s) >= spacing for s in sites):
            sites.append(cand)
        tries += 1
        if tries > 1000 * k:
            side *= 1.5
            tries = 0
    return np.array(sites)


def certify(X, labels, centers, alpha: float, m: MetricSpec = EUCLIDEAN) -> dict:
    prox = verify_center_proximity(X, labels, centers, alpha, m)
    sep = verify_separation(X, labels, centers, alpha, m)
    return {
        "metric": m.describe(),
        "alpha": float(alpha),
        "passed": bool(prox["passed"] and sep["passed"]),
        "center_proximity": prox,
        "separation": sep,
    }


def generate_stable_instance(
    k: int,
    n: int,
    d: int = 2,
    alpha: float = 6.0,
    seed: Optional[int] = None,
    geometry: str = "random_balls",
) -> StableInstance:
    """Points uniform in unit balls whose centers are at least ``2 (alpha + 1)`` apart.

    Every cluster gets at least one point.  The sample is re-drawn until the
    center-proximity and separation checks both pass at ``alpha``.
    """
    if geometry != "random_balls":
        raise ParameterError(f"unknown geometry {geometry!r}")
    if k < 1 or n < k:
        raise ParameterError(f"need 1 <= k <= n; got k={k}, n={n}")
    if d < 1:
        raise ParameterError("d must be positive")
    if not alpha > 1:
        raise ParameterError("alpha must exceed 1")
    rng = np.random.default_rng(seed)
    spacing = separation_factor(alpha)
    for attempt in range(MAX_ATTEMPTS):
        sites = _place_sites(rng, k, d, spacing)
        labels = np.concatenate([np.arange(k), rng.integers(k, size=n - k)])
        rng.shuffle(labels)
        X = sites[labels] + _uniform_ball(rng, n, d)
        cert = certify(X, labels, sites, alpha)
        if cert["passed"] and (n < 2 or np.unique(X, axis=0).shape[0] > 1):
            cert["attempts"] = attempt + 1
            Xr = as_points(X)
            sp = spread(Xr) if n >= 2 else 1.0
            return StableInstance(Xr, labels.astype(np.int64), sites, float(alpha), cert, sp, seed)
    raise InfeasibleError(f"no certified instance after {MAX_ATTEMPTS} attempts")


def perturbed_distances(X, alpha: float, m: MetricSpec = EUCLIDEAN, rng=None,
                        multipliers: Optional[np.ndarray] = None) -> np.ndarray:
    """``d~(p, q) = w_pq d(p, q)`` with independent ``w_pq`` uniform in ``[1, alpha]`` per ordered pair."""
    P = as_points(X)
    D = pairwise(P, P, m)
    if multipliers is None:
        rng = np.random.default_rng(rng)
        multipliers = rng.uniform(1.0, alpha, size=D.shape)
    W = np.asarray(multipliers, dtype=np.float64)
    if W.shape != D.shape or W.min() < 1.0 or W.max() > alpha:
        raise ParameterError("multipliers must be an n x n table within [1, alpha]")
    return D * W


def structured_multipliers(labels, alpha: float) -> np.ndarray:
    """Intra-cluster pairs keep their distance, inter-cluster pairs are stretched by alpha."""
    labels = np.asarray(labels)
    return np.where(labels[:, None] == labels[None, :], 1.0, float(alpha))


def perturbation_trial(
    inst: StableInstance,
    alpha: Optional[float] = None,
    trials: int = 100,
    rng=None,
    objective="median",
    m: MetricSpec = EUCLIDEAN,
) -> dict:
    """Compare the oracle partition under random perturbations against the unperturbed one."""
    P = inst.points
    alpha = inst.alpha_target if alpha is None else float(alpha)
    rng = np.random.default_rng(rng)
    k = inst.k
    base_D = pairwise(P, P, m)
    reference = brute_force_optimal(P, k, objective, m, distances=base_D)
    failures = []
    for t in range(trials):
        Dt = perturbed_distances(P, alpha, m, rng)
        got = brute_force_optimal(P, k, objective, m, distances=Dt)
        if not same_partition(got.labels, reference.labels):
            failures.append(t)
    return {
        "alpha": alpha,
        "trials": trials,
        "failures": len(failures),
        "failed_trials": failures,
        "reference_labels": [int(v) for v in reference.labels],
    }
