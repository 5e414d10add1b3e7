"""Points, distance functions and the polyhedral approximation of the Euclidean norm."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull

from .errors import ParameterError


class Objective(str, Enum):
    MEDIAN = "median"
    MEANS = "means"
    CENTER = "center"


class MetricKind(str, Enum):
    EUCLIDEAN = "euclidean"
    L1 = "l1"
    POLYHEDRAL = "polyhedral"


def as_points(X, dim: Optional[int] = None) -> np.ndarray:
    """Validate ``X`` as an ``(n, d)`` float64 array of finite coordinates."""
    P = np.array(X, dtype=np.float64)
    if P.ndim == 1:
        P = P.reshape(-1, 1) if dim == 1 else P.reshape(1, -1)
    if P.ndim != 2 or P.shape[1] < 1:
        raise ParameterError(f"expected an (n, d) array of points, got shape {P.shape}")
    if dim is not None and P.shape[1] != dim:
        raise ParameterError(f"dimension mismatch: expected {dim}, got {P.shape[1]}")
    if not np.all(np.isfinite(P)):
        raise ParameterError("point coordinates must be finite")
    P.setflags(write=False)
    return P


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Centrally symmetric direction family N defining ``max_u <p - q, u>``.

    Every vector has the same norm ``1 / coverage_cos``, so that the induced
    distance dominates the Euclidean one and exceeds it by at most ``1 + epsilon``.
    """

    directions: np.ndarray
    epsilon: float
    coverage_cos: float

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self) -> int:
        return self.directions.shape[0]


def _fibonacci_sphere(m: int) -> np.ndarray:
    i = np.arange(m, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / m
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _quasi_random_sphere(m: int, d: int) -> np.ndarray:
    from scipy.stats import norm, qmc

    u = qmc.Halton(d=d, scramble=False).random(m + 1)[1:]
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def coverage_cosine(unit_dirs: np.ndarray) -> float:
    """Exact ``min_v max_u <v, u>`` over unit vectors ``v`` for unit ``unit_dirs``.

    The minimum is the smallest distance from the origin to a facet of the
    convex hull of the directions (0 if the hull does not contain the origin).
    """
    d = unit_dirs.shape[1]
    if d == 1:
        return 1.0 if (unit_dirs.max() > 0 and unit_dirs.min() < 0) else 0.0
    hull = ConvexHull(unit_dirs)
    offsets = -hull.equations[:, -1]
    return float(max(0.0, offsets.min()))


def build_direction_set(d: int, epsilon: float) -> DirectionSet:
    if d < 1:
        raise ParameterError("dimension must be >= 1")
    if not (0.0 < epsilon <= 1.0):
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon}")
    target = 1.0 / (1.0 + epsilon)
    if d == 1:
        unit = np.array([[1.0], [-1.0]])
        c = 1.0
    elif d == 2:
        m = 4
        while math.cos(math.pi / m) < target:
            m += 2
        theta = 2.0 * math.pi * np.arange(m // 2) / m
        half = np.column_stack([np.cos(theta), np.sin(theta)])
        half[np.abs(half) < 1e-15] = 0.0
        unit = np.vstack([half, -half])  # exact central symmetry
        c = math.cos(math.pi / m)
    else:
        m = 2 * d + 2
        while True:
            base = _fibonacci_sphere(m) if d == 3 else _quasi_random_sphere(m, d)
            unit = np.unique(np.round(np.vstack([base, -base]), 15), axis=0)
            c = coverage_cosine(unit)
            if c >= target:
                break
            m = int(math.ceil(m * 1.25))
    dirs = unit / c
    dirs.setflags(write=False)
    return DirectionSet(directions=dirs, epsilon=float(epsilon), coverage_cos=float(c))


_L1_CACHE: dict = {}


def l1_directions(d: int) -> np.ndarray:
    """The 2^d sign vectors; ``|v|_1 = max_u <v, u>`` over them.

    For d = 2 they are ordered counter-clockwise starting at (1, 1).
    """
    if d not in _L1_CACHE:
        if d == 2:
            U = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
        else:
            grids = np.meshgrid(*([[-1.0, 1.0]] * d), indexing="ij")
            U = np.column_stack([g.ravel() for g in grids])
        U.setflags(write=False)
        _L1_CACHE[d] = U
    return _L1_CACHE[d]


@dataclass(frozen=True)
class MetricSpec:
    kind: MetricKind = MetricKind.EUCLIDEAN
    directions: Optional[DirectionSet] = field(default=None, compare=False)

    @classmethod
    def euclidean(cls) -> "MetricSpec":
        return cls(MetricKind.EUCLIDEAN)

    @classmethod
    def l1(cls) -> "MetricSpec":
        return cls(MetricKind.L1)

    @classmethod
    def polyhedral(cls, d: int, epsilon: float) -> "MetricSpec":
        return cls(MetricKind.POLYHEDRAL, build_direction_set(d, epsilon))

    @classmethod
    def from_directions(cls, directions) -> "MetricSpec":
        U = np.array(directions, dtype=np.float64)
        U.setflags(write=False)
        return cls(MetricKind.POLYHEDRAL, DirectionSet(U, epsilon=float("nan"), coverage_cos=float("nan")))

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if self.kind is MetricKind.POLYHEDRAL and self.directions is None:
            raise ParameterError("polyhedral metric needs a direction set")

    def family(self, d: int) -> np.ndarray:
        """Direction family whose max inner product realises the metric."""
        if self.kind is MetricKind.L1:
            return l1_directions(d)
        if self.kind is MetricKind.POLYHEDRAL:
            if self.directions.dim != d:
                raise ParameterError(f"direction set has dimension {self.directions.dim}, points have {d}")
            return self.directions.directions
        raise ParameterError("the Euclidean metric has no finite direction family")

    @property
    def is_polyhedral(self) -> bool:
        return self.kind is not MetricKind.EUCLIDEAN

    def describe(self) -> dict:
        out = {"kind": self.kind.value}
        if self.kind is MetricKind.POLYHEDRAL:
            out["epsilon"] = self.directions.epsilon
            out["directions"] = len(self.directions)
        return out

    def __str__(self) -> str:
        if self.kind is MetricKind.POLYHEDRAL:
            return f"polyhedral(eps={self.directions.epsilon:g}, |N|={len(self.directions)})"
        return self.kind.value


EUCLIDEAN = MetricSpec.euclidean()
L1 = MetricSpec.l1()


def resolve_metric(kind, d: int, epsilon: float = 0.05, alpha: Optional[float] = None) -> MetricSpec:
    """Turn a metric name into a MetricSpec.

    ``"auto"`` picks L1 in the plane when a certified stability ``alpha`` of at
    least ``(2 + sqrt 3) * sqrt 2`` is supplied, and the polyhedral metric otherwise.
    """
    if isinstance(kind, MetricSpec):
        return kind
    kind = str(kind).lower()
    if kind == "auto":
        if d == 2 and alpha is not None and alpha >= (2.0 + math.sqrt(3.0)) * math.sqrt(2.0):
            return L1
        return MetricSpec.polyhedral(d, epsilon)
    if kind == "polyhedral":
        return MetricSpec.polyhedral(d, epsilon)
    try:
        return MetricSpec(MetricKind(kind))
    except ValueError:
        raise ParameterError(f"unknown metric {kind!r}") from None


def objective_metric(objective: Objective, m: MetricSpec) -> MetricSpec:
    """k-means always works with Euclidean geometry; the others use ``m``."""
    return EUCLIDEAN if Objective(objective) is Objective.MEANS else m


def _check_pair(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ParameterError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return p, q


def distance(p, q, m: MetricSpec = EUCLIDEAN) -> float:
    p, q = _check_pair(p, q)
    v = p - q
    if m.kind is MetricKind.EUCLIDEAN:
        return float(math.sqrt(float(np.dot(v, v))))
    if m.kind is MetricKind.L1:
        return float(np.abs(v).sum())
    return float(max(0.0, (m.family(v.shape[-1]) @ v).max()))


def pairwise(A, B, m: MetricSpec = EUCLIDEAN) -> np.ndarray:
    """Distance matrix between the rows of ``A`` and ``B``."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise ParameterError("dimension mismatch")
    if m.kind is MetricKind.EUCLIDEAN:
        diff = A[:, None, :] - B[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if m.kind is MetricKind.L1:
        return np.abs(A[:, None, :] - B[None, :, :]).sum(axis=2)
    U = m.family(A.shape[1])
    # <a - b, u> = <a, u> - <b, u>
    pa = A @ U.T
    pb = B @ U.T
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        out[i] = (pa[i][None, :] - pb).max(axis=1)
    return np.maximum(out, 0.0)


def paired_distances(A, B, m: MetricSpec = EUCLIDEAN) -> np.ndarray:
    """``d(A[i], B[i])`` for every row."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ParameterError("paired inputs must have the same shape")
    diff = A - B
    if m.kind is MetricKind.EUCLIDEAN:
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if m.kind is MetricKind.L1:
        return np.abs(diff).sum(axis=1)
    return np.maximum((diff @ m.family(A.shape[1]).T).max(axis=1), 0.0)


def distances_to(A, q, m: MetricSpec = EUCLIDEAN) -> np.ndarray:
    """Distances from every row of ``A`` to the single point ``q``."""
    A = np.asarray(A, dtype=np.float64)
    diff = A - np.asarray(q, dtype=np.float64)
    if m.kind is MetricKind.EUCLIDEAN:
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if m.kind is MetricKind.L1:
        return np.abs(diff).sum(axis=1)
    return np.maximum((diff @ m.family(A.shape[1]).T).max(axis=1), 0.0)


def to_cost(dist, objective: Objective):
    return dist * dist if Objective(objective) is Objective.MEANS else dist


def pair_cost(p, q, m: MetricSpec, objective: Objective) -> float:
    """Per-point cost contribution: the distance, squared for k-means."""
    return float(to_cost(distance(p, q, m), objective))


def combine(objective: Objective):
    """Binary operator aggregating per-cluster costs: max for k-center, + otherwise."""
    return max if Objective(objective) is Objective.CENTER else (lambda a, b: a + b)


def aggregate(values, objective: Objective) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 0.0
    if Objective(objective) is Objective.CENTER:
        return float(values.max())
    return float(values.sum())


def read_points_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ParameterError(f"{path}:{line_no}: malformed coordinate row {row!r}") from None
    if not rows:
        raise ParameterError(f"{path}: no points")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ParameterError(f"{path}: rows have differing dimensions {sorted(widths)}")
    return as_points(rows)


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_points_csv(path, X, header: Optional[str] = None) -> None:
    X = as_points(X)
    with open(path, "w", newline="") as fh:
        if header is not None:
            fh.write(f"# {header}\n")
        for row in X:
            fh.write(",".join(format_float(v) for v in row) + "\n")
