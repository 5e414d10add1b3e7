"""Farthest-point (Gonzalez) traversal."""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .errors import ParameterError
from .geometry import EUCLIDEAN, MetricSpec, as_points, distances_to


def gonzalez_kcenter(X, k: int, m: MetricSpec = EUCLIDEAN, first: int = 0) -> Tuple[np.ndarray, float]:
    """Greedy farthest-point centers and the resulting k-center radius.

    Starts at index ``first``; each step adds the point farthest from the
    chosen set (lowest index on ties).  The radius is within twice optimal.
    """
    P = as_points(X)
    n = P.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must lie in [1, n]; got k={k}, n={n}")
    if not 0 <= first < n:
        raise ParameterError("first seed index out of range")
    chosen = [first]
    dist = distances_to(P, P[first], m)
    for _ in range(k - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, distances_to(P, P[nxt], m))
    return np.array(chosen, dtype=np.int64), float(dist.max())
