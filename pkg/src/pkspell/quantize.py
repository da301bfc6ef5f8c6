"""
Per-piece duration classes from an exact one-dimensional k-means.

The optimal k-means partition of points on a line is contiguous in sorted
order, so it can be found exactly by dynamic programming over split points.
The DP runs over the *distinct* durations (weighted by multiplicity) which
guarantees that equal durations always land in the same class. Each DP layer
is solved with the divide-and-conquer optimisation for monotone split points,
giving O(k U log U) for U distinct values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import EmptyInput, InvalidK

log = logging.getLogger(__name__)

DEFAULT_K = 4
MIN_DURATION = 1e-3
# relative slack under which two partition costs count as a tie
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Clustering:
    centroids: List[float]
    assignment: List[int]
    total_cost: float
    # index of the last distinct value in each cluster (inclusive)
    boundaries: List[int]


def _sanitize(durations: Sequence[float]) -> np.ndarray:
    x = np.asarray(durations, dtype=np.float64)
    bad = ~(x > 0)
    if bad.any():
        log.warning("clamping %d non-positive duration(s) to %g", int(bad.sum()), MIN_DURATION)
        x = np.where(bad, MIN_DURATION, x)
    return x


class _WeightedCost:
    """O(1) weighted sum-of-squares for ranges of distinct sorted values."""

    def __init__(self, values, weights):
        shift = np.average(values, weights=weights)
        v = values - shift
        self.w = np.concatenate([[0.0], np.cumsum(weights)])
        self.s1 = np.concatenate([[0.0], np.cumsum(weights * v)])
        self.s2 = np.concatenate([[0.0], np.cumsum(weights * v * v)])

    def __call__(self, i, j):
        # values[i:j], works elementwise on arrays of j
        w = self.w[j] - self.w[i]
        s1 = self.s1[j] - self.s1[i]
        s2 = self.s2[j] - self.s2[i]
        return np.maximum(s2 - s1 * s1 / w, 0.0)


def _leftmost_argmin(vals, tol):
    best = vals.min()
    return int(np.flatnonzero(vals <= best + tol)[0])


def _optimal_boundaries(values, weights, n_clusters):
    """Suffix DP: best[m][i] = min cost of splitting values[i:] into m clusters.

    Reconstruction from the front with leftmost tie-breaking gives the
    lexicographically smallest boundaries among optimal partitions.
    """
    u = len(values)
    cost = _WeightedCost(values, weights)
    tol = TIE_RTOL * max(float(cost(0, u)), 1e-300)
    best = np.full((n_clusters + 1, u + 1), np.inf)
    best[0, u] = 0.0
    split = np.zeros((n_clusters + 1, u + 1), dtype=np.int64)
    for m in range(1, n_clusters + 1):
        prev = best[m - 1]
        last_split = u - (m - 1)
        # rows i in [a, b] have their first split within [jl, jh]
        stack = [(0, u - m, 1, u)]
        while stack:
            a, b, jl, jh = stack.pop()
            if a > b:
                continue
            mid = (a + b) // 2
            if m == 1:
                js = np.array([u])
            else:
                js = np.arange(max(jl, mid + 1), min(jh, last_split) + 1)
            vals = cost(mid, js) + prev[js]
            pick = _leftmost_argmin(vals, tol)
            best[m, mid] = vals[pick]
            split[m, mid] = js[pick]
            stack.append((a, mid - 1, jl, js[pick]))
            stack.append((mid + 1, b, js[pick], jh))
    bounds, i = [], 0
    for m in range(n_clusters, 0, -1):
        j = int(split[m, i])
        bounds.append(j - 1)
        i = j
    return bounds


def kmeans_1d(durations: Sequence[float], k: int = DEFAULT_K) -> Clustering:
    """Globally optimal k-means on a list of positive reals.

    When there are fewer than ``k`` distinct values each distinct value gets
    its own cluster. Class ids rank clusters by ascending centroid.
    """
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    if len(durations) == 0:
        raise EmptyInput("no durations to cluster")
    x = _sanitize(durations)
    values, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    n_clusters = min(k, len(values))
    bounds = _optimal_boundaries(values, counts.astype(np.float64), n_clusters)

    label_of_value = np.empty(len(values), dtype=np.int64)
    centroids, total = [], []
    start = 0
    for c, end in enumerate(bounds):
        label_of_value[start : end + 1] = c
        members = x[(inverse >= start) & (inverse <= end)].tolist()
        centre = math.fsum(members) / len(members)
        centroids.append(centre)
        total.append(math.fsum((d - centre) ** 2 for d in members))
        start = end + 1
    return Clustering(
        centroids=centroids,
        assignment=label_of_value[inverse.ravel()].tolist(),
        total_cost=math.fsum(total),
        boundaries=list(bounds),
    )


def nearest_centroid(duration: float, centroids: Sequence[float]) -> int:
    """Classify a duration against fixed centroids; equidistant goes to the lower one."""
    dists = [abs(duration - c) for c in centroids]
    return dists.index(min(dists))


def quantize_durations(durations: Sequence[float], k: int = DEFAULT_K) -> List[int]:
    return kmeans_1d(durations, k).assignment


def quantize_piece(piece, k: int = DEFAULT_K) -> List[int]:
    """Duration class per note of ``piece``, clustered within the piece only."""
    return quantize_durations([n.duration for n in piece.notes], k)
