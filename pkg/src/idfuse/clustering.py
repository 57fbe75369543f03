"""K-means over face vectors to bootstrap identity labels.

When no labeled data exists yet, face vectors are grouped into many
small clusters that a human can label offline. Centers are seeded with
one random pick followed by greedy farthest-first picks, then refined
with Lloyd's iterations. Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_MAX_ITERATIONS = 100


@dataclass(frozen=True, eq=False)
class ClusterReport:
    """Final assignment of every vector to a cluster.

    assignments[i] is vector i's cluster; sse_history holds the
    within-cluster sum of squares after each assignment step.
    """

    k: int
    assignments: tuple[int, ...]
    distances: tuple[float, ...]
    centers: np.ndarray
    sse_history: tuple[float, ...]
    n_iterations: int

    def __post_init__(self) -> None:
        if self.centers.shape[0] != self.k:
            raise ValidationError(
                f"expected {self.k} centers, got {self.centers.shape[0]}"
            )
        if len(self.distances) != len(self.assignments):
            raise ValidationError("one distance per assignment required")
        if any(not 0 <= a < self.k for a in self.assignments):
            raise ValidationError("assignment out of cluster range")
        self.centers.flags.writeable = False

    @property
    def sse(self) -> float:
        return self.sse_history[-1]

    @cached_property
    def members(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        """Per cluster: (vector_index, distance-to-centroid), nearest first."""
        grouped: list[list[tuple[int, float]]] = [[] for _ in range(self.k)]
        for index, cluster in enumerate(self.assignments):
            grouped[cluster].append((index, self.distances[index]))
        return tuple(
            tuple(sorted(group, key=lambda item: (item[1], item[0])))
            for group in grouped
        )


def _farthest_first_centers(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    """First center random (seeded), each next one farthest from all chosen."""
    n = points.shape[0]
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    min_sq_dist = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        next_index = int(np.argmax(min_sq_dist))
        chosen.append(next_index)
        sq = ((points - points[next_index]) ** 2).sum(axis=1)
        np.minimum(min_sq_dist, sq, out=min_sq_dist)
    return points[chosen].copy()


def cluster_face_features(
    face_vectors: Sequence[np.ndarray],
    k: int,
    seed: int,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> ClusterReport:
    """Lloyd's K-means with farthest-first seeding.

    Stops when assignments stabilize or after max_iterations. Empty
    clusters keep their previous center, which preserves the
    non-increasing sum-of-squares guarantee.
    """
    if k <= 0:
        raise ValidationError(f"cluster count must be positive, got {k}")
    if max_iterations < 1:
        raise ValidationError(f"max_iterations must be >= 1, got {max_iterations}")
    n = len(face_vectors)
    if k > n:
        raise ValidationError(f"cluster count {k} exceeds vector count {n}")
    points = np.stack([np.asarray(v, dtype=np.float64) for v in face_vectors])
    centers = _farthest_first_centers(points, k, seed)

    assignments = np.full(n, -1, dtype=np.intp)
    sse_history: list[float] = []
    iterations = 0
    for _ in range(max_iterations):
        iterations += 1
        sq_dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assignments = np.argmin(sq_dists, axis=1)
        sse_history.append(float(sq_dists[np.arange(n), new_assignments].sum()))
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for cluster in range(k):
            mask = assignments == cluster
            if mask.any():
                centers[cluster] = points[mask].mean(axis=0)
    final_dists = np.sqrt(
        ((points - centers[assignments]) ** 2).sum(axis=1)
    )
    return ClusterReport(
        k=k,
        assignments=tuple(int(a) for a in assignments),
        distances=tuple(float(d) for d in final_dists),
        centers=centers,
        sse_history=tuple(sse_history),
        n_iterations=iterations,
    )
