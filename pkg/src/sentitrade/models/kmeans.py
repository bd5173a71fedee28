"""K-Means used as a classifier: Lloyd's algorithm from greedy
farthest-point initialization, then a cluster -> class map by majority
training label.

Determinism: the seed picks the first centroid, every other choice is
greedy with ties to the lowest index, so a fixed seed reproduces the run
exactly. Empty clusters are re-seeded at the point farthest from their
stale centroid. Majority ties resolve to neutral when it is among the tied
classes, otherwise to the lowest class index; a cluster that ends up with
no members maps to neutral.
"""

from __future__ import annotations

import numpy as np

from ..core import SentimentClass
from ..features import FeatureMatrix
from .base import (
    KMeansParams,
    ModelFamily,
    ModelSpec,
    TooManyClusters,
    TrainedModel,
)

MAX_ITERATIONS = 300


def _sq_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = (
        (X**2).sum(axis=1)[:, None]
        + (centroids**2).sum(axis=1)[None, :]
        - 2.0 * (X @ centroids.T)
    )
    np.maximum(d, 0.0, out=d)
    return d


def farthest_point_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded first pick, then greedily the point farthest from the chosen
    set. Already-chosen indices are excluded so the k picks are distinct."""
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    nearest = _sq_distances(X, X[chosen[-1]][None, :])[:, 0]
    for _ in range(k - 1):
        candidates = nearest.copy()
        candidates[chosen] = -np.inf
        chosen.append(int(np.argmax(candidates)))
        nearest = np.minimum(nearest, _sq_distances(X, X[chosen[-1]][None, :])[:, 0])
    return X[chosen].copy()


def train_kmeans_classifier(
    X: FeatureMatrix, y, n_clusters: int, seed: int = 0
) -> TrainedModel:
    """Lloyd iterations until assignments stabilize (or 300 rounds), then
    map each cluster to the majority label of its members."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n = X.shape[0]
    if n_clusters < 1:
        raise ValueError("n_clusters must be positive")
    if n_clusters > n:
        raise TooManyClusters(f"n_clusters={n_clusters} exceeds {n} training rows")

    rng = np.random.default_rng(seed)
    centroids = farthest_point_init(X, n_clusters, rng)
    assignments = np.full(n, -1)
    inertia_history: list[float] = []
    iterations = 0
    for iterations in range(1, MAX_ITERATIONS + 1):
        new_assignments = np.argmin(_sq_distances(X, centroids), axis=1)
        if np.array_equal(new_assignments, assignments):
            iterations -= 1
            break
        assignments = new_assignments
        taken: list[int] = []
        for c in range(n_clusters):
            members = assignments == c
            if members.any():
                centroids[c] = X[members].mean(axis=0)
            else:
                # Re-seed an emptied cluster at the point farthest from its
                # stale centroid (skipping points already used this round).
                dist = _sq_distances(X, centroids[c][None, :])[:, 0]
                if taken:
                    dist[taken] = -np.inf
                pick = int(np.argmax(dist))
                taken.append(pick)
                centroids[c] = X[pick].copy()
        inertia = float(_sq_distances(X, centroids).min(axis=1).sum())
        inertia_history.append(inertia)

    cluster_to_class = np.empty(n_clusters, dtype=int)
    for c in range(n_clusters):
        members = y[assignments == c]
        if members.size == 0:
            cluster_to_class[c] = int(SentimentClass.NEUTRAL)
            continue
        counts = np.bincount(members, minlength=3)
        best = counts.max()
        tied = np.flatnonzero(counts == best)
        if int(SentimentClass.NEUTRAL) in tied:
            cluster_to_class[c] = int(SentimentClass.NEUTRAL)
        else:
            cluster_to_class[c] = int(tied[0])

    spec = ModelSpec(family=ModelFamily.KMEANS, n_clusters=n_clusters, seed=seed)
    params = KMeansParams(
        centroids=centroids,
        cluster_to_class=cluster_to_class,
        inertia_history=tuple(inertia_history),
        n_iterations=iterations,
    )
    return TrainedModel(spec=spec, params=params)


def kmeans_predict(params: KMeansParams, X: np.ndarray) -> np.ndarray:
    """Mapped class of the nearest centroid (distance ties -> lower centroid
    index, via argmin)."""
    nearest = np.argmin(_sq_distances(X, params.centroids), axis=1)
    return params.cluster_to_class[nearest]


def kmeans_decision_values(params: KMeansParams, X: np.ndarray) -> np.ndarray:
    """Per-class score: negated distance to the closest centroid mapped to
    that class (-inf for classes with no centroid). Only a convenience for
    reporting; prediction goes through kmeans_predict."""
    distances = _sq_distances(X, params.centroids)
    values = np.full((X.shape[0], 3), -np.inf)
    for c in range(3):
        mask = params.cluster_to_class == c
        if mask.any():
            values[:, c] = -distances[:, mask].min(axis=1)
    return values
