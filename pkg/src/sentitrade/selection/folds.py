"""Seeded k-fold index splitting, plain and stratified."""

from __future__ import annotations

import numpy as np

from ..core import SentitradeError


class TooManyFolds(SentitradeError):
    """Requested more folds than samples (or fewer than one)."""


class ClassTooSmall(SentitradeError):
    """Stratification impossible: some class has fewer samples than folds."""


def kfold_split(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffle 0..n-1 with the seeded generator and cut into k folds whose
    sizes differ by at most one."""
    if k < 1 or k > n:
        raise TooManyFolds(f"cannot split {n} samples into {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    return [fold.copy() for fold in np.array_split(order, k)]


def stratified_kfold(labels, k: int, seed: int) -> list[np.ndarray]:
    """k folds where each fold's class counts are within one of the
    proportional share. Every class must have at least k members."""
    labels = np.asarray(labels, dtype=int)
    n = labels.size
    if k < 1 or k > n:
        raise TooManyFolds(f"cannot split {n} samples into {k} folds")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size < k:
            raise ClassTooSmall(f"class {cls} has {members.size} samples, fewer than {k} folds")
        members = rng.permutation(members)
        # Rotate which folds take the remainder so no fold is systematically
        # larger across classes.
        offset = int(cls) % k
        for chunk_index, chunk in enumerate(np.array_split(members, k)):
            folds[(chunk_index + offset) % k].extend(int(i) for i in chunk)
    return [np.array(sorted(fold)) for fold in folds]
