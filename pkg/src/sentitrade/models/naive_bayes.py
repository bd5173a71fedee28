"""Multinomial naive Bayes with additive smoothing, in closed form.

Per class: log prior = ln(weighted class mass / total mass), feature
log-likelihood = ln((class feature sum + alpha) / (class total + alpha*d)).
Classes absent from training get a -inf prior (never predicted) and a
uniform likelihood row. Feature values must be nonnegative; SVD-reduced
features are not, and that case is surfaced as NonNegativeRequired rather
than silently shifted.
"""

from __future__ import annotations

import numpy as np

from ..features import FeatureMatrix
from .base import (
    N_CLASSES,
    MnbParams,
    ModelFamily,
    ModelSpec,
    NonNegativeRequired,
    TrainedModel,
)


def train_mnb(
    X: FeatureMatrix, y, alpha: float, weights: np.ndarray | None = None, seed: int = 0
) -> TrainedModel:
    """Closed-form fit; optional per-sample weights scale both the class
    priors and the per-class feature sums."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if np.any(X < 0):
        raise NonNegativeRequired("multinomial NB needs nonnegative features")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if weights is None:
        weights = np.ones(len(y))
    weights = np.asarray(weights, dtype=float)

    d = X.shape[1]
    log_prior = np.full(N_CLASSES, -np.inf)
    log_likelihood = np.empty((N_CLASSES, d))
    total_mass = weights.sum()
    for c in range(N_CLASSES):
        members = y == c
        class_mass = weights[members].sum()
        if class_mass > 0:
            log_prior[c] = np.log(class_mass / total_mass)
        feature_sums = weights[members] @ X[members] if members.any() else np.zeros(d)
        log_likelihood[c] = np.log((feature_sums + alpha) / (feature_sums.sum() + alpha * d))

    spec = ModelSpec(family=ModelFamily.MNB, alpha=alpha, seed=seed)
    return TrainedModel(spec=spec, params=MnbParams(log_prior=log_prior, log_likelihood=log_likelihood))
