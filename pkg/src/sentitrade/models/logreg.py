"""Multinomial logistic regression trained by monotone gradient descent.

The objective is the weight-normalized mean cross-entropy plus an L2
penalty on the weight matrix (bias unpenalized):

    L(W, b) = (1 / sum(w)) * sum_i w_i * CE_i  +  (1 / 2C) * ||W||_F^2

Normalizing by the total weight makes the optimum invariant to duplicating
the dataset. Optimization is plain gradient descent with Armijo
backtracking from zero initialization, so runs are deterministic and the
objective never increases across accepted steps.
"""

from __future__ import annotations

import numpy as np

from ..features import FeatureMatrix
from .base import (
    N_CLASSES,
    LogRegParams,
    ModelFamily,
    ModelSpec,
    SingleClass,
    TrainedModel,
)

GRAD_TOL = 1e-6
MAX_ITERATIONS = 5000
ARMIJO_C = 1e-4


def _softmax(Z: np.ndarray) -> np.ndarray:
    shifted = Z - Z.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    return expz / expz.sum(axis=1, keepdims=True)


def _log_softmax(Z: np.ndarray) -> np.ndarray:
    shifted = Z - Z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def logreg_objective(
    W: np.ndarray, b: np.ndarray, X: FeatureMatrix, y: np.ndarray, C: float, weights: np.ndarray
) -> float:
    """Penalized weighted-mean cross-entropy; the training loss."""
    Z = X @ W.T + b
    log_p = _log_softmax(Z)
    ce = -(weights * log_p[np.arange(len(y)), y]).sum() / weights.sum()
    return float(ce + (W**2).sum() / (2.0 * C))


def logreg_gradient(
    W: np.ndarray, b: np.ndarray, X: FeatureMatrix, y: np.ndarray, C: float, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of logreg_objective with respect to (W, b)."""
    Z = X @ W.T + b
    P = _softmax(Z)
    P[np.arange(len(y)), y] -= 1.0
    D = P * (weights / weights.sum())[:, None]
    return D.T @ X + W / C, D.sum(axis=0)


def train_logreg(
    X: FeatureMatrix, y, C: float, weights: np.ndarray | None = None, seed: int = 0
) -> TrainedModel:
    """Fit a 3-class softmax classifier. Deterministic: zero init, fixed
    backtracking schedule, stop at gradient inf-norm <= 1e-6 or 5000 steps."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(np.unique(y)) < 2:
        raise SingleClass("logistic regression needs at least 2 classes")
    if weights is None:
        weights = np.ones(len(y))
    weights = np.asarray(weights, dtype=float)

    W = np.zeros((N_CLASSES, X.shape[1]))
    b = np.zeros(N_CLASSES)
    loss = logreg_objective(W, b, X, y, C, weights)
    history = [loss]
    step = 1.0
    grad_norm = float("inf")
    iteration = 0
    for iteration in range(1, MAX_ITERATIONS + 1):
        gW, gb = logreg_gradient(W, b, X, y, C, weights)
        grad_norm = max(np.abs(gW).max(), np.abs(gb).max())
        if grad_norm <= GRAD_TOL:
            iteration -= 1
            break
        gsq = (gW**2).sum() + (gb**2).sum()
        step = min(step * 2.0, 1e8)
        accepted = False
        while step >= 1e-18:
            W_try = W - step * gW
            b_try = b - step * gb
            loss_try = logreg_objective(W_try, b_try, X, y, C, weights)
            if loss_try <= loss - ARMIJO_C * step * gsq:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # stuck at numerical precision; keep the last good point
        W, b, loss = W_try, b_try, loss_try
        history.append(loss)

    gW, gb = logreg_gradient(W, b, X, y, C, weights)
    grad_norm = max(np.abs(gW).max(), np.abs(gb).max())

    spec = ModelSpec(family=ModelFamily.LOGREG, C=C, seed=seed)
    params = LogRegParams(
        weights=W,
        bias=b,
        n_iterations=iteration,
        grad_inf_norm=float(grad_norm),
        objective_history=tuple(history),
    )
    return TrainedModel(spec=spec, params=params)
