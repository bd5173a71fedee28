"""Soft-margin RBF SVM, one-vs-rest, solved in the dual by SMO-style
pairwise coordinate ascent.

Each binary subproblem minimizes (1/2) a'Qa - sum(a) subject to y'a = 0 and
0 <= a_i <= C_i, with Q_ij = y_i y_j k(x_i, x_j) and the per-sample box
C_i = C * weight_i. The working pair is the maximal violating pair; the
solver stops when the KKT violation m(a) - M(a) drops to 1e-3, and gives up
with NonConvergence after 100 * n^2 pair updates.
"""

from __future__ import annotations

import numpy as np

from ..features import FeatureMatrix
from .base import (
    N_CLASSES,
    BinarySvm,
    ModelFamily,
    ModelSpec,
    NonConvergence,
    SingleClass,
    SvmParams,
    TrainedModel,
)

KKT_TOL = 1e-3


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """k(x, z) = exp(-gamma * ||x - z||^2), computed blockwise."""
    sq = (
        (A**2).sum(axis=1)[:, None]
        + (B**2).sum(axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def smo_solve(
    K: np.ndarray,
    y: np.ndarray,
    box: np.ndarray,
    tol: float = KKT_TOL,
    max_updates: int | None = None,
) -> tuple[np.ndarray, float, float, int]:
    """Solve one binary dual given the kernel matrix and +-1 labels.

    Returns (alphas, intercept, kkt_residual, n_updates). The update cap
    defaults to 100 * n^2.
    """
    n = len(y)
    alphas = np.zeros(n)
    if max_updates is None:
        max_updates = 100 * n * n
    updates = 0

    def violation(neg_yg: np.ndarray) -> tuple[int, int, float, float]:
        in_up = ((y > 0) & (alphas < box)) | ((y < 0) & (alphas > 0))
        in_low = ((y < 0) & (alphas < box)) | ((y > 0) & (alphas > 0))
        up_vals = np.where(in_up, neg_yg, -np.inf)
        low_vals = np.where(in_low, neg_yg, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        return i, j, float(up_vals[i]), float(low_vals[j])

    while True:
        # Exact gradient: for the dual f(a) = a'Qa/2 - sum(a), the quantity
        # tracked is -y * grad = y - K @ (a * y). Refreshing it here keeps
        # the incremental updates below from accumulating drift.
        neg_yg = y - K @ (alphas * y)
        i, j, m_val, big_m_val = violation(neg_yg)
        residual = m_val - big_m_val
        if residual <= tol or not np.isfinite(residual):
            break
        while True:
            if updates >= max_updates:
                raise NonConvergence(
                    f"SMO hit the {max_updates}-update cap with KKT residual {residual:.3e}",
                    residual=float(residual),
                )
            eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
            # Step along the feasible pair direction (alpha_i += y_i s,
            # alpha_j -= y_j s); eta <= 0 only for coincident points, where
            # the move is capped by the box alone.
            step = residual / eta if eta > 1e-12 else np.inf
            room_i = box[i] - alphas[i] if y[i] > 0 else alphas[i]
            room_j = alphas[j] if y[j] > 0 else box[j] - alphas[j]
            step = min(step, room_i, room_j)
            # Exact bound placement when the box, not the curvature, stops
            # the step; otherwise the free/bound index sets rot.
            if step == room_i:
                alphas[i] = box[i] if y[i] > 0 else 0.0
            else:
                alphas[i] += y[i] * step
            if step == room_j:
                alphas[j] = 0.0 if y[j] > 0 else box[j]
            else:
                alphas[j] -= y[j] * step
            neg_yg -= step * (K[:, i] - K[:, j])
            updates += 1
            if updates % 1000 == 0:
                break  # refresh the gradient in the outer loop
            i, j, m_val, big_m_val = violation(neg_yg)
            residual = m_val - big_m_val
            if residual <= tol or not np.isfinite(residual):
                break

    residual = max(residual, 0.0) if np.isfinite(residual) else 0.0
    free = (alphas > 0) & (alphas < box)
    if free.any():
        intercept = float(neg_yg[free].mean())
    elif np.isfinite(m_val) and np.isfinite(big_m_val):
        intercept = (m_val + big_m_val) / 2.0
    elif np.isfinite(m_val):
        intercept = m_val
    elif np.isfinite(big_m_val):
        intercept = big_m_val
    else:
        intercept = 0.0
    return alphas, intercept, float(residual), updates


def train_rbf_svm(
    X: FeatureMatrix,
    y,
    C: float,
    gamma: float,
    weights: np.ndarray | None = None,
    seed: int = 0,
) -> TrainedModel:
    """Fit one-vs-rest binary SVMs; the kernel matrix is computed once and
    shared across the three subproblems."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(np.unique(y)) < 2:
        raise SingleClass("SVM needs at least 2 classes")
    if weights is None:
        weights = np.ones(len(y))
    box = C * np.asarray(weights, dtype=float)

    K = rbf_kernel(X, X, gamma)
    binaries: list[BinarySvm | None] = []
    for c in range(N_CLASSES):
        positives = y == c
        if not positives.any():
            binaries.append(None)
            continue
        yb = np.where(positives, 1.0, -1.0)
        alphas, intercept, residual, updates = smo_solve(K, yb, box)
        sv = alphas > 0
        binaries.append(
            BinarySvm(
                positive_class=c,
                support_vectors=X[sv].copy(),
                dual_coef=(alphas * yb)[sv],
                intercept=intercept,
                support_indices=np.flatnonzero(sv),
                alphas=alphas[sv],
                box=box[sv],
                kkt_residual=residual,
                n_updates=updates,
            )
        )

    spec = ModelSpec(family=ModelFamily.RBF_SVM, C=C, gamma=gamma, seed=seed)
    return TrainedModel(spec=spec, params=SvmParams(gamma=gamma, binaries=tuple(binaries)))


def svm_decision_values(params: SvmParams, X: np.ndarray) -> np.ndarray:
    """Decision value per class: sum_i alpha_i y_i k(x_i, x) + b for that
    class's subproblem, -inf where a class had no training examples."""
    values = np.full((X.shape[0], N_CLASSES), -np.inf)
    for c, binary in enumerate(params.binaries):
        if binary is None:
            continue
        if binary.support_vectors.shape[0] == 0:
            values[:, c] = binary.intercept
            continue
        kernel = rbf_kernel(X, binary.support_vectors, params.gamma)
        values[:, c] = kernel @ binary.dual_coef + binary.intercept
    return values
