"""Per-sample-weighted, L2-regularized logistic regression trained by
full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DegenerateFitError, ShapeError
from .tabular import Dataset


@dataclass(frozen=True)
class ModelSpec:
    epochs: int = 500
    step: float = 0.1
    l2: float = 1e-3
    threshold: float = 0.5
    seed: int = 0


def objective(theta, X, t, w, l2):
    """Weighted mean logistic loss plus ``l2/2 * ||coef||^2`` and its gradient.

    ``theta`` is ``[coef..., intercept]``; the intercept is not penalized.
    Dividing by ``sum(w)`` makes the objective invariant to rescaling w.
    """
    coef, b = theta[:-1], theta[-1]
    z = X @ coef + b
    wsum = w.sum()
    loss = np.dot(w, np.logaddexp(0.0, z) - t * z) / wsum + 0.5 * l2 * np.dot(coef, coef)
    r = w * (expit(z) - t) / wsum
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ r + l2 * coef
    grad[-1] = r.sum()
    return loss, grad


@dataclass(frozen=True, eq=False)
class WeightedLinearModel:
    coefficients: np.ndarray
    intercept: float
    positive_label: int
    negative_label: int
    spec: ModelSpec = field(default_factory=ModelSpec)
    loss_history: tuple = ()

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coefficients + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        pos = self.predict_proba(X) > self.spec.threshold
        return np.where(pos, self.positive_label, self.negative_label)


def train_weighted(spec: ModelSpec, train: Dataset, weights=None) -> WeightedLinearModel:
    """Fit from a zero start. An epoch whose step would raise the loss is
    retried with the step halved, so the loss history never increases."""
    X = train.features
    n = train.n
    w = np.ones(n) if weights is None else np.asarray(getattr(weights, "values", weights), float)
    if w.shape != (n,):
        raise ShapeError(f"expected {n} weights, got {w.shape}")
    t = train.is_positive().astype(float)
    if t.all() or not t.any():
        raise DegenerateFitError("training set contains a single class")
    if w.sum() <= 0:
        raise DegenerateFitError("all training weights are zero")
    negatives = sorted(set(train.labels.tolist()) - {train.positive_label})

    theta = np.zeros(X.shape[1] + 1)
    loss, grad = objective(theta, X, t, w, spec.l2)
    history = [loss]
    step = spec.step
    for _ in range(spec.epochs):
        while True:
            cand = theta - step * grad
            c_loss, c_grad = objective(cand, X, t, w, spec.l2)
            if c_loss <= loss or step < 1e-12:
                break
            step *= 0.5
        if c_loss > loss:
            break
        theta, loss, grad = cand, c_loss, c_grad
        history.append(loss)
    return WeightedLinearModel(
        coefficients=theta[:-1].copy(),
        intercept=float(theta[-1]),
        positive_label=train.positive_label,
        negative_label=negatives[0],
        spec=spec,
        loss_history=tuple(history),
    )
