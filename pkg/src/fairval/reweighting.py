"""Training weights from valuations, interpolation towards uniform, and the
group (A, Y) re-weighting baseline. All weight vectors sum to |D|."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FairvalWarning, GroupSupportError, ParameterError
from .tabular import Dataset
from .valuation import Valuation


@dataclass(frozen=True, eq=False)
class Weights:
    values: np.ndarray
    alpha: float = 1.0
    source_kind: str = "uniform"

    def __post_init__(self):
        w = np.array(self.values, dtype=np.float64)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ParameterError("weights must be a finite, nonnegative vector")
        w.flags.writeable = False
        object.__setattr__(self, "values", w)

    def __len__(self):
        return len(self.values)


def uniform(n: int) -> Weights:
    return Weights(np.ones(n), alpha=0.0, source_kind="uniform")


def minmax_normalize_to_weights(v: Valuation) -> Weights:
    """Min-max scale to [0, 1], then rescale so the weights sum to |D|."""
    phi = v.values
    n = len(phi)
    if n < 2:
        raise ParameterError("normalization needs at least two points")
    lo, hi = phi.min(), phi.max()
    if hi == lo:
        warnings.warn("constant valuation; using uniform weights", FairvalWarning, stacklevel=2)
        return Weights(np.ones(n), 1.0, v.kind)
    scaled = (phi - lo) / (hi - lo)
    return Weights(scaled / scaled.sum() * n, 1.0, v.kind)


def interpolate(w: Weights, alpha: float) -> Weights:
    """``(1 - alpha) * 1 + alpha * w``; both endpoints are exact."""
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        values = np.ones(len(w))
    elif alpha == 1.0:
        values = w.values.copy()
    else:
        values = (1.0 - alpha) + alpha * w.values
    return Weights(values, alpha, w.source_kind)


def group_reweigh(train: Dataset) -> Weights:
    """``w(a, y) = |A=a| * |Y=y| / (|D| * |A=a, Y=y|)`` for every (A, Y) cell."""
    a, y, n = train.protected, train.labels, train.n
    w = np.empty(n)
    for g in np.unique(a):
        for lab in np.unique(y):
            cell = (a == g) & (y == lab)
            if not cell.any():
                raise GroupSupportError(f"empty (group={g}, label={lab}) cell")
            w[cell] = (a == g).sum() * (y == lab).sum() / (n * cell.sum())
    return Weights(w, 1.0, "group-rw")
