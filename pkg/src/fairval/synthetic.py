"""Seeded synthetic scenarios."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .tabular import Dataset, _largest_remainder

# (A, Y) cell shares for the Case-I generator: A and Y positively correlated.
CASE1_SHARES = {(1, 1): 0.35, (1, 0): 0.15, (0, 1): 0.15, (0, 0): 0.35}
CASE1_NOISE = 0.15


def _check_spd(cov, name):
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
        raise ParameterError(f"{name} must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise ParameterError(f"{name} is not positive definite")
    return cov


def synth_two_gaussians(n_per_class: int, means, covariances, seed: int = 0) -> Dataset:
    """Balanced binary problem with one Gaussian per class; protected = label."""
    if n_per_class < 1:
        raise ParameterError("n_per_class must be positive")
    covs = [_check_spd(c, f"covariances[{i}]") for i, c in enumerate(covariances)]
    rng = np.random.default_rng(seed)
    X = np.vstack(
        [rng.multivariate_normal(np.asarray(m, float), c, size=n_per_class) for m, c in zip(means, covs)]
    )
    y = np.repeat([0, 1], n_per_class)
    return Dataset(
        features=X,
        labels=y,
        protected=y.copy(),
        feature_names=("x0", "x1"),
        positive_label=1,
        group_names={0: "0", 1: "1"},
        label_names={0: "0", 1: "1"},
    )


def case1_means(overlap: float) -> dict:
    """Cluster centres inside the unit square.

    The favourable-privileged and unfavourable-disadvantaged clusters sit on
    opposite corners. The other two straddle the centre along the
    anti-diagonal, ``overlap * sqrt(2)`` apart, the unfavourable-privileged
    one on the lower-right.
    """
    t = overlap / 2.0
    return {
        (1, 1): np.array([1.0, 1.0]),
        (0, 0): np.array([0.0, 0.0]),
        (1, 0): np.array([0.5 + t, 0.5 - t]),
        (0, 1): np.array([0.5 - t, 0.5 + t]),
    }


def synth_case1(n: int, overlap: float = 0.3, seed: int = 0, noise: float = CASE1_NOISE) -> Dataset:
    """Four (A, Y) Gaussian clusters where an unweighted linear classifier
    has the larger FPR on A=1 and the larger FNR on A=0."""
    if n < 40:
        raise ParameterError("synth_case1 needs n >= 40")
    if not 0 < overlap < 1:
        raise ParameterError("overlap must lie in (0, 1)")
    cells = sorted(CASE1_SHARES)
    counts = _largest_remainder(n, [CASE1_SHARES[c] for c in cells])
    means = case1_means(overlap)
    rng = np.random.default_rng(seed)
    X, y, a = [], [], []
    for (g, lab), m in zip(cells, counts):
        X.append(means[(g, lab)] + noise * rng.standard_normal((m, 2)))
        y.append(np.full(m, lab))
        a.append(np.full(m, g))
    perm = rng.permutation(n)
    return Dataset(
        features=np.vstack(X)[perm],
        labels=np.concatenate(y)[perm],
        protected=np.concatenate(a)[perm],
        feature_names=("x0", "x1"),
        positive_label=1,
        group_names={0: "0", 1: "1"},
        label_names={0: "0", 1: "1"},
    )
