"""Exact k-NN Shapley contributions of training points to reference points.

For every reference point ``j`` the training set is sorted by distance and
the contributions are filled in by the closed-form recursion from the
furthest point inwards::

    Phi[N, j] = 1[y_N == y_j] / max(k, N)
    Phi[i, j] = Phi[i+1, j] + (1[y_i == y_j] - 1[y_{i+1} == y_j]) / max(k, i)

(ranks are 1-based, 1 = nearest). The game being valued is
``v_j(S) = (1/k) * #{label matches among the min(k, |S|) nearest in S}``
with ``v_j({}) = 0``; :func:`exact_shapley_oracle` evaluates the same game
by enumerating coalitions.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.spatial.distance import cdist

from .errors import FairvalWarning, ParameterError, ShapeError, SizeError
from .tabular import Dataset

ORACLE_MAX_TRAIN = 20
# Fixed column-block size: results never depend on how blocks map to workers.
BLOCK = 64


@dataclass(frozen=True)
class KnnConfig:
    k: int = 1
    tie_break: str = "index"

    def __post_init__(self):
        if int(self.k) < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.tie_break != "index":
            raise ParameterError(f"unsupported tie_break {self.tie_break!r}")


@dataclass(frozen=True, eq=False)
class ContributionMatrix:
    """``values[i, j]``: contribution of train row i to reference row j."""

    values: np.ndarray
    k: int
    train_ids: np.ndarray
    ref_ids: np.ndarray
    k_exceeds_train: bool = field(default=False)

    @property
    def shape(self):
        return self.values.shape


def _check_pair(train: Dataset, reference: Dataset):
    if train.d != reference.d:
        raise ShapeError(f"train has {train.d} features, reference has {reference.d}")


def _rank_by_distance(dist: np.ndarray) -> np.ndarray:
    """Per-row argsort ordered by (distance, column index).

    The unstable sort is only trusted on rows without exact distance ties.
    """
    order = np.argsort(dist, axis=1)
    ds = np.take_along_axis(dist, order, axis=1)
    tied = np.flatnonzero(np.any(ds[:, 1:] == ds[:, :-1], axis=1))
    if len(tied):
        order[tied] = np.argsort(dist[tied], axis=1, kind="stable")
    return order


def _block(Xtr, ytr, Xref, yref, k):
    """Contributions for a block of reference rows, shape (block, N)."""
    n = Xtr.shape[0]
    dist = cdist(Xref, Xtr, "sqeuclidean")
    order = _rank_by_distance(dist)
    match = (ytr[order] == yref[:, None]).astype(np.float64)
    rank = np.arange(1, n, dtype=np.float64)
    steps = np.empty_like(match)
    steps[:, 0] = match[:, -1] / max(k, n)
    steps[:, 1:] = ((match[:, :-1] - match[:, 1:]) / np.maximum(k, rank))[:, ::-1]
    # running sum from the furthest point inwards, in recursion order
    acc = np.cumsum(steps, axis=1)[:, ::-1]
    out = np.empty_like(acc)
    np.put_along_axis(out, order, acc, axis=1)
    return out


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("FAIRVAL_WORKERS", "1")))
    except ValueError:
        return 1


def pairwise_contributions(
    train: Dataset, reference: Dataset, config: KnnConfig | None = None, workers: int | None = None
) -> ContributionMatrix:
    """Exact contribution matrix of shape (|D|, |T|).

    Reference columns are processed in fixed blocks of ``BLOCK`` rows on a
    thread pool of ``workers`` threads; the output is bit-identical for
    any worker count.
    """
    config = config or KnnConfig()
    _check_pair(train, reference)
    k = int(config.k)
    n, m = train.n, reference.n
    exceeds = k > n
    if exceeds:
        warnings.warn(f"k={k} exceeds the {n} training points", FairvalWarning, stacklevel=2)
    workers = default_workers() if workers is None else max(1, int(workers))
    Xtr, ytr = train.features, train.labels
    Xref, yref = reference.features, reference.labels
    out = np.empty((m, n))

    def run(start):
        stop = min(start + BLOCK, m)
        out[start:stop] = _block(Xtr, ytr, Xref[start:stop], yref[start:stop], k)

    starts = range(0, m, BLOCK)
    if workers == 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    return ContributionMatrix(
        values=out.T,
        k=k,
        train_ids=train.row_ids.copy(),
        ref_ids=reference.row_ids.copy(),
        k_exceeds_train=exceeds,
    )


def knn_reference_accuracy(phi: ContributionMatrix) -> np.ndarray:
    """Column sums: full-data k-NN correctness of each reference point."""
    return phi.values.sum(axis=0)


def _coalition_values(rank_match: np.ndarray, k: int) -> np.ndarray:
    """v(S) for every coalition bitmask, given the label-match indicator of
    each player listed in nearest-first order (bit p = p-th nearest)."""
    n = len(rank_match)
    masks = np.arange(1 << n, dtype=np.int64)
    member = ((masks[:, None] >> np.arange(n)) & 1).astype(np.int64)
    chosen = member * (np.cumsum(member, axis=1) <= k)
    return chosen @ rank_match / k


def exact_shapley_oracle(
    train: Dataset, reference: Dataset, config: KnnConfig | None = None
) -> ContributionMatrix:
    """Shapley values of the per-reference-point k-NN game by full
    enumeration of the 2^|D| coalitions (|D| <= 20)."""
    config = config or KnnConfig()
    _check_pair(train, reference)
    n, m, k = train.n, reference.n, int(config.k)
    if n > ORACLE_MAX_TRAIN:
        raise SizeError(f"oracle enumerates 2^|D| coalitions; |D|={n} exceeds {ORACLE_MAX_TRAIN}")
    masks = np.arange(1 << n, dtype=np.int64)
    size = np.array([bin(s).count("1") for s in range(1 << n)])
    weight = np.array([1.0 / (n * comb(n - 1, s)) if s < n else 0.0 for s in range(n + 1)])
    values = np.zeros((n, m))
    for j in range(m):
        d = np.sqrt(((train.features - reference.features[j]) ** 2).sum(axis=1))
        ranked = sorted(range(n), key=lambda i: (d[i], i))
        match = np.array([float(train.labels[i] == reference.labels[j]) for i in ranked])
        v = _coalition_values(match, k)
        for p, i in enumerate(ranked):
            bit = 1 << p
            without = masks[(masks & bit) == 0]
            values[i, j] = np.sum(weight[size[without]] * (v[without | bit] - v[without]))
    return ContributionMatrix(
        values=values,
        k=k,
        train_ids=train.row_ids.copy(),
        ref_ids=reference.row_ids.copy(),
        k_exceeds_train=k > n,
    )


def knn_predict(train: Dataset, X, k: int = 1) -> np.ndarray:
    """Majority vote of the k nearest training labels (distance ties by row
    index). Vote ties go to the label of the nearest point among the tied
    labels."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    dist = cdist(X, train.features, "sqeuclidean")
    order = _rank_by_distance(dist)[:, :k]
    pred = np.empty(X.shape[0], dtype=np.int64)
    for r, nn in enumerate(order):
        labs = train.labels[nn]
        vals, counts = np.unique(labs, return_counts=True)
        best = vals[counts == counts.max()]
        pred[r] = next(lab for lab in labs if lab in best)
    return pred
