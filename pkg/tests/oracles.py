"""Reference implementations used only by the tests.

Nothing here imports the package's numerical code: distances are plain
Euclidean norms, neighbours are found with ``sorted`` and the Shapley value
is enumerated coalition by coalition.
"""

from itertools import combinations
from math import comb, sqrt


def _dist(a, b):
    return sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


def neighbours(X, x):
    """Train indices by increasing distance to ``x``; ties by index."""
    return sorted(range(len(X)), key=lambda i: (_dist(X[i], x), i))


def vote_value(X, y, x, yx, k, members=None):
    """Fraction of the k nearest members of S whose label is ``yx``
    (with the 1/k normalization kept when |S| < k); 0 for the empty set."""
    members = range(len(X)) if members is None else members
    order = sorted(members, key=lambda i: (_dist(X[i], x), i))
    top = order[:k]
    return sum(1 for i in top if y[i] == yx) / k


def powerset_shapley(X, y, Xref, yref, k):
    """Phi[i][j] by enumerating all coalitions of the other players."""
    n = len(X)
    phi = [[0.0] * len(Xref) for _ in range(n)]
    for j, (x, yx) in enumerate(zip(Xref, yref)):
        for i in range(n):
            others = [p for p in range(n) if p != i]
            total = 0.0
            for size in range(n):
                w = 1.0 / (n * comb(n - 1, size))
                for S in combinations(others, size):
                    total += w * (
                        vote_value(X, y, x, yx, k, S + (i,)) - vote_value(X, y, x, yx, k, S)
                    )
            phi[i][j] = total
    return phi


def knn_correctness(X, y, Xref, yref, k):
    """Soft k-NN correctness of every reference point using the full train set."""
    return [vote_value(X, y, x, yx, k) for x, yx in zip(Xref, yref)]


def conditional_mean(values, mask):
    sel = [v for v, m in zip(values, mask) if m]
    return sum(sel) / len(sel)


def knn_statistics(X, y, a, Xref, yref, aref, k, pos=1, groups=(0, 1)):
    """Acc, TPR, TNR, TPR_a, TNR_a, EOp and EOdds of the soft k-NN rule on
    the reference set, each computed straight from the votes."""
    c = knn_correctness(X, y, Xref, yref, k)
    ga, gb = groups
    is_pos = [t == pos for t in yref]
    tpr = conditional_mean(c, is_pos)
    tnr = conditional_mean(c, [not p for p in is_pos])
    tpr_g = {g: conditional_mean(c, [p and ag == g for p, ag in zip(is_pos, aref)]) for g in groups}
    tnr_g = {g: conditional_mean(c, [(not p) and ag == g for p, ag in zip(is_pos, aref)]) for g in groups}
    fpr_g = {g: 1.0 - tnr_g[g] for g in groups}
    return {
        "Acc": sum(c) / len(c),
        "TPR": tpr,
        "TNR": tnr,
        "TPRa": tpr_g[ga],
        "TNRa": tnr_g[ga],
        "EOp": tpr_g[ga] - tpr_g[gb],
        "EOdds": 0.5 * (fpr_g[ga] - fpr_g[gb]) + 0.5 * (tpr_g[ga] - tpr_g[gb]),
    }


def hard_knn_predict(X, y, x, k):
    """Majority label of the k nearest points; vote ties go to the label
    of the nearest point among the tied labels."""
    order = neighbours(X, x)[:k]
    counts = {}
    for i in order:
        counts[y[i]] = counts.get(y[i], 0) + 1
    best = max(counts.values())
    tied = {lab for lab, c in counts.items() if c == best}
    return next(y[i] for i in order if y[i] in tied)
