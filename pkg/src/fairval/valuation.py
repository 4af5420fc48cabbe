"""Fairness valuations derived from a contribution matrix.

Every valuation is a conditional row-mean of the contribution matrix (or a
linear combination of such means), so by efficiency its entries sum to the
matching statistic of the full-data k-NN classifier on the reference set.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .errors import FairvalWarning, GroupSupportError, KindError
from .knn_shapley import ContributionMatrix
from .tabular import Dataset

KINDS = (
    "Acc", "TPR", "TNR", "FPR", "FNR", "TPRa", "TNRa", "FPRa", "FNRa", "EOp", "EOdds", "EOpMulti",
)
_COMPLEMENT = {
    "TPR": "FNR", "FNR": "TPR", "TNR": "FPR", "FPR": "TNR",
    "TPRa": "FNRa", "FNRa": "TPRa", "TNRa": "FPRa", "FPRa": "TNRa",
}
FAIRNESS_KINDS = ("EOp", "EOdds", "EOpMulti")


@dataclass(frozen=True, eq=False)
class Valuation:
    values: np.ndarray
    kind: str
    group_spec: Any = None
    oriented: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KindError(f"unknown valuation kind {self.kind!r}")
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("valuation values must be a finite vector")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @property
    def total(self) -> float:
        return float(self.values.sum())


def _check(phi: ContributionMatrix, reference: Dataset):
    if phi.values.shape[1] != reference.n:
        raise ValueError(
            f"contribution matrix has {phi.values.shape[1]} columns, reference has {reference.n} rows"
        )


def _conditional_mean(phi, reference, y=None, a=None):
    mask = np.ones(reference.n, dtype=bool)
    if y is not None:
        mask &= reference.labels == y
    if a is not None:
        mask &= reference.protected == a
    if not mask.any():
        raise GroupSupportError(f"no reference points with label={y}, group={a}")
    return phi.values[:, mask].mean(axis=1)


def _resolve_group(reference: Dataset, a) -> int:
    try:
        return reference.group_id(a)
    except KeyError:
        raise GroupSupportError(f"group {a!r} is not a known group") from None


def phi_acc(phi: ContributionMatrix) -> Valuation:
    if phi.values.shape[1] < 1:
        raise GroupSupportError("reference set is empty")
    return Valuation(phi.values.mean(axis=1), "Acc")


def phi_rate(phi: ContributionMatrix, reference: Dataset, y=None, a=None) -> Valuation:
    """Contribution to the accuracy on reference points with label ``y``
    (and group ``a``): TPR/TNR, or their group-conditioned versions."""
    _check(phi, reference)
    y = reference.positive_label if y is None else int(y)
    gid = None if a is None else _resolve_group(reference, a)
    values = _conditional_mean(phi, reference, y, gid)
    kind = "TPR" if y == reference.positive_label else "TNR"
    if gid is None:
        return Valuation(values, kind, {"label": y})
    return Valuation(values, kind + "a", {"label": y, "group": gid})


def phi_complement(v: Valuation, n_train: int) -> Valuation:
    """FNR from TPR and FPR from TNR (and back): ``1/n - value``."""
    if v.kind not in _COMPLEMENT:
        raise KindError(f"no complement rate for kind {v.kind!r}")
    return Valuation(1.0 / n_train - v.values, _COMPLEMENT[v.kind], v.group_spec)


def _binary_labels(reference: Dataset):
    pos = reference.positive_label
    others = sorted(set(reference.label_names) - {pos}) or sorted(
        set(reference.labels.tolist()) - {pos}
    )
    if not others:
        raise GroupSupportError("reference needs a negative label")
    return pos, others[0]


def phi_eop_label_sensitive(
    phi: ContributionMatrix, reference: Dataset, unbounded: bool = False
) -> Valuation:
    """Equal-opportunity valuation when the protected attribute is the label.

    Default is the bounded form ``(TPR + TNR) / 2``; ``unbounded=True``
    gives ``TPR + TNR - 1/|D|``.
    """
    pos, neg = _binary_labels(reference)
    tpr = phi_rate(phi, reference, y=pos).values
    tnr = phi_rate(phi, reference, y=neg).values
    if unbounded:
        values = tpr + tnr - 1.0 / phi.values.shape[0]
    else:
        values = (tpr + tnr) / 2.0
    return Valuation(values, "EOp", {"mode": "A=Y", "unbounded": unbounded})


def phi_eop(phi: ContributionMatrix, reference: Dataset, groups=(0, 1)) -> Valuation:
    """``TPR_a - TPR_b`` contributions."""
    a, b = (_resolve_group(reference, g) for g in groups)
    pos = reference.positive_label
    values = phi_rate(phi, reference, pos, a).values - phi_rate(phi, reference, pos, b).values
    return Valuation(values, "EOp", {"attribute": reference.protected_name, "a": a, "b": b})


def phi_eodds(phi: ContributionMatrix, reference: Dataset, groups=(0, 1)) -> Valuation:
    """``(FPR_a - FPR_b)/2 + (TPR_a - TPR_b)/2`` contributions, with the FPR
    terms taken as complements of the conditioned TNR valuations."""
    a, b = (_resolve_group(reference, g) for g in groups)
    pos, neg = _binary_labels(reference)
    n = phi.values.shape[0]
    tpr_a, tpr_b = (phi_rate(phi, reference, pos, g) for g in (a, b))
    fpr_a, fpr_b = (phi_complement(phi_rate(phi, reference, neg, g), n) for g in (a, b))
    values = 0.5 * (fpr_a.values - fpr_b.values) + 0.5 * (tpr_a.values - tpr_b.values)
    return Valuation(values, "EOdds", {"attribute": reference.protected_name, "a": a, "b": b})


def phi_eop_multigroup(phi: ContributionMatrix, reference: Dataset) -> Valuation:
    """``TPR_a* - TPR`` for the group a* whose TPR is furthest from the pooled TPR.

    Ties on the gap go to the smallest group id.
    """
    _check(phi, reference)
    pos = reference.positive_label
    pooled = phi_rate(phi, reference, pos).values
    supported = []
    for g in sorted(reference.group_names):
        if not np.any((reference.labels == pos) & (reference.protected == g)):
            warnings.warn(f"group {g} has no positive reference points; skipped", FairvalWarning)
            continue
        supported.append(g)
    if len(supported) < 2:
        raise GroupSupportError("need at least two groups with positive reference points")
    best, best_gap, best_vals = None, -1.0, None
    for g in supported:
        vals = phi_rate(phi, reference, pos, g).values - pooled
        gap = abs(float(vals.sum()))
        if gap > best_gap:
            best, best_gap, best_vals = g, gap, vals
    return Valuation(best_vals, "EOpMulti", {"attribute": reference.protected_name, "a": best})


def tpr_gap(phi: ContributionMatrix, reference: Dataset, v: Valuation) -> float:
    """TPR of the valuation's group a minus that of its comparison group
    (group b, or the pooled reference for multi-group valuations), as
    implied by the contribution matrix."""
    spec = v.group_spec or {}
    pos = reference.positive_label
    tpr_a = phi_rate(phi, reference, pos, spec["a"]).total
    if v.kind == "EOpMulti":
        tpr_b = phi_rate(phi, reference, pos).total
    else:
        tpr_b = phi_rate(phi, reference, pos, spec["b"]).total
    return tpr_a - tpr_b


def orient_for_reweighting(v: Valuation, phi: ContributionMatrix, reference: Dataset) -> Valuation:
    """Sign a fairness valuation so that larger values favour the group
    with the lower TPR.

    A=Y equal-opportunity valuations are already "higher is better" and
    are only flagged.
    """
    if v.kind not in FAIRNESS_KINDS:
        raise KindError(f"orientation applies to {FAIRNESS_KINDS}, not {v.kind!r}")
    if v.oriented:
        return v
    if (v.group_spec or {}).get("mode") == "A=Y":
        return replace(v, oriented=True)
    gap = tpr_gap(phi, reference, v)
    if gap > 0:
        return replace(v, values=-v.values, oriented=True)
    if gap == 0:
        warnings.warn("equal TPR across groups: no disadvantaged group", FairvalWarning)
    return replace(v, oriented=True)


def compute_valuation(
    kind: str, phi: ContributionMatrix, reference: Dataset, groups=(0, 1), orient: bool = True
) -> Valuation:
    """Dispatch on the value-function names used by the CLI and harness:
    ``acc``, ``eop``, ``eodds``, ``eop-ay``, ``eop-multi``."""
    kind = kind.lower()
    if kind == "acc":
        return phi_acc(phi)
    if kind == "eop":
        v = phi_eop(phi, reference, groups)
    elif kind == "eodds":
        v = phi_eodds(phi, reference, groups)
    elif kind == "eop-ay":
        v = phi_eop_label_sensitive(phi, reference)
    elif kind == "eop-multi":
        v = phi_eop_multigroup(phi, reference)
    else:
        raise KindError(f"unknown value function {kind!r}")
    return orient_for_reweighting(v, phi, reference) if orient else v
