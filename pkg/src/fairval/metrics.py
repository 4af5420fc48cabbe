"""Prediction-level metrics: per-group confusion rates, EOp, EOdds,
accuracy and Macro-F1."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricUndefinedError, ShapeError


def _ratio(num, den):
    return num / den if den > 0 else None


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def tpr(self):
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def fnr(self):
        return _ratio(self.fn, self.tp + self.fn)

    @property
    def tnr(self):
        return _ratio(self.tn, self.tn + self.fp)

    @property
    def fpr(self):
        return _ratio(self.fp, self.tn + self.fp)

    def to_dict(self):
        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "tpr": self.tpr, "fpr": self.fpr, "tnr": self.tnr, "fnr": self.fnr,
        }


@dataclass(frozen=True)
class GroupRates:
    groups: dict = field(default_factory=dict)

    def __getitem__(self, g) -> Confusion:
        return self.groups[g]

    def rate(self, g, name: str) -> float:
        if g not in self.groups:
            raise MetricUndefinedError(f"group {g} has no test points")
        value = getattr(self.groups[g], name)
        if value is None:
            raise MetricUndefinedError(f"{name.upper()} undefined for group {g} (empty denominator)")
        return value

    def to_dict(self):
        return {str(g): c.to_dict() for g, c in sorted(self.groups.items())}


def _lengths(*arrays):
    arrays = [np.asarray(a) for a in arrays]
    if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
        raise ShapeError("inputs must be 1-D vectors of equal length")
    if arrays[0].size == 0:
        raise ShapeError("inputs are empty")
    return arrays


def confusion_by_group(y_true, y_pred, groups, positive=1) -> GroupRates:
    y_true, y_pred, groups = _lengths(y_true, y_pred, groups)
    t, p = y_true == positive, y_pred == positive
    out = {}
    for g in np.unique(groups):
        m = groups == g
        out[int(g)] = Confusion(
            tp=int(np.sum(t & p & m)),
            fp=int(np.sum(~t & p & m)),
            tn=int(np.sum(~t & ~p & m)),
            fn=int(np.sum(t & ~p & m)),
        )
    return GroupRates(out)


def eop(rates: GroupRates, a, b) -> float:
    return rates.rate(a, "tpr") - rates.rate(b, "tpr")


def eodds(rates: GroupRates, a, b) -> float:
    return 0.5 * (rates.rate(a, "fpr") - rates.rate(b, "fpr")) + 0.5 * (
        rates.rate(a, "tpr") - rates.rate(b, "tpr")
    )


def accuracy(y_true, y_pred) -> float:
    y_true, y_pred = _lengths(y_true, y_pred)
    return float(np.mean(y_true == y_pred))


def macro_f1(y_true, y_pred, labels=None) -> float:
    """Unweighted mean of per-class F1 over ``labels`` (default: every class
    seen in either vector). A class with no true and no predicted members
    scores 0."""
    y_true, y_pred = _lengths(y_true, y_pred)
    if labels is None:
        labels = np.union1d(y_true, y_pred)
    scores = []
    for c in labels:
        tp = np.sum((y_true == c) & (y_pred == c))
        fp = np.sum((y_true != c) & (y_pred == c))
        fn = np.sum((y_true == c) & (y_pred != c))
        den = 2 * tp + fp + fn
        scores.append(2 * tp / den if den else 0.0)
    return float(np.mean(scores))


@dataclass(frozen=True)
class FairnessReport:
    accuracy: float
    macro_f1: float
    eop: float
    eodds: float
    abs_eop: float
    abs_eodds: float
    rates: GroupRates
    n_test: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "eop_signed": self.eop,
            "eodds_signed": self.eodds,
            "eop_abs": self.abs_eop,
            "eodds_abs": self.abs_eodds,
            "rates": self.rates.to_dict(),
            "n_test": self.n_test,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def fairness_report(y_true, y_pred, groups, positive=1, a=0, b=1) -> FairnessReport:
    rates = confusion_by_group(y_true, y_pred, groups, positive)
    e1, e2 = eop(rates, a, b), eodds(rates, a, b)
    return FairnessReport(
        accuracy=accuracy(y_true, y_pred),
        macro_f1=macro_f1(y_true, y_pred),
        eop=e1,
        eodds=e2,
        abs_eop=abs(e1),
        abs_eodds=abs(e2),
        rates=rates,
        n_test=len(np.asarray(y_true)),
    )
