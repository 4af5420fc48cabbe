"""German Credit data in the three-attribute one-hot schema.

The raw file is the UCI Statlog ``german.data`` (1000 rows, space
separated, attribute codes ``A11`` ...). Categories are regrouped as in the
usual fairness-benchmark preprocessing: credit history (delay, paid,
other), savings (<500, >500, unknown) and employment (unemployed, 1-4y,
>4y). Sex and an age bucket are the candidate protected columns; by
default both also enter the features as 0/1 indicators (female, age<=25),
giving 11 columns instead of the 9 one-hot ones.
"""

from __future__ import annotations

import csv
import io
from importlib import resources

from .tabular import Dataset, Schema, read_csv

_CREDIT_HISTORY = {"A30": "paid", "A31": "paid", "A32": "paid", "A33": "delay", "A34": "other"}
_SAVINGS = {"A61": "<500", "A62": "<500", "A63": ">500", "A64": ">500", "A65": "unknown"}
_EMPLOYMENT = {"A71": "unemployed", "A72": "1-4y", "A73": "1-4y", "A74": ">4y", "A75": ">4y"}
_SEX = {"A91": "male", "A93": "male", "A94": "male", "A92": "female", "A95": "female"}

COLUMNS = ("credit_history", "savings", "employment", "sex", "age", "credit")


GROUPS = {"sex": ["male", "female"], "age": [">25", "<=25"]}


def schema(protected: str = "sex", demographics: bool = True) -> Schema:
    if protected not in GROUPS:
        raise ValueError(f"protected must be 'sex' or 'age', got {protected!r}")
    columns = {
        "credit_history": {"one-hot": ["delay", "paid", "other"]},
        "savings": {"one-hot": [">500", "<500", "unknown"]},
        "employment": {"one-hot": ["1-4y", ">4y", "unemployed"]},
    }
    if demographics:
        columns.update({g: {"binary": levels} for g, levels in GROUPS.items()})
    return Schema.from_dict(
        {
            "label": "credit",
            "positive": "good",
            "label_values": ["bad", "good"],
            "protected": protected,
            "protected_values": GROUPS[protected],
            "columns": columns,
        }
    )


def rows() -> list[dict]:
    raw = resources.files("fairval").joinpath("data/german.data").read_text()
    out = []
    for line in raw.splitlines():
        f = line.split()
        if not f:
            continue
        out.append(
            {
                "credit_history": _CREDIT_HISTORY[f[2]],
                "savings": _SAVINGS[f[5]],
                "employment": _EMPLOYMENT[f[6]],
                "sex": _SEX[f[8]],
                "age": ">25" if int(f[12]) > 25 else "<=25",
                "credit": "good" if f[20] == "1" else "bad",
            }
        )
    return out


def csv_text() -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows())
    return buf.getvalue()


def load_german(protected: str = "sex", demographics: bool = True) -> Dataset:
    return read_csv(io.StringIO(csv_text()), schema(protected, demographics))
