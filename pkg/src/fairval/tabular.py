"""Tabular datasets: CSV ingestion, one-hot encoding, standardization and
stratified splitting."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import (
    EmptyInputError,
    ParameterError,
    ParseError,
    SchemaError,
    ShapeError,
    StratificationError,
)

NUMERIC = "numeric"
ONE_HOT = "one-hot"
BINARY = "binary"
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with label and protected-attribute columns.

    Labels and group ids are small integers; ``label_names`` and
    ``group_names`` map them back to the literals found in the source.
    ``row_ids`` are positions in the source table and survive subsetting.
    """

    features: np.ndarray
    labels: np.ndarray
    protected: np.ndarray
    feature_names: tuple = ()
    positive_label: int = 1
    group_names: Mapping[int, str] = field(default_factory=dict)
    label_names: Mapping[int, str] = field(default_factory=dict)
    feature_kinds: tuple = ()
    protected_name: str = "A"
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1:
            raise EmptyInputError("a dataset needs at least one row")
        y = np.asarray(self.labels)
        a = np.asarray(self.protected)
        if y.shape != (n,) or a.shape != (n,):
            raise ShapeError(
                f"features have {n} rows but labels {y.shape} and protected {a.shape}"
            )
        if not np.all(np.isfinite(X)):
            raise ParseError("features contain non-finite values")
        rid = np.arange(n) if self.row_ids is None else np.asarray(self.row_ids)
        if rid.shape != (n,):
            raise ShapeError("row_ids must have one entry per row")
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(d))
        kinds = tuple(self.feature_kinds) or (NUMERIC,) * d
        if len(names) != d or len(kinds) != d:
            raise ShapeError("feature_names/feature_kinds must have one entry per column")
        groups = dict(self.group_names) or {int(g): str(g) for g in np.unique(a)}
        labels = dict(self.label_names) or {int(c): str(c) for c in np.unique(y)}
        set_ = object.__setattr__
        set_(self, "features", _frozen(X, np.float64))
        set_(self, "labels", _frozen(y, np.int64))
        set_(self, "protected", _frozen(a, np.int64))
        set_(self, "row_ids", _frozen(rid, np.int64))
        set_(self, "feature_names", names)
        set_(self, "feature_kinds", kinds)
        set_(self, "group_names", groups)
        set_(self, "label_names", labels)
        set_(self, "positive_label", int(self.positive_label))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def check_support(self):
        """Raise unless the positive label and every named group occur."""
        if self.positive_label not in set(self.labels.tolist()):
            raise SchemaError(f"positive label {self.positive_label} does not occur")
        present = set(self.protected.tolist())
        missing = [g for g in self.group_names if g not in present]
        if missing:
            raise SchemaError(f"protected groups {missing} have no rows")
        return self

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(
            self,
            features=self.features[idx],
            labels=self.labels[idx],
            protected=self.protected[idx],
            row_ids=self.row_ids[idx],
        )

    def with_features(self, X) -> "Dataset":
        return replace(self, features=X)

    def group_id(self, group) -> int:
        """Resolve a group given by id or by its literal name."""
        if isinstance(group, (int, np.integer)) and int(group) in self.group_names:
            return int(group)
        for gid, name in self.group_names.items():
            if name == str(group):
                return gid
        raise KeyError(group)

    def is_positive(self) -> np.ndarray:
        return self.labels == self.positive_label

    def cells(self) -> list[tuple[int, int]]:
        """Occupied (group, label) cells in ascending order."""
        pairs = set(zip(self.protected.tolist(), self.labels.tolist()))
        return sorted(pairs)


@dataclass(frozen=True)
class Schema:
    """Column roles for a CSV file.

    ``columns`` maps each feature column to ``"numeric"``, ``"one-hot"`` or
    ``"binary"`` (two levels, one 0/1 column for the second level).
    ``categories`` optionally fixes the level order of a column;
    ``label_values`` / ``protected_values`` declare the allowed literals
    (values outside a declared set are parse errors).
    """

    label: str
    protected: str
    positive: str
    columns: Mapping[str, str]
    label_values: Sequence[str] | None = None
    protected_values: Sequence[str] | None = None
    categories: Mapping[str, Sequence[str]] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Schema":
        try:
            columns = {}
            categories = dict(d.get("categories", {}))
            for name, enc in dict(d["columns"]).items():
                if isinstance(enc, Mapping):
                    # {"one-hot": [levels...]} or {"binary": [off, on]}
                    (enc, levels), = enc.items()
                    categories[name] = list(levels)
                if enc not in (NUMERIC, ONE_HOT, BINARY):
                    raise SchemaError(f"column {name!r}: unknown encoding {enc!r}")
                if enc == BINARY and len(categories.get(name, ())) != 2:
                    raise SchemaError(f"binary column {name!r} needs exactly two declared levels")
                columns[name] = enc
            return cls(
                label=d["label"],
                protected=d["protected"],
                positive=str(d["positive"]),
                columns=columns,
                label_values=d.get("label_values"),
                protected_values=d.get("protected_values"),
                categories=categories,
            )
        except KeyError as e:
            raise SchemaError(f"schema is missing key {e}") from None

    @classmethod
    def from_json(cls, path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "protected": self.protected,
            "positive": self.positive,
            "columns": dict(self.columns),
        }
        if self.label_values is not None:
            d["label_values"] = list(self.label_values)
        if self.protected_values is not None:
            d["protected_values"] = list(self.protected_values)
        if self.categories:
            d["categories"] = {k: list(v) for k, v in self.categories.items()}
        return d


def load_csv(path, schema: Schema) -> Dataset:
    """Read a comma-separated UTF-8 file with a header row."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="", encoding="utf-8") as fh:
        return read_csv(fh, schema)


def read_csv(stream: io.TextIOBase | Iterable[str], schema: Schema) -> Dataset:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or not any(h.strip() for h in header):
        raise EmptyInputError("input has no header row")
    header = [h.strip() for h in header]
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyInputError("input has a header but no data rows")
    return _encode(header, rows, schema)


def _encode(header: list[str], rows: list[list[str]], schema: Schema) -> Dataset:
    needed = [schema.label, schema.protected, *schema.columns]
    missing = [c for c in needed if c not in header]
    if missing:
        raise SchemaError(f"columns not found in header: {missing}")
    pos = {name: header.index(name) for name in needed}
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise ParseError(
                f"row {i + 1}: expected {len(header)} cells, found {len(r)}", row=i + 1
            )
    cell = lambda r, name: r[pos[name]].strip()  # noqa: E731

    label_values = _levels(
        [cell(r, schema.label) for r in rows], schema.label_values, schema.label
    )
    if schema.positive not in label_values:
        raise SchemaError(f"positive label {schema.positive!r} not among {label_values}")
    if len(label_values) == 2:
        negative = next(v for v in label_values if v != schema.positive)
        label_code = {negative: 0, schema.positive: 1}
    else:
        label_code = {v: i for i, v in enumerate(label_values)}
    group_values = _levels(
        [cell(r, schema.protected) for r in rows], schema.protected_values, schema.protected
    )
    group_code = {v: i for i, v in enumerate(group_values)}

    blocks, names, kinds = [], [], []
    for col, enc in schema.columns.items():
        raw = [cell(r, col) for r in rows]
        if enc == NUMERIC:
            vals = np.empty(len(rows))
            for i, s in enumerate(raw):
                try:
                    vals[i] = float(s)
                except ValueError:
                    raise ParseError(
                        f"row {i + 1}: column {col!r} value {s!r} is not numeric", row=i + 1
                    ) from None
                if not math.isfinite(vals[i]):
                    raise ParseError(f"row {i + 1}: column {col!r} is not finite", row=i + 1)
            blocks.append(vals[:, None])
            names.append(col)
            kinds.append(NUMERIC)
        elif enc == BINARY:
            off, on = _levels(raw, schema.categories[col], col)
            blocks.append(np.array([[v == on] for v in raw], dtype=float))
            names.append(f"{col}={on}")
            kinds.append(BINARY)
        else:
            levels = _levels(raw, schema.categories.get(col), col)
            onehot = np.zeros((len(rows), len(levels)))
            index = {v: j for j, v in enumerate(levels)}
            onehot[np.arange(len(rows)), [index[v] for v in raw]] = 1.0
            blocks.append(onehot)
            names.extend(f"{col}={v}" for v in levels)
            kinds.extend([ONE_HOT] * len(levels))

    X = np.hstack(blocks) if blocks else np.zeros((len(rows), 0))
    y = np.array([label_code[cell(r, schema.label)] for r in rows])
    a = np.array([group_code[cell(r, schema.protected)] for r in rows])
    ds = Dataset(
        features=X,
        labels=y,
        protected=a,
        feature_names=tuple(names),
        positive_label=label_code[schema.positive],
        group_names={i: v for v, i in group_code.items()},
        label_names={i: v for v, i in label_code.items()},
        feature_kinds=tuple(kinds),
        protected_name=schema.protected,
    )
    return ds.check_support()


def _levels(values: list[str], declared, column: str) -> list[str]:
    if declared is None:
        return sorted(set(values))
    declared = [str(v) for v in declared]
    allowed = set(declared)
    for i, v in enumerate(values):
        if v not in allowed:
            raise ParseError(
                f"row {i + 1}: column {column!r} value {v!r} not in declared set {declared}",
                row=i + 1,
            )
    return declared


def standardize(train: Dataset, others: Sequence[Dataset] = (), scale_one_hot: bool = False):
    """Z-score numeric columns with the training mean and (divisor-n) sd.
    One-hot and binary indicator columns are left as 0/1 unless
    ``scale_one_hot`` is set.

    Zero-variance training columns become all-zero everywhere. Returns the
    transformed training set and a list with the transformed ``others``.
    """
    for o in others:
        if o.d != train.d:
            raise ShapeError(f"dimension mismatch: train has {train.d}, other has {o.d}")
    X = train.features
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    scaled = np.array([k == NUMERIC or scale_one_hot for k in train.feature_kinds], bool)
    constant = sd == 0

    def apply(Z):
        Z = Z.copy()
        cols = scaled & ~constant
        Z[:, cols] = (Z[:, cols] - mean[cols]) / sd[cols]
        Z[:, scaled & constant] = 0.0
        return Z

    return train.with_features(apply(X)), [o.with_features(apply(o.features)) for o in others]


@dataclass(frozen=True, eq=False)
class SplitBundle:
    train: Dataset
    reference: Dataset
    test: Dataset
    seed: int
    fractions: tuple


def _largest_remainder(total: int, fractions: Sequence[float]) -> np.ndarray:
    quota = np.array(fractions, dtype=float) * total
    base = np.floor(quota).astype(int)
    rest = total - base.sum()
    # stable sort on descending remainder: equal remainders keep index order
    order = np.argsort(-(quota - base), kind="stable")
    base[order[:rest]] += 1
    return base


def _snap(q):
    near = np.round(q)
    return np.where(np.abs(q - near) < 1e-9, near, q)


def _round_to_targets(alloc, frac, row_rest, col_rest):
    """Add 0/1 to each fractional entry so rows gain ``row_rest`` and
    columns ``col_rest``; None when no such rounding exists."""
    n_cells, n_splits = frac.shape
    g = nx.DiGraph()
    g.add_node("src")
    g.add_node("sink")
    for c in range(n_cells):
        if row_rest[c]:
            g.add_edge("src", ("c", c), capacity=int(row_rest[c]), weight=0)
        for s in range(n_splits):
            if frac[c, s] > 0:
                # larger fractional part first, then lower cell id
                cost = int(round((1.0 - frac[c, s]) * 1e6)) * (n_cells + 1) + c
                g.add_edge(("c", c), ("s", s), capacity=1, weight=cost)
    for s in range(n_splits):
        if col_rest[s]:
            g.add_edge(("s", s), "sink", capacity=int(col_rest[s]), weight=0)
    flow = nx.max_flow_min_cost(g, "src", "sink")
    out = alloc.copy()
    for c in range(n_cells):
        for s in range(n_splits):
            out[c, s] += flow.get(("c", c), {}).get(("s", s), 0)
    if not np.array_equal(out.sum(axis=1) - alloc.sum(axis=1), row_rest):
        return None
    return out


def _share_error(alloc, sizes):
    """Max over splits of (max cell-share deviation) * split size."""
    totals = alloc.sum(axis=0)
    src = sizes / sizes.sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        dev = np.abs(alloc / totals - src[:, None]).max(axis=0) * totals
    return np.nan_to_num(dev).max()


def _controlled_rounding(cell_sizes: Sequence[int], fractions: Sequence[float]) -> np.ndarray:
    """Integer allocation table (cells x splits).

    Every entry is the floor or ceiling of ``size * fraction`` (exact when
    that product is an integer), rows sum to the cell sizes and every split
    total is the floor or ceiling of its own quota. Split totals are tried
    starting from the largest-remainder choice; the first one whose
    rounding keeps each cell share within one row of the source share is
    kept. Within a choice, leftover rows go to the largest fractional
    parts, ties to the lowest cell id.
    """
    sizes = np.asarray(cell_sizes, dtype=int)
    fr = np.asarray(fractions, dtype=float)
    quota = _snap(sizes[:, None] * fr[None, :])
    alloc = np.floor(quota).astype(int)
    frac = quota - alloc
    row_rest = sizes - alloc.sum(axis=1)
    if row_rest.sum() == 0:
        return alloc
    col_quota = _snap(quota.sum(axis=0))
    lo = np.floor(col_quota).astype(int)
    free = np.flatnonzero(np.ceil(col_quota) > lo)
    extra = int(sizes.sum() - lo.sum())
    preferred = _largest_remainder(int(sizes.sum()), fr)

    choices = []
    for picked in combinations(free.tolist(), extra):
        target = lo.copy()
        target[list(picked)] += 1
        choices.append((int(np.abs(target - preferred).sum()), picked, target))
    choices.sort(key=lambda t: (t[0], t[1]))
    fallback = None
    for _, _, target in choices:
        out = _round_to_targets(alloc, frac, row_rest, target - alloc.sum(axis=0))
        if out is None:
            continue
        if _share_error(out, sizes) <= 1 + 1e-9:
            return out
        fallback = out if fallback is None else fallback
    if fallback is None:
        raise StratificationError("could not round the stratified allocation")
    return fallback


def stratified_split(data: Dataset, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> SplitBundle:
    """Split rows into train/reference/test preserving (group, label) shares."""
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or any(f <= 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
        raise ParameterError(f"fractions must be three positive reals summing to 1, got {fr}")
    cells = data.cells()
    members = [
        np.flatnonzero((data.protected == g) & (data.labels == y)) for g, y in cells
    ]
    alloc = _controlled_rounding([len(m) for m in members], fr)
    for (g, y), row in zip(cells, alloc):
        if row[0] == 0:
            raise StratificationError(f"cell (group={g}, label={y}) too small for a train row")
    rng = np.random.default_rng(seed)
    parts = [[], [], []]
    for m, row in zip(members, alloc):
        perm = m[rng.permutation(len(m))]
        cut = np.cumsum(row)
        parts[0].append(perm[: cut[0]])
        parts[1].append(perm[cut[0] : cut[1]])
        parts[2].append(perm[cut[1] :])
    idx = [np.sort(np.concatenate(p)) for p in parts]
    for name, i in zip(("train", "reference", "test"), idx):
        if len(i) == 0:
            raise StratificationError(f"{name} split is empty")
    return SplitBundle(
        train=data.subset(idx[0]),
        reference=data.subset(idx[1]),
        test=data.subset(idx[2]),
        seed=seed,
        fractions=fr,
    )


def stratified_subsample(data: Dataset, fraction: float, seed: int = 0) -> Dataset:
    """Keep ``fraction`` of the rows, drawn per (group, label) cell.

    Row order is preserved, so ``fraction=1`` returns an identical dataset.
    """
    if not 0 < fraction <= 1:
        raise ParameterError(f"fraction must lie in (0, 1], got {fraction}")
    if fraction == 1:
        return data
    cells = data.cells()
    members = [
        np.flatnonzero((data.protected == g) & (data.labels == y)) for g, y in cells
    ]
    alloc = _controlled_rounding([len(m) for m in members], (fraction, 1 - fraction))
    rng = np.random.default_rng(seed)
    keep = [m[np.sort(rng.permutation(len(m))[:k])] for m, (k, _) in zip(members, alloc)]
    idx = np.sort(np.concatenate(keep))
    if len(idx) == 0:
        raise StratificationError(f"fraction {fraction} keeps no rows")
    return data.subset(idx)
