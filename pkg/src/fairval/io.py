"""File formats: contribution matrices, valuations, weights and experiment
outputs. Floats in text files are written with 17 significant digits so a
round trip is exact."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInputError, ParseError, ShapeError
from .knn_shapley import ContributionMatrix
from .reweighting import Weights
from .valuation import Valuation

PHI_MAGIC = b"KNSV"
_HEADER = struct.Struct("<4siii")
SUM_TOLERANCE = 1e-6


def _g(x) -> str:
    return "%.17g" % x


# ------------------------------------------------------------- Phi files


def write_phi_binary(phi: ContributionMatrix, path) -> None:
    """16-byte header (magic, |D|, |T|, k as little-endian int32) then the
    matrix as row-major little-endian float64."""
    n, m = phi.values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PHI_MAGIC, n, m, phi.k))
        fh.write(np.ascontiguousarray(phi.values, dtype="<f8").tobytes())


def read_phi_binary(path) -> ContributionMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError("file too short for a contribution-matrix header")
    magic, n, m, k = _HEADER.unpack_from(raw)
    if magic != PHI_MAGIC:
        raise ParseError(f"bad magic {magic!r}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != n * m:
        raise ShapeError(f"header says {n}x{m} but body holds {body.size} values")
    return ContributionMatrix(body.reshape(n, m).astype(np.float64), k, np.arange(n), np.arange(m))


def write_phi_csv(phi: ContributionMatrix, path) -> None:
    """One row per training point; the header names reference rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["train_row_id", *(f"ref_{int(j)}" for j in phi.ref_ids)])
        for i, row in zip(phi.train_ids, phi.values):
            w.writerow([int(i), *map(_g, row)])


# ------------------------------------------------- valuations and weights


def write_valuation_csv(v: Valuation, row_ids, path) -> None:
    spec = json.dumps(v.group_spec, sort_keys=True) if v.group_spec is not None else ""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["train_row_id", "value", "kind", "group_spec", "oriented"])
        for i, x in zip(row_ids, v.values):
            w.writerow([int(i), _g(x), v.kind, spec, str(v.oriented).lower()])


def read_valuation_csv(path) -> tuple[np.ndarray, Valuation]:
    rows = _read_rows(path, ["train_row_id", "value", "kind", "group_spec", "oriented"])
    ids = np.array([int(r["train_row_id"]) for r in rows])
    spec = rows[0]["group_spec"]
    v = Valuation(
        [float(r["value"]) for r in rows],
        rows[0]["kind"],
        json.loads(spec) if spec else None,
        rows[0]["oriented"] == "true",
    )
    return ids, v


def write_weights_csv(w: Weights, row_ids, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["train_row_id", "weight"])
        for i, x in zip(row_ids, w.values):
            out.writerow([int(i), _g(x)])


def read_weights_csv(path, source_kind: str = "file") -> tuple[np.ndarray, Weights]:
    """Rejects files whose weights do not sum to the row count within 1e-6."""
    rows = _read_rows(path, ["train_row_id", "weight"])
    ids = np.array([int(r["train_row_id"]) for r in rows])
    vals = np.array([float(r["weight"]) for r in rows])
    if abs(vals.sum() - len(vals)) > SUM_TOLERANCE:
        raise ParseError(f"weights sum to {vals.sum()!r}, expected {len(vals)}")
    return ids, Weights(vals, source_kind=source_kind)


def _read_rows(path, required: Sequence[str]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyInputError(f"{path} is empty")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise EmptyInputError(f"{path} has no data rows")
    return rows


# ------------------------------------------------------ experiment output


def write_jsonl(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True, allow_nan=True) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise EmptyInputError(f"{path} contains no records")
    out = []
    for i, ln in enumerate(lines, 1):
        try:
            out.append(json.loads(ln))
        except json.JSONDecodeError as e:
            raise ParseError(f"line {i}: {e.msg}", row=i) from None
    return out


def write_aggregate_csv(points, path, metrics: Sequence[str]) -> None:
    """Wide table: one row per (arm, x) with mean and sd columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["arm", "x", "n_ok", "n_failed", *(f"{m}_{s}" for m in metrics for s in ("mean", "sd"))]
        )
        for p in points:
            cells = []
            for m in metrics:
                cells += [_g(p.mean[m]), _g(p.sd[m])]
            w.writerow([p.arm, "" if p.x is None else _g(p.x), p.n_ok, p.n_failed, *cells])


def write_long_csv(points, path, metrics: Sequence[str]) -> None:
    """Plot-ready long format: x, metric, mean, sd, arm."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "metric", "mean", "sd", "arm"])
        for p in points:
            for m in metrics:
                w.writerow(["" if p.x is None else _g(p.x), m, _g(p.mean[m]), _g(p.sd[m]), p.arm])


def write_rows_csv(rows: Sequence[dict], path) -> None:
    if not rows:
        raise EmptyInputError("no rows to write")
    fields = list(rows[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _g(v) if isinstance(v, float) else v for k, v in r.items()})


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")

