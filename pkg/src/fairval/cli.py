"""Command-line front end.

Each invocation writes into one output directory: a ``manifest.json``
(flags, seed, package versions, hardware string) plus the artifacts of the
subcommand. Errors are printed to stderr as a single JSON line and mapped
to exit codes 2 (usage), 3 (data) and 4 (numeric / degenerate).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .errors import EmptyInputError, FairvalError, GroupSupportError, ParameterError
from .harness import (
    DEFAULT_ARMS,
    METRICS,
    ExperimentConfig,
    hardware_string,
    run_pruning,
    run_reference_ablation,
    run_reweight_experiment,
    run_tradeoff_sweep,
    timing_benchmark,
    aggregate,
    load_source,
)
from .knn_shapley import KnnConfig, default_workers, pairwise_contributions
from .model import ModelSpec
from .reweighting import interpolate, minmax_normalize_to_weights
from .tabular import Schema, load_csv, standardize, stratified_split
from .valuation import compute_valuation

VALUE_FUNCTIONS = ("acc", "eop", "eodds", "eop-ay", "eop-multi")


class UsageError(FairvalError):
    exit_code = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pair(text: str) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise argparse.ArgumentTypeError("--groups takes two comma-separated groups, e.g. 0,1")
    return tuple(int(p) if p.lstrip("-").isdigit() else p for p in parts)


def _workers(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("--workers must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairval", description="k-NN Shapley fairness valuation and re-weighting")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--output", "-o", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--k", type=int, default=1)
    common.add_argument("--workers", type=_workers, default=None, help="default: $FAIRVAL_WORKERS or 1")

    data = _Parser(add_help=False)
    src = data.add_mutually_exclusive_group()
    src.add_argument("--input", help="training CSV (or the full dataset when splitting)")
    src.add_argument("--dataset", choices=["german"], help="bundled dataset")
    src.add_argument("--synthetic", choices=["case1", "two-gaussians"])
    data.add_argument("--schema", help="column-role JSON for --input")
    data.add_argument("--protected", default="sex", help="german: sex or age")
    data.add_argument("--n", type=int, default=2000, help="synthetic size (case1) or rows per class")
    data.add_argument("--overlap", type=float, default=0.3)
    data.add_argument("--fractions", type=_floats, default=(0.7, 0.15, 0.15), help="train,reference,test")
    data.add_argument("--no-standardize", action="store_true")
    data.add_argument("--groups", type=_pair, default=None, help="protected pair a,b (ids or names)")
    data.add_argument("--value-function", choices=VALUE_FUNCTIONS, default="eodds")

    p = sub.add_parser("valuate", parents=[common, data], help="contribution matrix and valuation files")
    p.add_argument("--reference", help="reference CSV; otherwise --fractions splits --input")
    p.add_argument("--bins", type=int, default=20)

    experiment = _Parser(add_help=False)
    experiment.add_argument("--n-seeds", type=int, default=50)
    experiment.add_argument("--epochs", type=int, default=ModelSpec.epochs)
    experiment.add_argument("--step-size", type=float, default=ModelSpec.step)
    experiment.add_argument("--l2", type=float, default=ModelSpec.l2)
    experiment.add_argument("--threshold", type=float, default=ModelSpec.threshold)

    p = sub.add_parser("reweight", parents=[common, data, experiment], help="valuation plus a weights file")
    p.add_argument("--reference")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument(
        "--arms",
        help=f"also run the multi-seed comparison of these arms (e.g. {','.join(DEFAULT_ARMS)})",
    )
    p = sub.add_parser("tradeoff", parents=[common, data, experiment], help="alpha sweep")
    p.add_argument("--alphas", type=_floats, default=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0))
    p = sub.add_parser("prune", parents=[common, data, experiment], help="pruning curves")
    p.add_argument("--step", type=float, default=0.005)
    p.add_argument("--cap", type=float, default=0.15)
    p = sub.add_parser("ablate-reference", parents=[common, data, experiment], help="reference-size ablation")
    p.add_argument("--ref-fractions", type=_floats, default=(0.05, 0.1, 0.25, 0.5, 0.75, 1.0))

    p = sub.add_parser("bench", parents=[common], help="runtime of the contribution matrix")
    p.add_argument("--sizes", type=_ints, default=(1000, 5000, 10000))
    p.add_argument("--dims", type=_ints, default=(18,))
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--ref-ratio", type=float, default=0.2143)

    p = sub.add_parser("report", help="aggregate table from a JSON-lines file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", "-o", help="directory for report.md (default: stdout only)")
    p.add_argument("--format", choices=["markdown", "text"], default="markdown")
    return parser


# ------------------------------------------------------------------ helpers


def _versions() -> dict:
    import networkx
    import scipy

    return {"fairval": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "networkx": networkx.__version__}


def _outdir(args) -> Path:
    if not args.output:
        raise UsageError("--output is required")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


def _manifest(out: Path, args) -> None:
    flags = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())}
    flags["workers"] = _nworkers(args)
    io.write_json(
        {"command": args.command, "flags": flags, "seed": getattr(args, "seed", None),
         "versions": _versions(), "hardware": hardware_string()},
        out / "manifest.json",
    )


def _nworkers(args) -> int:
    return args.workers if getattr(args, "workers", None) else default_workers()


def _source(args) -> dict:
    if args.dataset == "german":
        return {"kind": "german", "protected": args.protected}
    if args.synthetic == "case1":
        return {"kind": "case1", "n": args.n, "overlap": args.overlap}
    if args.synthetic == "two-gaussians":
        return {"kind": "two-gaussians", "n_per_class": args.n}
    if args.input:
        if not args.schema:
            raise UsageError("--input needs --schema")
        return {"kind": "csv", "path": args.input, "schema": args.schema}
    raise UsageError("give one of --input, --dataset or --synthetic")


def _load_pair(args):
    """(train, reference) for valuate / reweight."""
    if getattr(args, "reference", None):
        if not args.input or not args.schema:
            raise UsageError("--reference needs --input and --schema")
        schema = Schema.from_json(args.schema)
        train, ref = load_csv(args.input, schema), load_csv(args.reference, schema)
    else:
        data = load_source(_source(args), args.seed)
        split = stratified_split(data, args.fractions, args.seed)
        train, ref = split.train, split.reference
    if not args.no_standardize:
        train, (ref,) = standardize(train, [ref])
    return train, ref


def _groups(args, ref):
    if args.groups is not None:
        return args.groups
    g = sorted(ref.group_names)
    if len(g) < 2 and args.value_function in ("eop", "eodds"):
        raise GroupSupportError("a group pair needs at least two protected groups")
    return tuple(g[:2])


def _histogram(values, train, bins: int) -> list[dict]:
    """Counts of the valuation per (group, label) cell on shared bin edges."""
    if bins < 1:
        raise ParameterError("--bins must be >= 1")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    rows = []
    for g, y in sorted({(int(a), int(b)) for a, b in zip(train.protected, train.labels)}):
        vals = values[(train.protected == g) & (train.labels == y)]
        counts, _ = np.histogram(vals, edges)
        for b in range(bins):
            rows.append(
                {
                    "group": train.group_names.get(g, str(g)),
                    "label": train.label_names.get(y, str(y)),
                    "bin_lo": float(edges[b]),
                    "bin_hi": float(edges[b + 1]),
                    "count": int(counts[b]),
                }
            )
    return rows


# -------------------------------------------------------------- commands


def cmd_valuate(args, out: Path):
    train, ref = _load_pair(args)
    phi = pairwise_contributions(train, ref, KnnConfig(args.k), workers=_nworkers(args))
    v = compute_valuation(args.value_function, phi, ref, _groups(args, ref))
    io.write_phi_binary(phi, out / "phi.bin")
    io.write_phi_csv(phi, out / "phi.csv")
    io.write_valuation_csv(v, train.row_ids, out / "valuation.csv")
    io.write_rows_csv(_histogram(v.values, train, args.bins), out / "histogram.csv")
    return train, v


def cmd_reweight(args, out: Path):
    train, v = cmd_valuate(args, out)
    w = interpolate(minmax_normalize_to_weights(v), args.alpha)
    io.write_weights_csv(w, train.row_ids, out / "weights.csv")
    if args.arms:
        arms = tuple(a.strip() for a in args.arms.split(",") if a.strip())
        _write_run(run_reweight_experiment(_config(args, arms=arms)), out, "experiment")


def _config(args, **extra) -> ExperimentConfig:
    spec = ModelSpec(epochs=args.epochs, step=args.step_size, l2=args.l2, threshold=args.threshold, seed=args.seed)
    return ExperimentConfig(
        source=_source(args),
        fractions=tuple(args.fractions),
        n_seeds=args.n_seeds,
        seed=args.seed,
        valuation=args.value_function,
        groups=args.groups,
        k=args.k,
        model=spec,
        standardize=not args.no_standardize,
        workers=_nworkers(args),
        **extra,
    )


def _write_run(result, out: Path, stem: str):
    io.write_jsonl(result.records, out / f"{stem}.jsonl")
    io.write_aggregate_csv(result.points, out / f"{stem}_aggregate.csv", METRICS)
    io.write_long_csv(result.points, out / f"{stem}_long.csv", METRICS)


def cmd_tradeoff(args, out):
    _write_run(run_tradeoff_sweep(_config(args, alphas=tuple(args.alphas))), out, "tradeoff")


def cmd_prune(args, out):
    _write_run(run_pruning(_config(args, prune_step=args.step, prune_cap=args.cap)), out, "prune")


def cmd_ablate(args, out):
    _write_run(run_reference_ablation(_config(args), args.ref_fractions), out, "ablation")


def cmd_bench(args, out):
    rows = timing_benchmark(args.sizes, args.dims, args.k, args.repeats, args.ref_ratio, args.seed, _nworkers(args))
    io.write_rows_csv(rows, out / "bench.csv")


def render_report(records, fmt: str = "markdown") -> str:
    points = aggregate(records)
    cols = ["arm", "x", "n_ok", "n_failed", *(m for m in METRICS)]
    lines = []
    for p in points:
        cells = [p.arm, "" if p.x is None else f"{p.x:g}", str(p.n_ok), str(p.n_failed)]
        cells += [f"{p.mean[m]:.4f} ± {p.sd[m]:.4f}" for m in METRICS]
        lines.append(cells)
    if fmt == "markdown":
        rows = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        rows += ["| " + " | ".join(c) + " |" for c in lines]
    else:
        widths = [max(len(r[i]) for r in [cols, *lines]) for i in range(len(cols))]
        rows = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [cols, *lines]]
    return "\n".join(rows) + "\n"


def cmd_report(args):
    records = io.read_jsonl(args.input)
    if not records:
        raise EmptyInputError(f"{args.input} contains no records")
    text = render_report(records, args.format)
    sys.stdout.write(text)
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.md").write_text(text, encoding="utf-8")


COMMANDS = {
    "valuate": cmd_valuate,
    "reweight": cmd_reweight,
    "tradeoff": cmd_tradeoff,
    "prune": cmd_prune,
    "ablate-reference": cmd_ablate,
    "bench": cmd_bench,
}


def _fail(err: Exception, code: int) -> int:
    payload = {"error": type(err).__name__, "message": str(err), "exit_code": code}
    row = getattr(err, "row", None)
    if row is not None:
        payload["row"] = row
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "report":
            cmd_report(args)
            return 0
        out = _outdir(args)
        _manifest(out, args)
        COMMANDS[args.command](args, out)
        return 0
    except FairvalError as err:
        return _fail(err, err.exit_code)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as err:
        return _fail(err, 3)
    except (ValueError, TypeError) as err:
        return _fail(err, 2)


if __name__ == "__main__":
    sys.exit(main())
