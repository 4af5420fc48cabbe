"""Multi-seed experiment loops: re-weighting comparison, alpha trade-off
sweep, pruning curves, reference-size ablation and the runtime benchmark.

Every loop is a pure function of its config. Seed ``i`` gets its own
generator state spawned from ``config.seed``, so running seeds on several
threads cannot change any number.
"""

from __future__ import annotations

import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from . import german
from .errors import FairvalError, ParameterError
from .knn_shapley import KnnConfig, pairwise_contributions
from .metrics import FairnessReport, fairness_report
from .model import ModelSpec, train_weighted
from .reweighting import Weights, group_reweigh, interpolate, minmax_normalize_to_weights, uniform
from .synthetic import synth_case1, synth_two_gaussians
from .tabular import Dataset, Schema, load_csv, standardize, stratified_split, stratified_subsample
from .valuation import compute_valuation, phi_acc

METRICS = ("accuracy", "macro_f1", "eop_abs", "eodds_abs", "eop_signed", "eodds_signed")
DEFAULT_ARMS = ("uniform", "acc", "eop", "eodds", "group-rw")


@dataclass(frozen=True)
class ExperimentConfig:
    """``source`` is a dict: ``{"kind": "german", "protected": "sex"}``,
    ``{"kind": "case1", "n": 2000, "overlap": 0.3}``,
    ``{"kind": "two-gaussians", "n_per_class": 100, ...}`` or
    ``{"kind": "csv", "path": ..., "schema": {...}}``. Synthetic sources are
    redrawn for every seed."""

    source: dict = field(default_factory=lambda: {"kind": "case1", "n": 2000, "overlap": 0.3})
    fractions: tuple = (0.70, 0.15, 0.15)
    n_seeds: int = 50
    seed: int = 0
    valuation: str = "eodds"
    groups: tuple | None = None
    arms: tuple = DEFAULT_ARMS
    alphas: tuple = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    prune_step: float = 0.005
    prune_cap: float = 0.15
    prune_arms: tuple = ("rand",)
    k: int = 1
    model: ModelSpec = field(default_factory=ModelSpec)
    standardize: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ParameterError("n_seeds must be >= 1")
        if not 0 < self.prune_step <= self.prune_cap < 1:
            raise ParameterError("need 0 < prune_step <= prune_cap < 1")

    @property
    def prune_steps(self) -> int:
        """Number of removal steps after step 0 (30 for 0.5% up to 15%)."""
        return int(Fraction(str(self.prune_cap)) / Fraction(str(self.prune_step)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = asdict(self.model)
        return d


@dataclass(frozen=True)
class CurvePoint:
    x: Any
    arm: str
    mean: dict
    sd: dict
    n_ok: int
    n_failed: int

    def to_dict(self) -> dict:
        return asdict(self)


class RunResult(NamedTuple):
    points: list
    records: list


# ---------------------------------------------------------------- plumbing


def load_source(source: dict, seed: int) -> Dataset:
    kind = source.get("kind")
    if kind == "german":
        return german.load_german(source.get("protected", "sex"), source.get("demographics", True))
    if kind == "case1":
        return synth_case1(int(source.get("n", 2000)), float(source.get("overlap", 0.3)), seed)
    if kind == "two-gaussians":
        return synth_two_gaussians(
            int(source.get("n_per_class", 100)),
            source.get("means", [[0.0, 0.0], [2.0, 2.0]]),
            source.get("covariances", [np.eye(2).tolist(), np.eye(2).tolist()]),
            seed,
        )
    if kind == "csv":
        schema = source["schema"]
        schema = Schema.from_dict(schema) if isinstance(schema, dict) else Schema.from_json(schema)
        return load_csv(source["path"], schema)
    raise ParameterError(f"unknown data source kind {kind!r}")


def seed_states(config: ExperimentConfig) -> list[tuple[int, int, int]]:
    """(data seed, split seed, auxiliary seed) for each run index."""
    children = np.random.SeedSequence(config.seed).spawn(config.n_seeds)
    return [tuple(int(s) for s in c.generate_state(3)) for c in children]


def _groups(config: ExperimentConfig, data: Dataset) -> tuple[int, int]:
    if config.groups is None:
        g = sorted(data.group_names)
        return g[0], g[1]
    return tuple(data.group_id(g) for g in config.groups)


class _Run(NamedTuple):
    train: Dataset
    reference: Dataset
    test: Dataset
    groups: tuple
    aux_seed: int


def _prepare(config: ExperimentConfig, state) -> _Run:
    data_seed, split_seed, aux_seed = state
    data = load_source(config.source, data_seed)
    split = stratified_split(data, config.fractions, split_seed)
    train, ref, test = split.train, split.reference, split.test
    if config.standardize:
        train, (ref, test) = standardize(train, [ref, test])
    return _Run(train, ref, test, _groups(config, data), aux_seed)


def _evaluate(config, train: Dataset, test: Dataset, weights, groups) -> FairnessReport:
    model = train_weighted(config.model, train, weights)
    pred = model.predict(test.features)
    return fairness_report(test.labels, pred, test.protected, test.positive_label, *groups)


def _arm_weights(arm: str, phi, train, ref, groups) -> Weights:
    if arm == "uniform":
        return uniform(train.n)
    if arm == "group-rw":
        return group_reweigh(train)
    return minmax_normalize_to_weights(compute_valuation(arm, phi, ref, groups))


def _record(i, state, arm, x, report=None, error=None) -> dict:
    rec = {"seed_index": i, "seed": state[1], "arm": arm, "x": x}
    if error is None:
        rec["ok"] = True
        rec.update(report.to_dict())
    else:
        rec["ok"] = False
        rec["error"] = f"{type(error).__name__}: {error}"
    return rec


def _map_seeds(config: ExperimentConfig, fn: Callable[[int, tuple], list]) -> list:
    states = seed_states(config)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(fn, range(len(states)), states))
    else:
        chunks = [fn(i, s) for i, s in enumerate(states)]
    return [r for chunk in chunks for r in chunk]


def aggregate(records: Sequence[dict], order: Sequence | None = None) -> list[CurvePoint]:
    """Mean and sample standard deviation per (arm, x) over successful seeds."""
    keys = []
    for r in records:
        key = (r["arm"], r["x"])
        if key not in keys:
            keys.append(key)
    points = []
    for arm, x in keys:
        rows = [r for r in records if r["arm"] == arm and r["x"] == x]
        ok = [r for r in rows if r["ok"]]
        mean, sd = {}, {}
        for m in METRICS:
            vals = np.array([r[m] for r in ok], dtype=float)
            mean[m] = float(vals.mean()) if len(vals) else math.nan
            sd[m] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        points.append(CurvePoint(x, arm, mean, sd, len(ok), len(rows) - len(ok)))
    return points


def _failed_seed(i, state, arms, xs, err):
    return [_record(i, state, arm, x, error=err) for arm in arms for x in xs]


# ----------------------------------------------------------------- loops


def run_reweight_experiment(config: ExperimentConfig) -> RunResult:
    """Per seed: split, contributions, valuation per arm, weights, weighted
    fit, test evaluation. One aggregate point per arm (x is None)."""

    def one(i, state):
        try:
            run = _prepare(config, state)
            phi = pairwise_contributions(run.train, run.reference, KnnConfig(config.k), workers=1)
        except FairvalError as err:
            return _failed_seed(i, state, config.arms, [None], err)
        out = []
        for arm in config.arms:
            try:
                w = _arm_weights(arm, phi, run.train, run.reference, run.groups)
                rep = _evaluate(config, run.train, run.test, w, run.groups)
                out.append(_record(i, state, arm, None, rep))
            except FairvalError as err:
                out.append(_record(i, state, arm, None, error=err))
        return out

    records = _map_seeds(config, one)
    return RunResult(aggregate(records), records)


def run_tradeoff_sweep(config: ExperimentConfig) -> RunResult:
    """Weights ``(1 - alpha) * 1 + alpha * w`` for each alpha in the grid."""
    alphas = [float(a) for a in config.alphas]
    if 0.0 not in alphas or 1.0 not in alphas or not all(0 <= a <= 1 for a in alphas):
        raise ParameterError("alpha grid must lie in [0, 1] and include both 0 and 1")
    if len(set(alphas)) != len(alphas):
        raise ParameterError("alpha grid has repeated values")
    arm = config.valuation

    def one(i, state):
        try:
            run = _prepare(config, state)
            phi = pairwise_contributions(run.train, run.reference, KnnConfig(config.k), workers=1)
            w = _arm_weights(arm, phi, run.train, run.reference, run.groups)
        except FairvalError as err:
            return _failed_seed(i, state, [arm], alphas, err)
        out = []
        for alpha in alphas:
            try:
                rep = _evaluate(config, run.train, run.test, interpolate(w, alpha), run.groups)
                out.append(_record(i, state, arm, alpha, rep))
            except FairvalError as err:
                out.append(_record(i, state, arm, alpha, error=err))
        return out

    records = _map_seeds(config, one)
    return RunResult(aggregate(records), records)


def removal_counts(n: int, step: float = 0.005, cap: float = 0.15) -> list[int]:
    """Cumulative removals ``floor(s * step * n)`` for s = 0 .. cap/step,
    computed in exact rational arithmetic."""
    fstep, fcap = Fraction(str(step)), Fraction(str(cap))
    steps = int(fcap / fstep)
    return [math.floor(s * fstep * n) for s in range(steps + 1)]


def _removal_order(arm, phi, run: _Run, config) -> np.ndarray:
    train = run.train
    if arm == "rand":
        return np.random.default_rng(run.aux_seed).permutation(train.n)
    if arm == "acc":
        values = phi_acc(phi).values
    else:
        values = compute_valuation(arm, phi, run.reference, run.groups).values
    # ascending value, ties by train row id
    return np.lexsort((train.row_ids, values))


def run_pruning(config: ExperimentConfig) -> RunResult:
    """Remove the lowest-valued training points cumulatively and refit with
    uniform weights; x is the removed fraction."""
    arms = (config.valuation, *config.prune_arms)

    def one(i, state):
        xs = None
        try:
            run = _prepare(config, state)
            counts = removal_counts(run.train.n, config.prune_step, config.prune_cap)
            xs = [c / run.train.n for c in counts]
            phi = pairwise_contributions(run.train, run.reference, KnnConfig(config.k), workers=1)
            orders = {arm: _removal_order(arm, phi, run, config) for arm in arms}
        except FairvalError as err:
            steps = config.prune_steps + 1
            fallback = xs or [float(s * Fraction(str(config.prune_step))) for s in range(steps)]
            return _failed_seed(i, state, arms, fallback, err)
        out = []
        for arm in arms:
            for count, x in zip(counts, xs):
                keep = np.sort(orders[arm][count:])
                sub = run.train.subset(keep)
                try:
                    rep = _evaluate(config, sub, run.test, None, run.groups)
                    out.append(_record(i, state, arm, x, rep))
                except FairvalError as err:
                    out.append(_record(i, state, arm, x, error=err))
        return out

    records = _map_seeds(config, one)
    # x is the realised fraction, which depends on |D|; aggregate by step index
    for r in records:
        r["step"] = None
    by_seed = {}
    for r in records:
        by_seed.setdefault((r["seed_index"], r["arm"]), []).append(r)
    for rows in by_seed.values():
        for s, r in enumerate(rows):
            r["step"] = s
    step = Fraction(str(config.prune_step))
    tmp = [dict(r, x=float(r["step"] * step)) for r in records]
    return RunResult(aggregate(tmp), records)


def run_reference_ablation(config: ExperimentConfig, fractions: Sequence[float]) -> RunResult:
    """Re-run the ``config.valuation`` arm with stratified subsets of the
    reference split; x is the kept fraction of the reference set."""
    fractions = [float(f) for f in fractions]
    if not fractions or any(not 0 < f <= 1 for f in fractions):
        raise ParameterError("reference fractions must lie in (0, 1]")
    arm = config.valuation

    def one(i, state):
        try:
            run = _prepare(config, state)
        except FairvalError as err:
            return _failed_seed(i, state, [arm], fractions, err)
        out = []
        for f in fractions:
            try:
                ref = stratified_subsample(run.reference, f, run.aux_seed)
                phi = pairwise_contributions(run.train, ref, KnnConfig(config.k), workers=1)
                w = _arm_weights(arm, phi, run.train, ref, run.groups)
                rep = _evaluate(config, run.train, run.test, w, run.groups)
                out.append(_record(i, state, arm, f, rep))
            except FairvalError as err:
                out.append(_record(i, state, arm, f, error=err))
        return out

    records = _map_seeds(config, one)
    return RunResult(aggregate(records), records)


def hardware_string() -> str:
    cpu = platform.processor() or platform.machine()
    return f"{platform.system()} {platform.release()} | {cpu} | {os.cpu_count()} cpus | python {platform.python_version()} | numpy {np.__version__}"


def timing_benchmark(
    sizes: Sequence[int],
    dims: Sequence[int],
    k: int = 1,
    repeats: int = 10,
    ref_ratio: float = 0.25,
    seed: int = 0,
    workers: int = 1,
) -> list[dict]:
    """Wall-clock seconds of :func:`pairwise_contributions` on Gaussian
    features with random binary labels, |T| = ref_ratio * |D|."""
    rows = []
    hw = hardware_string()
    for n in sizes:
        for d in dims:
            rng = np.random.default_rng([seed, n, d])
            m = max(1, int(round(ref_ratio * n)))
            train = Dataset(rng.standard_normal((n, d)), rng.integers(0, 2, n), np.zeros(n, int))
            ref = Dataset(rng.standard_normal((m, d)), rng.integers(0, 2, m), np.zeros(m, int))
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                phi = pairwise_contributions(train, ref, KnnConfig(k), workers=workers)
                times.append(time.perf_counter() - t0)
                del phi
            times = np.array(times)
            rows.append(
                {
                    "n_train": n,
                    "n_ref": m,
                    "d": d,
                    "k": k,
                    "seconds_mean": float(times.mean()),
                    "seconds_sd": float(times.std(ddof=1)) if repeats > 1 else 0.0,
                    "runs": repeats,
                    "hardware": hw,
                }
            )
    return rows
