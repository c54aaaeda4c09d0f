"""Experiment orchestration: epsilon sweeps of the naive attack on noisy
counts, l sweeps of the deFinetti attack, and CSV result tables.

Every random stream is derived from ``(master seed, stream name, parameter,
repetition)``, so a repetition's result does not depend on which other
repetitions or grid points run alongside it.
"""

from __future__ import annotations

import csv
import io
import math
import time
import zlib
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from . import anatomy, definetti
from .classifier import (
    NBModel,
    evidence_codes,
    exact_counts,
    fit,
    high_confidence,
    predict_codes,
    workload_domains,
)
from .dataset import (
    DatasetConfig,
    Table,
    dataset_config_from_mapping,
    encode,
    load_dataset,
    load_dataset_config,
)
from .errors import ConfigError, DataError, EligibilityError
from .mechanism import MECHANISMS, PrivacyParams, clip_nonnegative, release
from .workload import CountWorkload

DEFAULT_EPSILONS = (0.01, 0.05, 0.1, 0.5, 1.0, 10.0, 100.0)
CSV_FIELDS = ("kind", "param", "rep", "split", "method", "accuracy", "subset_size", "seconds")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    target: str | None = None
    qi: tuple[str, ...] | None = None
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    mechanism: str = "geometric"
    repetitions: int = 9
    threshold: float = 0.8
    l_values: tuple[int, ...] = (2, 3, 4, 5, 6, 7)
    merge_factors: tuple[int, ...] = (1,)
    definetti_repetitions: int = 5
    iterations: int = 1000
    window: int = 100
    methods: tuple[str, ...] = definetti.METHODS
    seed: int = 0
    out: Path | None = None
    timing: bool = False

    def __post_init__(self):
        if self.repetitions < 1 or self.definetti_repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie strictly between 0 and 1")
        if any(not e > 0 for e in self.epsilons):
            raise ConfigError("epsilon values must be positive")
        if any(l < 2 for l in self.l_values):
            raise ConfigError("l values must be at least 2")
        if any(f < 1 for f in self.merge_factors):
            raise ConfigError("merge factors must be at least 1")
        if self.iterations < 1 or self.window < 1:
            raise ConfigError("iterations and window must be at least 1")
        if self.mechanism not in MECHANISMS:
            raise ConfigError(f"unknown mechanism {self.mechanism!r}; choose from {MECHANISMS}")
        bad = set(self.methods) - set(definetti.METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}")

    @property
    def schema_dataset(self) -> DatasetConfig:
        if self.target is None:
            return self.dataset
        return self.dataset.retarget(self.target, self.qi)


_KEYS = {
    "dataset", "target", "qi", "epsilons", "mechanism", "repetitions", "threshold",
    "l_values", "merge_factors", "definetti_repetitions", "iterations", "window",
    "methods", "seed", "out", "timing",
}


def load_experiment_config(path, **overrides) -> ExperimentConfig:
    """Read an experiment YAML file. ``dataset`` may name a dataset YAML
    (relative to this file) or hold the dataset mapping inline. Keyword
    overrides whose value is None are ignored."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: expected a mapping")
    if "attributes" in raw:  # a bare dataset config
        raw = {"dataset": raw}
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    ds = raw.get("dataset")
    if ds is None:
        raise ConfigError(f"{path}: missing 'dataset'")
    if isinstance(ds, str):
        dataset = load_dataset_config(path.parent / ds)
    elif isinstance(ds, Mapping):
        dataset = dataset_config_from_mapping(ds, path.parent)
    else:
        raise ConfigError(f"{path}: 'dataset' must be a path or a mapping")
    kw = {k: v for k, v in raw.items() if k != "dataset"}
    kw.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("qi", "epsilons", "l_values", "merge_factors", "methods"):
        if key in kw and kw[key] is not None:
            kw[key] = tuple(kw[key])
    if "epsilons" in kw:
        kw["epsilons"] = tuple(float(e) for e in kw["epsilons"])
    if kw.get("out") is not None:
        kw["out"] = Path(kw["out"])
    try:
        return ExperimentConfig(dataset=dataset, **kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class ResultRow:
    kind: str
    param: str
    rep: int
    split: str
    method: str
    accuracy: float
    subset_size: int
    seconds: float | None = None

    def __post_init__(self):
        if not (math.isnan(self.accuracy) or 0.0 <= self.accuracy <= 1.0):
            raise DataError(f"accuracy {self.accuracy} outside [0, 1]")


# ---------------------------------------------------------------------------
# building blocks


def derive_rng(seed: int, stream: str, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, stream, *keys)``; keys are hashed
    through their ``repr`` so floats and strings are stable across runs."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(stream.encode())]
    words += [zlib.crc32(repr(k).encode()) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(words))


def accuracy(predictions: Sequence, truth: Sequence) -> float:
    predictions = np.asarray(predictions, dtype=object)
    truth = np.asarray(truth, dtype=object)
    if len(predictions) != len(truth):
        raise DataError("predictions and truth differ in length")
    if len(truth) == 0:
        raise DataError("accuracy of an empty prediction set is undefined")
    return float(np.mean(predictions == truth))


def baseline_majority(table: Table) -> tuple[str, float]:
    """Most frequent SA value (ties: lexicographically first) and its frequency."""
    if table.n == 0:
        raise DataError("empty table has no majority value")
    counts = Counter(table.column(table.schema.sa).tolist())
    value, k = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return value, k / table.n


def _param(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def _sa_codes(table: Table, sa_domain) -> np.ndarray:
    return encode(table.column(table.schema.sa), sa_domain)


def naive_repetition(counts: CountWorkload, params: PrivacyParams, rng) -> NBModel:
    """counts -> noise -> clip -> fit."""
    return fit(clip_nonnegative(release(counts, params, rng)))


def time_naive_repetition(cfg: DatasetConfig, epsilon: float = 1.0, seed: int = 0) -> float:
    """Wall time of load -> counts -> noise -> fit -> predict every row."""
    start = time.perf_counter()
    train, _ = load_dataset(cfg, seed)
    counts = exact_counts(train)
    model = naive_repetition(counts, PrivacyParams(epsilon, counts.sensitivity), np.random.default_rng(seed))
    predict_codes(model, evidence_codes(model, train))
    return time.perf_counter() - start


# ---------------------------------------------------------------------------
# experiments


def run_naive_attack(cfg: ExperimentConfig) -> list[ResultRow]:
    """Accuracy of the Naive Bayes attack on noisy counts, per epsilon and repetition.

    Emits ``baseline`` rows (majority value of the training table), one
    ``noiseless`` row per split, then per (epsilon, repetition) a ``naive``
    row per split and a ``naive-confident`` row per split restricted to rows
    whose top posterior exceeds ``cfg.threshold``.
    """
    ds = cfg.schema_dataset
    train, test = load_dataset(ds, cfg.seed)
    splits = [("train", train)] + ([("test", test)] if test.n else [])
    counts = exact_counts(train)
    domains, sa_domain = workload_domains(train)
    truth = {name: _sa_codes(t, sa_domain) for name, t in splits}
    rows: list[ResultRow] = []

    majority, _ = baseline_majority(train)
    for name, t in splits:
        acc = float(np.mean(t.column(t.schema.sa) == majority))
        rows.append(ResultRow("baseline", "", 0, name, "baseline", acc, t.n))

    def evaluate(kind_prefix, param, rep, model, seconds):
        for name, t in splits:
            X = evidence_codes(model, t)
            pred = predict_codes(model, X)
            rows.append(ResultRow(kind_prefix, param, rep, name, "naive",
                                  float(np.mean(pred == truth[name])), t.n, seconds))
            _, acc, size = high_confidence(model, t, cfg.threshold)
            rows.append(ResultRow(kind_prefix + "-confident", param, rep, name, "naive", acc, size, None))

    evaluate("noiseless", "inf", 0, fit(counts), None)
    for eps in cfg.epsilons:
        params = PrivacyParams(eps, counts.sensitivity, cfg.mechanism)
        for rep in range(cfg.repetitions):
            start = time.perf_counter()
            model = naive_repetition(counts, params, derive_rng(cfg.seed, "naive", float(eps), rep))
            seconds = time.perf_counter() - start if cfg.timing else None
            evaluate("naive", _param(float(eps)), rep, model, seconds)
    return rows


def run_definetti_attack(cfg: ExperimentConfig, traces: dict | None = None) -> list[ResultRow]:
    """Accuracy of the deFinetti attack per (l, merge factor, repetition, method).

    The Anatomy release for (l, repetition) is shared by every merge factor,
    and so is the sampler's random stream, so merge factor 1 reproduces the
    unmerged run exactly. Eligibility of every l is checked before any
    sampling. When ``traces`` is a dict it receives the L1 series per run.
    """
    ds = cfg.schema_dataset
    train, _ = load_dataset(ds, cfg.seed)
    for l in cfg.l_values:
        elig = anatomy.check_eligibility(train, l)
        if not elig.feasible:
            raise EligibilityError(
                f"l={l} infeasible: {elig.value!r} occurs {elig.max_count} times in {elig.n} rows",
                value=elig.value, count=elig.max_count,
            )
    rows: list[ResultRow] = []
    majority, freq = baseline_majority(train)
    rows.append(ResultRow("baseline", "", 0, "all", "baseline", freq, train.n))
    noiseless = fit(exact_counts(train))
    _, sa_domain = workload_domains(train)
    truth = _sa_codes(train, sa_domain)
    pred = predict_codes(noiseless, evidence_codes(noiseless, train))
    rows.append(ResultRow("noiseless", "inf", 0, "all", "naive", float(np.mean(pred == truth)), train.n))

    for l in cfg.l_values:
        for rep in range(cfg.definetti_repetitions):
            base = anatomy.anonymize(train, l, derive_rng(cfg.seed, "anatomy", l, rep))
            for factor in cfg.merge_factors:
                rel = anatomy.merge_groups(base, factor)
                start = time.perf_counter()
                model, _, trace = definetti.run(
                    rel, cfg.iterations, cfg.window, derive_rng(cfg.seed, "definetti", l, rep)
                )
                accs = definetti.method_accuracies(model, rel, trace, cfg.methods)
                seconds = time.perf_counter() - start if cfg.timing else None
                if traces is not None:
                    traces[(factor, l, rep)] = trace.l1
                for method in cfg.methods:
                    rows.append(ResultRow(f"definetti-m{factor}", str(l), rep, "all", method,
                                          accs[method], rel.n, seconds))
    return rows


# ---------------------------------------------------------------------------
# summaries and CSV


@dataclass(frozen=True)
class SummaryRow:
    kind: str
    param: str
    split: str
    method: str
    min: float
    mean: float
    max: float
    count: int
    mean_subset_size: float


def _param_key(p: str):
    try:
        return (0, float(p), "")
    except ValueError:
        return (1, 0.0, p)


def sort_rows(rows: Iterable[ResultRow]) -> list[ResultRow]:
    return sorted(rows, key=lambda r: (r.kind, _param_key(r.param), r.rep, r.split, r.method))


def summarize(rows: Iterable[ResultRow]) -> list[SummaryRow]:
    """min / mean / max accuracy over repetitions per (kind, param, split, method).

    NaN accuracies (empty confidence subsets) are left out of the statistics.
    """
    rows = list(rows)
    if not rows:
        raise DataError("nothing to summarize")
    groups: dict[tuple, list[ResultRow]] = defaultdict(list)
    for r in rows:
        groups[(r.kind, r.param, r.split, r.method)].append(r)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], _param_key(k[1]), k[2], k[3])):
        members = groups[key]
        accs = sorted(r.accuracy for r in members if not math.isnan(r.accuracy))
        sizes = sorted(r.subset_size for r in members)
        if accs:
            lo, mean, hi = accs[0], math.fsum(accs) / len(accs), accs[-1]
        else:
            lo = mean = hi = float("nan")
        out.append(SummaryRow(*key, lo, mean, hi, len(members), math.fsum(sizes) / len(sizes)))
    return out


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(float(x))
    return str(x)


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in sort_rows(rows):
        w.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def write_results(rows: Iterable[ResultRow], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(rows_to_csv(rows))


def read_results_text(text: str, source: str = "<text>") -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_FIELDS:
        raise DataError(f"{source}: expected columns {','.join(CSV_FIELDS)}")
    try:
        return [
            ResultRow(
                r["kind"], r["param"], int(r["rep"]), r["split"], r["method"],
                float(r["accuracy"]), int(r["subset_size"]),
                float(r["seconds"]) if r["seconds"] else None,
            )
            for r in reader
        ]
    except (TypeError, ValueError) as exc:
        raise DataError(f"{source}: malformed row ({exc})") from None


def read_results(path) -> list[ResultRow]:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    return read_results_text(text, str(path))


SUMMARY_FIELDS = ("kind", "param", "split", "method", "min", "mean", "max", "count", "mean_subset_size")


def summary_to_csv(summary: Iterable[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for s in summary:
        w.writerow([_fmt(getattr(s, f)) for f in SUMMARY_FIELDS])
    return buf.getvalue()
