"""Audit orchestration: train, explain, score, test disparity, aggregate.

One audit runs R independent repetitions. Each repetition splits the
data, trains a fresh classifier, explains every test input once per
attribution method, scores every explanation with every metric, and runs
the subgroup disparity test per (method, metric) cell. Aggregation
reports, per cell, how many runs were significant, how many also had a
considerable effect size, the mean effect size over significant runs,
and the majority direction.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import attribution as attrib
from . import dataset as ds
from . import metrics as met
from . import stats
from . import textmodel as tm
from .errors import ConfigError, DataError

DEFAULT_METRICS = ("comprehensiveness", "sufficiency",
                   "soft_comprehensiveness", "soft_sufficiency",
                   "sparsity", "gini")


@dataclass
class AuditConfig:
    methods: tuple = attrib.METHODS
    metrics: tuple = DEFAULT_METRICS
    runs: int = 5
    base_seed: int = 0
    alpha: float = 0.05
    d_threshold: float = 0.2
    split_ratio: float = 0.8
    tied_embeddings: bool = False
    metric_cfg: met.MetricConfig = field(default_factory=met.MetricConfig)
    attr_cfg: attrib.AttributionConfig = field(
        default_factory=attrib.AttributionConfig)
    train_cfg: tm.TrainConfig = field(default_factory=tm.TrainConfig)
    model_cfg: tm.ModelConfig = field(default_factory=tm.ModelConfig)

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("run count must be >= 1")
        if not self.methods or not self.metrics:
            raise ConfigError("method and metric lists must be non-empty")
        unknown = set(m.upper() for m in self.methods) - set(attrib.METHODS)
        if unknown:
            raise ConfigError(f"unknown methods: {sorted(unknown)}")
        unknown = set(self.metrics) - set(met.METRICS)
        if unknown:
            raise ConfigError(f"unknown metrics: {sorted(unknown)}")
        self.methods = tuple(m.upper() for m in self.methods)
        self.metrics = tuple(self.metrics)

    def to_dict(self):
        d = asdict(self)
        d["metric_cfg"]["pgd"] = asdict(self.metric_cfg.pgd)
        return d

    def content_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunResult:
    run_index: int
    seed: int
    samples: list  # ScoreSample
    disparity: dict  # (method, metric) -> DisparityResult
    bias: stats.BiasReport
    test_accuracy: float
    train_log: list
    explain_calls: int


@dataclass
class CellAggregate:
    significant_runs: int
    considerable_runs: int
    mean_d: float | None
    std_d: float | None
    direction: str | None  # majority direction over significant runs

    def format_cell(self):
        """Paper-style aggregate cell: '(3) -.42±.10' or '(0) NA'."""
        if self.significant_runs == 0:
            return "(0) NA"
        return (f"({self.significant_runs}) "
                f"{_short(self.mean_d)}±{_short(self.std_d)}")


def _short(x):
    s = f"{x:.2f}"
    return s.replace("-0.", "-.").replace("0.", ".", 1) \
        if abs(x) < 1 else s


@dataclass
class RunAggregate:
    cells: dict  # (method, metric) -> CellAggregate
    n_runs: int
    total_cells: int
    significant_fraction: float
    considerable_fraction: float


@dataclass
class AuditReport:
    config: AuditConfig
    runs: list  # RunResult
    aggregate: RunAggregate


def _derive_seed(run_seed, *parts):
    """Stable per-input seed: run seed XOR a CRC of the identity string."""
    key = ":".join(str(p) for p in parts)
    return (run_seed ^ zlib.crc32(key.encode())) & 0x7FFFFFFF


def _expand_items(records):
    """Flatten records to (pair_id, subgroup, text, label) tuples.

    Paired records contribute both variants with a shared pair id;
    unpaired records get a unique synthetic id and no pairing.
    """
    items = []
    paired = False
    for i, rec in enumerate(records):
        if isinstance(rec, ds.PairedRecord):
            paired = True
            for sub, text, label in rec.variants():
                items.append((rec.pair_id, sub, text, label))
        else:
            items.append((f"rec{i:06d}", rec.subgroup, rec.text, rec.label))
    return items, paired


def _subgroups_of(items):
    subs = sorted({sub for _, sub, _, _ in items},
                  key=lambda s: ({ds.SUBGROUP_A: 0, ds.SUBGROUP_B: 1}
                                 .get(s, 2), s))
    if len(subs) != 2:
        raise DataError(f"need exactly 2 subgroups, found {subs}")
    return subs


def run_single_audit(records, cfg, run_seed, run_index=0):
    """One repetition: split, train, explain, score, test disparity."""
    part = ds.split(records, cfg.split_ratio, seed=run_seed)
    train_items, _ = _expand_items(part.train)
    test_items, paired = _expand_items(part.test)
    sub_a, sub_b = _subgroups_of(train_items + test_items)

    labels = sorted({lab for _, _, _, lab in train_items + test_items})
    if len(labels) != 2:
        raise DataError(f"need exactly 2 labels, found {labels}")
    label_idx = {lab: i for i, lab in enumerate(labels)}

    aliases = ds.tied_alias_map() if cfg.tied_embeddings else None
    vocab = tm.build_vocab([t for _, _, t, _ in train_items], aliases=aliases)
    train_data = [(tm.tokenize(vocab, text), label_idx[lab])
                  for _, _, text, lab in train_items]
    train_cfg = tm.TrainConfig(**{**asdict(cfg.train_cfg), "seed": run_seed})
    model = tm.init_model(len(vocab), cfg.model_cfg, seed=run_seed)
    model, train_log = tm.train(model, train_data, train_cfg)

    predictions = []
    correct = 0
    for pair_id, sub, text, lab in test_items:
        pred = tm.predict(model, vocab, text)
        correct += int(pred.predicted_class == label_idx[lab])
        predictions.append(stats.LabeledPrediction(
            subgroup=sub, true_label=label_idx[lab],
            predicted_label=pred.predicted_class, probs=pred.probs,
            pair_id=pair_id if paired else None))
    test_accuracy = correct / len(test_items)

    # label convention for TPR/TNR: subgroup A's own label when the task is
    # gender classification, else fall back to class indices 0/1
    bias = stats.bias_analysis(
        predictions, sub_a, sub_b,
        positive_class=_subgroup_class(sub_a, labels, label_idx, 0),
        negative_class=_subgroup_class(sub_b, labels, label_idx, 1))

    explain_calls = 0
    use_gold = cfg.metric_cfg.use_gold_label

    def score_item(item):
        pair_id, sub, text, lab = item
        seq = tm.tokenize(vocab, text)
        X = tm.embed(model, seq)
        pred = tm.forward(model, X)
        target = label_idx[lab] if use_gold else pred.predicted_class
        out = []
        calls = 0
        for method in cfg.methods:
            a_cfg = _with_seed(cfg.attr_cfg,
                               _derive_seed(run_seed, pair_id, sub, method))
            attr = attrib.explain(method, model, seq, target, a_cfg)
            calls += 1
            for metric in cfg.metrics:
                m_cfg = _metric_cfg_with_seed(
                    cfg.metric_cfg,
                    _derive_seed(run_seed, pair_id, sub, method, metric))
                value = met.evaluate(metric, model, method, X, attr,
                                     m_cfg, target, a_cfg)
                out.append(met.ScoreSample(pair_id, sub, method, metric,
                                           float(value)))
        return out, calls

    n_threads = max(1, int(os.environ.get("AUDIT_THREADS", "1")))
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(score_item, test_items))
    else:
        results = [score_item(item) for item in test_items]
    samples = [s for out, _ in results for s in out]
    explain_calls = sum(calls for _, calls in results)

    disparity = {}
    for method in cfg.methods:
        for metric in cfg.metrics:
            scores_a = [s.value for s in samples
                        if s.method == method and s.metric == metric
                        and s.subgroup == sub_a and not math.isnan(s.value)]
            scores_b = [s.value for s in samples
                        if s.method == method and s.metric == metric
                        and s.subgroup == sub_b and not math.isnan(s.value)]
            disparity[(method, metric)] = stats.disparity_test(
                stats.SubgroupScores(metric, method, scores_a, scores_b,
                                     sub_a, sub_b),
                alpha=cfg.alpha, d_threshold=cfg.d_threshold)

    return RunResult(run_index=run_index, seed=run_seed, samples=samples,
                     disparity=disparity, bias=bias,
                     test_accuracy=test_accuracy, train_log=train_log,
                     explain_calls=explain_calls)


def _subgroup_class(sub, labels, label_idx, fallback):
    for lab in labels:
        if lab.upper() == sub.upper():
            return label_idx[lab]
    return fallback


def _with_seed(attr_cfg, seed):
    d = asdict(attr_cfg)
    d["seed"] = seed
    return attrib.AttributionConfig(**d)


def _metric_cfg_with_seed(metric_cfg, seed):
    d = asdict(metric_cfg)
    d["soft_seed"] = seed
    d["pgd"] = met.PGDConfig(**{**d["pgd"], "seed": seed})
    d["thresholds"] = tuple(d["thresholds"])
    return met.MetricConfig(**d)


def run_audit(records, cfg):
    """Full audit: R runs with seeds base, base+1, ... then aggregation."""
    runs = [run_single_audit(records, cfg, cfg.base_seed + i, run_index=i)
            for i in range(cfg.runs)]
    return AuditReport(config=cfg, runs=runs,
                       aggregate=aggregate_reports(runs))


def aggregate_reports(runs):
    """Fold per-run disparity results into per-cell counts and effect sizes."""
    runs = list(runs)
    if not runs:
        raise DataError("no run reports to aggregate")
    cells = {}
    n_sig = n_cons = 0
    keys = list(runs[0].disparity)
    for key in keys:
        results = [r.disparity[key] for r in runs]
        sig = [r for r in results if r.significant]
        cons = [r for r in results if r.considerable]
        n_sig += len(sig)
        n_cons += len(cons)
        ds_ = [r.cohens_d for r in sig
               if r.cohens_d is not None and math.isfinite(r.cohens_d)]
        mean_d = float(np.mean(ds_)) if ds_ else None
        std_d = float(np.std(ds_)) if ds_ else None
        direction = None
        pool = sig or results
        if pool:
            votes = {}
            for r in pool:
                votes[r.direction] = votes.get(r.direction, 0) + 1
            direction = max(sorted(votes), key=votes.get)
        cells[key] = CellAggregate(
            significant_runs=len(sig), considerable_runs=len(cons),
            mean_d=mean_d, std_d=std_d, direction=direction)
    total = len(keys) * len(runs)
    return RunAggregate(cells=cells, n_runs=len(runs), total_cells=total,
                        significant_fraction=n_sig / total,
                        considerable_fraction=n_cons / total)


# ---------------------------------------------------------------------------
# Report persistence: a directory with config.json, scores.csv,
# disparity.json, aggregate.json, bias.json. Written to a temporary
# directory first and renamed into place so failures leave no partial
# report behind.


def save_report(report, out_dir):
    out_dir = os.path.abspath(out_dir)
    tmp_dir = out_dir + ".tmp"
    if os.path.exists(tmp_dir):
        shutil.rmtree(tmp_dir)
    os.makedirs(tmp_dir)

    cfg = report.config
    _dump(os.path.join(tmp_dir, "config.json"),
          {"config": cfg.to_dict(), "config_hash": cfg.content_hash(),
           "run_seeds": [r.seed for r in report.runs]})
    met.write_scores_csv(
        [s for r in report.runs for s in _tag_run(r)],
        os.path.join(tmp_dir, "scores.csv"))
    _dump(os.path.join(tmp_dir, "disparity.json"),
          [{"run": r.run_index, **res.to_dict()}
           for r in report.runs for res in r.disparity.values()])
    agg = report.aggregate
    _dump(os.path.join(tmp_dir, "aggregate.json"), {
        "n_runs": agg.n_runs,
        "significant_fraction": agg.significant_fraction,
        "considerable_fraction": agg.considerable_fraction,
        "cells": [{"method": m, "metric": k,
                   "significant_runs": c.significant_runs,
                   "considerable_runs": c.considerable_runs,
                   "mean_d": c.mean_d, "std_d": c.std_d,
                   "direction": c.direction, "cell": c.format_cell()}
                  for (m, k), c in agg.cells.items()]})
    _dump(os.path.join(tmp_dir, "bias.json"),
          [{"run": r.run_index, "test_accuracy": r.test_accuracy,
            **r.bias.to_dict()} for r in report.runs])

    if os.path.exists(out_dir):
        shutil.rmtree(out_dir)
    os.replace(tmp_dir, out_dir)


def _tag_run(run):
    for s in run.samples:
        yield met.ScoreSample(f"run{run.run_index}:{s.pair_id}", s.subgroup,
                              s.method, s.metric, s.value)


def _dump(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=1, sort_keys=True, default=_json_default)
        f.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o)}")
