"""Command-line driver: gen-data | validate | train | audit | report.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime
failure. Every command echoes its resolved configuration before running.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import attribution as attrib
from . import dataset as ds
from . import metrics as met
from . import pipeline, report
from . import textmodel as tm
from .errors import ConfigError, DataError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="explaudit",
                description="Audit subgroup disparity in post-hoc "
                            "feature-attribution explanations.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[], description="Generate a "
                       "synthetic gendered paired dataset.")
    g.add_argument("--pairs", type=int, default=100)
    g.add_argument("--injection", default="none",
                   choices=["none", "length", "noise"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", default="csv", choices=["csv", "jsonl"])
    g.add_argument("--out", required=True)

    v = sub.add_parser("validate", description="Validate a dataset file.")
    v.add_argument("--dataset", required=True)
    v.add_argument("--format", default="csv", choices=["csv", "jsonl"])
    v.add_argument("--unpaired", action="store_true")

    t = sub.add_parser("train", description="Train a classifier and save "
                       "it as JSON.")
    t.add_argument("--dataset", required=True)
    t.add_argument("--format", default="csv", choices=["csv", "jsonl"])
    t.add_argument("--unpaired", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=20)
    t.add_argument("--out", required=True)

    a = sub.add_parser("audit", description="Run the full disparity audit.")
    a.add_argument("--dataset", required=True)
    a.add_argument("--format", default="csv", choices=["csv", "jsonl"])
    a.add_argument("--unpaired", action="store_true")
    a.add_argument("--runs", type=int, default=5)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--methods", default=",".join(attrib.METHODS))
    a.add_argument("--metrics", default=",".join(pipeline.DEFAULT_METRICS))
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--d-threshold", type=float, default=0.2)
    a.add_argument("--epochs", type=int, default=20)
    a.add_argument("--tied-embeddings", action="store_true")
    a.add_argument("--with-sensitivity", action="store_true")
    a.add_argument("--out", required=True)

    r = sub.add_parser("report", description="Render a report directory.")
    r.add_argument("report_dir")
    r.add_argument("--format", default="table",
                   choices=["table", "csv", "svg"])
    r.add_argument("--out")
    return p


def _echo_config(args):
    resolved = {k: v for k, v in sorted(vars(args).items())
                if k != "command"}
    print(f"[{args.command}] resolved config: "
          + json.dumps(resolved, sort_keys=True))


def _require_file(path):
    if not os.path.exists(path):
        raise DataError(f"dataset file not found: {path}")


def _load(args):
    _require_file(args.dataset)
    if args.unpaired:
        return ds.load_unpaired(args.dataset, args.format)
    return ds.load_paired(args.dataset, args.format)


def cmd_gen_data(args):
    records = ds.generate_synthetic_paired(args.pairs, args.injection.upper(),
                                           seed=args.seed)
    ds.save_paired(records, args.out, args.format)
    print(f"wrote {2 * len(records)} rows ({len(records)} pairs) "
          f"to {args.out}")
    return 0


def cmd_validate(args):
    records = _load(args)
    kind = "unpaired records" if args.unpaired else "pairs"
    print(f"OK: {len(records)} {kind} in {args.dataset}")
    return 0


def cmd_train(args):
    records = _load(args)
    part = ds.split(records, seed=args.seed)
    items, _ = pipeline._expand_items(part.train)
    test_items, _ = pipeline._expand_items(part.test)
    labels = sorted({lab for _, _, _, lab in items + test_items})
    if len(labels) != 2:
        raise DataError(f"need exactly 2 labels, found {labels}")
    label_idx = {lab: i for i, lab in enumerate(labels)}
    vocab = tm.build_vocab([t for _, _, t, _ in items])
    data = [(tm.tokenize(vocab, t), label_idx[lab])
            for _, _, t, lab in items]
    cfg = tm.TrainConfig(epochs=args.epochs, seed=args.seed)
    model = tm.init_model(len(vocab), seed=args.seed)
    model, log = tm.train(model, data, cfg)
    correct = sum(tm.predict(model, vocab, t).predicted_class
                  == label_idx[lab] for _, _, t, lab in test_items)
    tm.save_model(model, vocab, args.out)
    print(f"final train loss {log[-1]['loss']:.4f}, "
          f"test accuracy {correct / len(test_items):.3f}; "
          f"model saved to {args.out}")
    return 0


def cmd_audit(args):
    records = _load(args)
    metric_list = [m.strip() for m in args.metrics.split(",") if m.strip()]
    if args.with_sensitivity and "sensitivity" not in metric_list:
        metric_list.append("sensitivity")
    cfg = pipeline.AuditConfig(
        methods=tuple(m.strip() for m in args.methods.split(",")
                      if m.strip()),
        metrics=tuple(metric_list),
        runs=args.runs, base_seed=args.seed, alpha=args.alpha,
        d_threshold=args.d_threshold,
        tied_embeddings=args.tied_embeddings,
        train_cfg=tm.TrainConfig(epochs=args.epochs),
    )
    audit = pipeline.run_audit(records, cfg)
    pipeline.save_report(audit, args.out)
    print(report.render(args.out, "table"))
    print(f"report written to {args.out}")
    return 0


def cmd_report(args):
    if not os.path.isdir(args.report_dir):
        raise DataError(f"report directory not found: {args.report_dir}")
    result = report.render(args.report_dir, args.format, args.out)
    if args.format == "table":
        print(result)
    else:
        for path in result:
            print(path)
    return 0


_COMMANDS = {"gen-data": cmd_gen_data, "validate": cmd_validate,
             "train": cmd_train, "audit": cmd_audit, "report": cmd_report}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        _echo_config(args)
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
