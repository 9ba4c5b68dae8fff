"""Command-line entry point: generate, train, compare, serve, replay.

Every subcommand validates its flags before touching the filesystem,
emits machine-readable output under --json, and maps the shared error
taxonomy to distinct exit codes. Timing fields can be suppressed with
--no-timing so golden-file comparisons stay byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConnectionFailureError, FlowSentinelError, InvalidHyperparameterError
from .evaluation import compare_models, evaluate, export_report
from .features import fit_pca
from .flowdata import CLASS_NAMES, Dataset, load_csv, write_csv
from .learn import KINDS, EstimatorSpec, fit, save_model
from .preprocess import (SplitSpec, apply_standardizer, dedup, drop_invalid,
                         fit_standardizer, train_test_split)
from .service import ServiceConfig, run_service
from .traffic import DEFAULT_CLASS_COUNTS, GeneratorSpec, generate_dataset, replay

ENV_PREFIX = "FSNT_"


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _parse_counts(text: str) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("counts must be four comma-separated integers")
    try:
        return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _parse_listen(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host:
        raise argparse.ArgumentTypeError("listen address must look like host:port")
    try:
        return host, int(port)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowsentinel",
        description="Flow-based DDoS detection: data generation, training, "
                    "evaluation, and a real-time classification service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic labeled flow CSV")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--counts", type=_parse_counts, default=DEFAULT_CLASS_COUNTS,
                   help="per-class record counts, e.g. 16000,30000,16000,35000")
    p.add_argument("--json", action="store_true")

    for name in ("train", "compare"):
        p = sub.add_parser(name, help=f"{name} classifiers on a labeled CSV")
        p.add_argument("--csv", required=True, help="labeled input CSV")
        p.add_argument("--train-fraction", type=float, default=0.6)
        p.add_argument("--split-seed", type=int, default=0)
        p.add_argument("--no-stratify", action="store_true",
                       help="split without per-class stratification")
        p.add_argument("--components", type=int, default=10,
                       help="PCA components kept after standardization")
        p.add_argument("--no-pca", action="store_true", help="skip the PCA stage")
        p.add_argument("--fit-on-all", action="store_true",
                       help="fit the standardizer on all rows instead of the train split")
        p.add_argument("--seed", type=int, default=0, help="estimator seed")
        p.add_argument("--repeats", type=int, default=3,
                       help="prediction timing repeat count")
        p.add_argument("--report-dir", default=None, help="directory for report files")
        p.add_argument("--no-timing", action="store_true",
                       help="omit timing fields from outputs (golden-file mode)")
        p.add_argument("--json", action="store_true")
        if name == "train":
            p.add_argument("--kind", required=True, choices=KINDS)
            p.add_argument("--out-model", required=True, help="model file to write")
        else:
            p.add_argument("--kinds", default=",".join(KINDS),
                           help="comma-separated subset of kinds to compare")

    p = sub.add_parser("serve", help="run the real-time detection service")
    p.add_argument("--listen", type=_parse_listen,
                   default=_env("LISTEN", "127.0.0.1:5000"),
                   help="host:port to bind (env FSNT_LISTEN)")
    p.add_argument("--model", default=_env("MODEL"),
                   help="model file to serve (env FSNT_MODEL)")
    p.add_argument("--threshold", type=float,
                   default=float(_env("THRESHOLD", "0.5")),
                   help="decision threshold in [0,1] (env FSNT_THRESHOLD)")
    p.add_argument("--blocklist-file", default=_env("BLOCKLIST_FILE", "blocklist.json"),
                   help="blocklist persistence path (env FSNT_BLOCKLIST_FILE)")
    p.add_argument("--window-seconds", type=int,
                   default=int(_env("WINDOW_SECONDS", "60")),
                   help="stats window in seconds (env FSNT_WINDOW_SECONDS)")

    p = sub.add_parser("replay", help="post flows to a running service")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", help="labeled CSV to replay")
    src.add_argument("--generate", action="store_true",
                     help="replay a freshly generated corpus instead of a CSV")
    p.add_argument("--counts", type=_parse_counts, default=(50, 50, 50, 50),
                   help="per-class counts when --generate is used")
    p.add_argument("--seed", type=int, default=7, help="generator seed for --generate")
    p.add_argument("--target", required=True, help="service address, host:port")
    p.add_argument("--rate", type=float, default=100.0, help="flows per second")
    p.add_argument("--shuffle-seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    return parser


def _emit(args, payload: dict, human: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


def cmd_generate(args) -> int:
    spec = GeneratorSpec(counts=args.counts, seed=args.seed)
    data = generate_dataset(spec)
    write_csv(data, args.out)
    counts = [int(v) for v in data.class_counts()]
    _emit(args, {"rows": len(data), "counts": counts, "path": args.out},
          f"wrote {len(data)} rows to {args.out} (counts: {counts})")
    return 0


def _prepare(args) -> tuple:
    """Shared train/compare pipeline: load, clean, dedup, split, fit the
    data view (standardizer + optional PCA) on the training side."""
    data = load_csv(args.csv)
    data, dropped = drop_invalid(data)
    data, removed = dedup(data)
    split = SplitSpec(train_fraction=args.train_fraction, seed=args.split_seed,
                      stratified=not args.no_stratify)
    train, test = train_test_split(data, split)
    standardizer = fit_standardizer(data if args.fit_on_all else train)
    pca = None
    if not args.no_pca:
        standardized_train = apply_standardizer(train, standardizer)
        pca = fit_pca(standardized_train, args.components)
    info = {
        "rows": len(data),
        "dropped_invalid": dropped,
        "removed_duplicates": removed,
        "train_rows": len(train),
        "test_rows": len(test),
        "split_seed": args.split_seed,
        "train_fraction": args.train_fraction,
        "label_counts": [int(v) for v in data.class_counts()],
    }
    return data, train, test, standardizer, pca, info


def _fit_and_evaluate(kind: str, args, train, test, standardizer, pca, info):
    spec = EstimatorSpec(kind=kind, seed=args.seed)
    model = fit(spec, train, standardizer=standardizer, pca=pca)
    report = evaluate(model, test, repeats=args.repeats, dataset={
        "train_counts": [int(v) for v in train.class_counts()],
        "seed": args.split_seed,
    })
    model = model.with_stored_metrics(report.metrics.accuracy, report.execution_seconds)
    return model, report


def _write_fit_log(model, report_dir: Path) -> None:
    path = report_dir / f"fitlog_{model.spec.kind.lower()}.jsonl"
    lines = [json.dumps(entry, sort_keys=True) for entry in model.training_log]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_train(args) -> int:
    data, train, test, standardizer, pca, info = _prepare(args)
    model, report = _fit_and_evaluate(args.kind, args, train, test, standardizer, pca, info)
    save_model(model, args.out_model)
    if args.report_dir:
        report_dir = Path(args.report_dir)
        export_report(report, report_dir, include_timing=not args.no_timing,
                      label_counts=info["label_counts"])
        _write_fit_log(model, report_dir)
    payload = {
        "kind": args.kind,
        "model": args.out_model,
        "accuracy": report.metrics.accuracy,
        "macro_auc": report.macro_auc,
        "converged": model.converged,
        "data": info,
    }
    if not args.no_timing:
        payload["fit_seconds"] = report.fit_seconds
        payload["predict_seconds"] = report.predict_seconds
        payload["execution_seconds"] = report.execution_seconds
    _emit(args, payload,
          f"{args.kind}: accuracy {report.metrics.accuracy:.4f}, "
          f"macro AUC {report.macro_auc:.4f}; model written to {args.out_model}")
    return 0


def cmd_compare(args) -> int:
    kinds = [k.strip().upper() for k in args.kinds.split(",") if k.strip()]
    for kind in kinds:
        if kind not in KINDS:
            raise InvalidHyperparameterError(
                f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    data, train, test, standardizer, pca, info = _prepare(args)
    reports = []
    for kind in kinds:
        _, report = _fit_and_evaluate(kind, args, train, test, standardizer, pca, info)
        reports.append(report)
    table = compare_models(reports)
    if args.report_dir:
        export_report(table, Path(args.report_dir),
                      include_timing=not args.no_timing,
                      label_counts=info["label_counts"])
    rows = []
    for row in table.rows:
        out = {"kind": row["kind"], "accuracy": row["accuracy"],
               "macro_auc": row["macro_auc"]}
        if not args.no_timing:
            out["execution_seconds"] = row["execution_seconds"]
        rows.append(out)
    if args.json:
        print(json.dumps({"rows": rows, "data": info}, sort_keys=True))
    else:
        header = f"{'kind':<10}{'accuracy':>10}{'macro_auc':>11}"
        if not args.no_timing:
            header += f"{'time_s':>10}"
        print(header)
        for row in rows:
            line = f"{row['kind']:<10}{row['accuracy']:>10.4f}{row['macro_auc']:>11.4f}"
            if not args.no_timing:
                line += f"{row['execution_seconds']:>10.2f}"
            print(line)
    return 0


def cmd_serve(args) -> int:
    host, port = args.listen if isinstance(args.listen, tuple) else _parse_listen(args.listen)
    config = ServiceConfig(host=host, port=port, model_path=args.model,
                           threshold=args.threshold,
                           blocklist_path=args.blocklist_file,
                           window_seconds=args.window_seconds)
    run_service(config)
    return 0


def cmd_replay(args) -> int:
    if args.generate:
        data = generate_dataset(GeneratorSpec(counts=args.counts, seed=args.seed))
    else:
        data = load_csv(args.csv)
    report = replay(data, args.target, args.rate, args.shuffle_seed)
    body = report.to_json()
    _emit(args, body, json.dumps(body, sort_keys=True, indent=2))
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "compare": cmd_compare,
    "serve": cmd_serve,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConnectionFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(json.dumps(exc.report.to_json(), sort_keys=True), file=sys.stderr)
        return exc.exit_code
    except FlowSentinelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 33
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
