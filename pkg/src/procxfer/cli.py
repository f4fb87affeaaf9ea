"""Command-line interface: train, transfer, predict, baselines.

Flag values may also be supplied through ``--config file.json`` (keys are
the flag names with underscores); explicit command-line flags win.  All
artifacts land under the directory given by ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .embeddings import load_embedding_store
from .errors import ConfigurationError, ProcxferError
from .eventlog import CsvSchema, SplitSpec, parse_event_log
from .experiments import BASELINE_MODELS, REGIMES, run_baseline_suite, train_across_seeds
from .metrics import format_report_table, summarize_reports
from .nn import TrainConfig
from .pipeline import PreprocessConfig, prepare_log
from .transfer import (
    build_bundle,
    compare_from_scratch,
    embedding_distance_matrix,
    evaluate_on_target,
    load_bundle,
    predict_online,
    save_bundle,
    scale_study,
    write_distance_artifacts,
)

log = logging.getLogger(__name__)

_DASHED_VALUES = {
    "time_encoding": {"scaled-duration": "scaled_duration", "cyclic": "cyclic", "autoencoder": "autoencoder"},
    "scaler": {
        "relative-quantile": "relative_quantile",
        "relative-mean": "relative_mean",
        "relative-max": "relative_max",
        "min-max": "min_max",
    },
    "scaler_mode": {"per-domain": "per_domain", "source": "source"},
    "prefix_encoding": {"index": "index", "last-k": "last_k", "aggregate": "aggregate"},
    "vector_kind": {"token": "token_level", "activity": "activity_level"},
}


def _parse_seeds(value) -> list[int]:
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    try:
        return [int(part) for part in str(value).split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigurationError(f"bad seed list {value!r}") from None


def _parse_split(value) -> SplitSpec:
    if isinstance(value, (list, tuple)):
        parts = [float(v) for v in value]
    else:
        parts = [float(p) for p in str(value).split(",")]
    if len(parts) != 3:
        raise ConfigurationError(f"split needs three fractions, got {value!r}")
    return SplitSpec(*parts)


def _parse_int_list(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(p) for p in str(value).split(",") if p.strip() != ""]


def _parse_name_list(value, allowed, what) -> list[str]:
    items = value if isinstance(value, (list, tuple)) else str(value).split(",")
    names = [str(v).strip() for v in items if str(v).strip()]
    for name in names:
        if name not in allowed:
            raise ConfigurationError(f"unknown {what} {name!r} (choose from {', '.join(allowed)})")
    return names


def _mapped(args, key):
    value = getattr(args, key)
    table = _DASHED_VALUES[key]
    if value not in table:
        raise ConfigurationError(f"bad value {value!r} for --{key.replace('_', '-')}")
    return table[value]


def _schema_from_args(args) -> CsvSchema:
    return CsvSchema(
        case_col=args.case_col,
        activity_col=args.activity_col,
        timestamp_col=args.timestamp_col,
        ts_format=args.ts_format,
        delimiter=args.delimiter,
    )


def _preprocess_from_args(args) -> PreprocessConfig:
    return PreprocessConfig(
        encoder=args.encoder,
        scaler_strategy=_mapped(args, "scaler"),
        scaler_quantile=args.scaler_quantile,
        scaler_mode=_mapped(args, "scaler_mode"),
        time_encoding=_mapped(args, "time_encoding"),
        cyclic_parts=tuple(p.strip() for p in str(args.cyclic_parts).split(",") if p.strip()),
        ae_latent_dim=args.ae_latent,
        ae_hidden_dim=args.ae_hidden,
        prefix_encoding=_mapped(args, "prefix_encoding"),
        last_k=args.last_k,
        max_steps=args.max_steps,
        min_prefix_len=args.min_prefix_len,
        min_trace_len=args.min_trace_len,
        max_trace_len=args.max_trace_len,
        label_quantile=args.label_quantile,
    )


def _train_config_from_args(args) -> TrainConfig:
    return TrainConfig(
        lr=args.lr,
        max_epochs=args.max_epochs,
        batch_size=args.batch_size,
        patience=args.patience,
    )


def _load_vectors(args):
    """Returns (store, raw_bytes) or (None, None) for one-hot encoders."""
    if args.encoder != "embedding":
        return None, None
    if not args.vectors:
        raise ConfigurationError("--encoder embedding requires --vectors")
    raw = Path(args.vectors).read_bytes()
    store = load_embedding_store(raw, casing=args.casing, kind=_mapped(args, "vector_kind"))
    log.info("loaded %d vectors of dimension %d", len(store), store.dim)
    return store, raw


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------- commands

def cmd_train(args) -> int:
    config = _preprocess_from_args(args)
    store, vector_bytes = _load_vectors(args)
    out = Path(args.out)
    source_log = parse_event_log(args.log, _schema_from_args(args))
    name = args.name or source_log.name
    seeds = _parse_seeds(args.seeds)
    split = _parse_split(args.split)

    results = train_across_seeds(
        source_log, config, store, _train_config_from_args(args), seeds,
        hidden=args.hidden, n_layers=args.layers, init_scheme=args.init, split=split,
    )

    reports = []
    for seed, result in zip(seeds, results):
        seed_dir = out / f"seed_{seed}"
        bundle = build_bundle(
            result, vector_file_bytes=vector_bytes, store=store,
            source_name=name, ts_format=args.ts_format,
        )
        save_bundle(bundle, seed_dir / "bundle")
        _write_json(
            seed_dir / "report.json",
            {
                "seed": seed,
                "source": name,
                "label_threshold_days": result.label_threshold_days,
                "split_sizes": list(result.split_sizes),
                "test_report": result.test_report.to_dict(),
                "history": result.history.to_dict(),
                "oov": result.oov,
            },
        )
        reports.append(result.test_report)

    table = format_report_table(
        [(f"Train and test on {name} ({len(seeds)} seeds)", summarize_reports(reports))]
    )
    _write_json(
        out / "summary.json",
        {
            "source": name,
            "seeds": seeds,
            "label_threshold_days": results[0].label_threshold_days,
            "metrics": {k: list(v) for k, v in summarize_reports(reports).items()},
            "per_seed_auc": [r.auc_roc for r in reports],
        },
    )
    (out / "report.txt").write_text(table + "\n")
    print(table)
    print(f"bundles written under {out}")
    return 0


def cmd_transfer(args) -> int:
    out = Path(args.out)
    bundles = [load_bundle(p) for p in args.bundle]
    target_log = parse_event_log(args.target_log, _schema_from_args(args))
    split = _parse_split(args.split)
    seeds = _parse_seeds(args.seeds)
    scaler_mode = _mapped(args, "scaler_mode") if args.scaler_mode else None

    evaluations = [
        evaluate_on_target(
            bundle, target_log, split=split, whole_log=args.whole_log, scaler_mode=scaler_mode
        )
        for bundle in bundles
    ]
    reports = [e.report for e in evaluations]
    rows = [(f"Transferred to {target_log.name} ({len(bundles)} bundles)", summarize_reports(reports))]
    _write_json(
        out / "target_report.json",
        {
            "target": target_log.name,
            "bundles": [str(p) for p in args.bundle],
            "whole_log": bool(args.whole_log),
            "label_threshold_days": evaluations[0].label_threshold_days,
            "per_bundle": [
                {"report": e.report.to_dict(), "n_traces": e.n_traces, "oov": e.oov}
                for e in evaluations
            ],
            "metrics": {k: list(v) for k, v in summarize_reports(reports).items()},
        },
    )

    if args.compare_scratch:
        comparison = compare_from_scratch(bundles[0], target_log, seeds=seeds, split=split)
        rows = comparison.table_rows() if len(bundles) == 1 else rows + comparison.table_rows()[1:]
        _write_json(
            out / "comparison.json",
            {
                "transferred": comparison.transferred.to_dict(),
                "scratch": [r.to_dict() for r in comparison.scratch],
                "seeds": comparison.seeds,
                "n_test_prefixes": len(comparison.identity),
            },
        )

    if args.scale_study:
        study = scale_study(
            bundles[0], target_log,
            fractions=tuple(_parse_int_list(args.scale_fractions)),
            seeds=seeds, split=split,
        )
        _write_json(out / "scale_study.json", study)
        for row in study["rows"]:
            if row.get("skipped"):
                print(f"{row['fraction']:3d}% of target training data: skipped ({row['n_traces']} traces)")
            else:
                print(
                    f"{row['fraction']:3d}% of target training data: "
                    f"AUC {row['auc_mean']:.3f} (±{row['auc_std']:.3f})"
                )
        print(f"transferred model (no target training): AUC {study['transferred_auc']:.3f}")

    if args.analyze_embeddings:
        bundle = bundles[0]
        if bundle.store is None:
            raise ConfigurationError("--analyze-embeddings needs an embedding-based bundle")
        prepared, _ = prepare_log(target_log, bundle.config)
        matrix = embedding_distance_matrix(
            bundle.store, bundle.source_vocabulary, sorted(prepared.activity_vocabulary)
        )
        paths = write_distance_artifacts(matrix, out)
        print(f"embedding distance artifacts: {paths['csv']}, {paths['svg']}")

    table = format_report_table(rows)
    (out / "target_report.txt").write_text(table + "\n")
    print(table)
    return 0


def cmd_predict(args) -> int:
    bundle = load_bundle(args.bundle)
    if args.ts_format:
        bundle.ts_format = args.ts_format
    source = sys.stdin if args.input == "-" else open(args.input, "r", encoding="utf-8")
    sink = sys.stdout if args.output == "-" else open(args.output, "w", encoding="utf-8")
    try:
        for result in predict_online(bundle, source):
            sink.write(json.dumps(result) + "\n")
            sink.flush()
    finally:
        if source is not sys.stdin:
            source.close()
        if sink is not sys.stdout:
            sink.close()
    return 0


def cmd_baselines(args) -> int:
    config = _preprocess_from_args(args)
    store, _ = _load_vectors(args)
    out = Path(args.out)
    source_log = parse_event_log(args.source_log, _schema_from_args(args))
    target_log = (
        parse_event_log(args.target_log, _schema_from_args(args)) if args.target_log else None
    )
    models = _parse_name_list(args.models, BASELINE_MODELS, "model")
    regimes = _parse_name_list(args.regime, REGIMES, "regime")
    runs = run_baseline_suite(
        source_log, config, store=store, target_log=target_log,
        models=models, regimes=regimes, seeds=_parse_seeds(args.seeds),
        train_config=_train_config_from_args(args),
        hidden=args.hidden, n_layers=args.layers, init_scheme=args.init,
        split=_parse_split(args.split),
    )
    rows = [(run.label(), summarize_reports(run.reports)) for run in runs]
    table = format_report_table(rows)
    _write_json(
        out / "baselines.json",
        [
            {
                "model": run.model,
                "regime": run.regime,
                "seeds": run.seeds,
                "reports": [r.to_dict() for r in run.reports],
            }
            for run in runs
        ],
    )
    (out / "baselines.txt").write_text(table + "\n")
    print(table)
    return 0


# --------------------------------------------------------------------- parser

def _add_io_args(parser):
    parser.add_argument("--out", default="out", help="directory for all artifacts")
    parser.add_argument("--config", default=None, help="JSON file of flag values (flags win)")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")


def _add_schema_args(parser):
    parser.add_argument("--case-col", default="case_id")
    parser.add_argument("--activity-col", default="activity")
    parser.add_argument("--timestamp-col", default="timestamp")
    parser.add_argument("--ts-format", default="%Y-%m-%dT%H:%M:%S", help="strptime pattern for timestamps")
    parser.add_argument("--delimiter", default=",")


def _add_preprocess_args(parser):
    parser.add_argument("--encoder", choices=("embedding", "onehot"), default="embedding")
    parser.add_argument("--vectors", default=None, help="word2vec-format text file of word vectors")
    parser.add_argument("--casing", choices=("cased", "uncased"), default="uncased")
    parser.add_argument("--vector-kind", choices=("token", "activity"), default="token")
    parser.add_argument(
        "--time-encoding", choices=("scaled-duration", "cyclic", "autoencoder"),
        default="scaled-duration",
    )
    parser.add_argument(
        "--scaler", choices=("relative-quantile", "relative-mean", "relative-max", "min-max"),
        default="relative-quantile",
    )
    parser.add_argument("--scaler-quantile", type=float, default=0.70)
    parser.add_argument("--scaler-mode", choices=("per-domain", "source"), default="per-domain")
    parser.add_argument("--cyclic-parts", default="hour,weekday,month")
    parser.add_argument("--ae-latent", type=int, default=2)
    parser.add_argument("--ae-hidden", type=int, default=8)
    parser.add_argument("--prefix-encoding", choices=("index", "last-k", "aggregate"), default="index")
    parser.add_argument("--last-k", type=int, default=3)
    parser.add_argument("--max-steps", type=int, default=50)
    parser.add_argument("--min-prefix-len", type=int, default=1)
    parser.add_argument("--min-trace-len", type=int, default=1)
    parser.add_argument("--max-trace-len", type=int, default=50)
    parser.add_argument("--label-quantile", type=float, default=0.70)


def _add_model_args(parser, default_seeds="0"):
    parser.add_argument("--hidden", type=int, default=128)
    parser.add_argument("--layers", type=int, default=2, help="number of recurrent layers")
    parser.add_argument("--init", choices=("dedicated", "uniform"), default="dedicated")
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--max-epochs", type=int, default=100)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--patience", type=int, default=10)
    parser.add_argument("--seeds", default=default_seeds, help="comma-separated seed list")
    parser.add_argument("--split", default="0.64,0.16,0.20", help="train,val,test fractions")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="procxfer",
        description="Train outcome models on event logs and move them across processes",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p_train = subparsers.add_parser("train", help="train a source model and package it")
    p_train.add_argument("--log", required=True, help="source event log CSV")
    p_train.add_argument("--name", default=None, help="name recorded in the bundle")
    _add_io_args(p_train)
    _add_schema_args(p_train)
    _add_preprocess_args(p_train)
    _add_model_args(p_train)
    p_train.set_defaults(func=cmd_train)
    subs["train"] = p_train

    p_transfer = subparsers.add_parser("transfer", help="apply a bundle to a target log")
    p_transfer.add_argument("--bundle", nargs="+", required=True, help="one or more bundle directories")
    p_transfer.add_argument("--target-log", required=True, help="target event log CSV")
    p_transfer.add_argument("--whole-log", action="store_true", help="score every trace, not just the test split")
    p_transfer.add_argument("--scaler-mode", choices=("per-domain", "source"), default=None,
                            help="override the bundle's scaler mode")
    p_transfer.add_argument("--compare-scratch", action="store_true",
                            help="also train target-only models (first bundle's recipe)")
    p_transfer.add_argument("--scale-study", action="store_true",
                            help="train on growing target fractions and compare")
    p_transfer.add_argument("--scale-fractions", default="10,20,30,40,50,60,70,80,90,100")
    p_transfer.add_argument("--analyze-embeddings", action="store_true",
                            help="write source/target activity distance matrix (CSV + SVG)")
    p_transfer.add_argument("--seeds", default="0,1,2,3,4")
    p_transfer.add_argument("--split", default="0.64,0.16,0.20")
    _add_io_args(p_transfer)
    _add_schema_args(p_transfer)
    p_transfer.set_defaults(func=cmd_transfer)
    subs["transfer"] = p_transfer

    p_predict = subparsers.add_parser("predict", help="score streaming instances (NDJSON)")
    p_predict.add_argument("--bundle", required=True)
    p_predict.add_argument("--input", default="-", help="NDJSON file, or - for stdin")
    p_predict.add_argument("--output", default="-", help="output file, or - for stdout")
    p_predict.add_argument("--ts-format", default=None, help="override the bundle's timestamp pattern")
    p_predict.add_argument("--config", default=None, help="JSON file of flag values (flags win)")
    p_predict.set_defaults(func=cmd_predict)
    subs["predict"] = p_predict

    p_base = subparsers.add_parser("baselines", help="flat baselines vs the sequence model")
    p_base.add_argument("--source-log", required=True)
    p_base.add_argument("--target-log", default=None)
    p_base.add_argument("--models", default="logreg,tree,forest,lstm")
    p_base.add_argument("--regime", default="source", help="comma list from: source,target,transfer")
    _add_io_args(p_base)
    _add_schema_args(p_base)
    _add_preprocess_args(p_base)
    _add_model_args(p_base)
    p_base.set_defaults(func=cmd_baselines)
    subs["baselines"] = p_base

    return parser, subs


def _config_path_from_argv(argv):
    for i, token in enumerate(argv):
        if token == "--config":
            if i + 1 >= len(argv):
                return None
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()

    config_path = _config_path_from_argv(argv)
    if config_path:
        command = next((a for a in argv if not a.startswith("-")), None)
        sub = subs.get(command)
        if sub is not None:
            try:
                overrides = json.loads(Path(config_path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                print(f"error: cannot read config {config_path}: {exc}", file=sys.stderr)
                return 1
            known = {action.dest for action in sub._actions}
            unknown = set(overrides) - known
            if unknown:
                print(f"error: unknown config keys {sorted(unknown)}", file=sys.stderr)
                return 1
            sub.set_defaults(**overrides)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ProcxferError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
