"""Experiment drivers: multi-seed training runs and the baseline suite.

These functions back the command-line interface.  Seed-level parallelism
uses separate processes (training is numpy-bound); the PROCXFER_THREADS
environment variable caps the worker count.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .baselines import DecisionTreeBaseline, LogisticRegressionBaseline, RandomForestBaseline
from .errors import ConfigurationError
from .eventlog import EventLog, SplitSpec, temporal_split
from .metrics import EvalReport, evaluate
from .nn import TrainConfig, init_model, quantize_to_float32, train
from .pipeline import (
    PreprocessConfig,
    SourceTrainResult,
    build_activity_encoder,
    encode_log,
    evaluate_log,
    fit_time_encoder,
    make_target_time_encoder,
    prepare_log,
    train_source,
)
from .tensorize import flatten

log = logging.getLogger(__name__)

FLAT_MODELS = {
    "logreg": LogisticRegressionBaseline,
    "tree": DecisionTreeBaseline,
    "forest": RandomForestBaseline,
}
BASELINE_MODELS = ("logreg", "tree", "forest", "lstm")
REGIMES = ("source", "target", "transfer")


def resolve_workers(n_jobs: int) -> int:
    """How many worker processes to use for ``n_jobs`` independent jobs,
    bounded by PROCXFER_THREADS (default: the machine's CPU count)."""
    raw = os.environ.get("PROCXFER_THREADS", "").strip()
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigurationError(f"PROCXFER_THREADS={raw!r} is not an integer") from None
        if cap < 1:
            raise ConfigurationError(f"PROCXFER_THREADS must be >= 1, got {cap}")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_jobs))


def _train_source_job(payload):
    (source_log, config, store, train_config, hidden, n_layers, init_scheme, split) = payload
    return train_source(
        source_log, config, store=store, train_config=train_config,
        hidden=hidden, n_layers=n_layers, init_scheme=init_scheme, split=split,
    )


def train_across_seeds(
    source_log: EventLog,
    config: PreprocessConfig,
    store,
    base_train_config: TrainConfig,
    seeds,
    hidden: int = 128,
    n_layers: int = 2,
    init_scheme: str = "dedicated",
    split: SplitSpec = SplitSpec(),
) -> list[SourceTrainResult]:
    """One full source training run per seed, in parallel where allowed."""
    payloads = [
        (source_log, config, store, replace(base_train_config, seed=seed),
         hidden, n_layers, init_scheme, split)
        for seed in seeds
    ]
    workers = resolve_workers(len(payloads))
    if workers == 1:
        return [_train_source_job(p) for p in payloads]
    log.info("training %d seeds with %d worker processes", len(payloads), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train_source_job, payloads))


# -------------------------------------------------------------- baseline suite

@dataclass
class BaselineRun:
    """Results of one model under one regime, one report per seed (models
    with deterministic fits carry a single report)."""

    model: str
    regime: str
    seeds: list
    reports: list

    def label(self) -> str:
        return f"{self.model} [{self.regime}]"


def _fit_flat(model_name, X, y, seed):
    if model_name == "logreg":
        return LogisticRegressionBaseline().fit(X, y)
    if model_name == "tree":
        return DecisionTreeBaseline().fit(X, y)
    return RandomForestBaseline(seed=seed).fit(X, y)


def _flat_report(model, X_test, y_test, threshold) -> EvalReport:
    return evaluate(model.score_samples(X_test), y_test, threshold)


def run_baseline_suite(
    source_log: EventLog,
    config: PreprocessConfig,
    store=None,
    target_log: EventLog | None = None,
    models=BASELINE_MODELS,
    regimes=("source",),
    seeds=(0,),
    train_config: TrainConfig = TrainConfig(),
    hidden: int = 128,
    n_layers: int = 2,
    init_scheme: str = "dedicated",
    split: SplitSpec = SplitSpec(),
) -> list[BaselineRun]:
    """Flat baselines and the sequence model under up to three regimes:
    train/test on source, train/test on target, and train on source but
    test on target (no fine-tuning).

    All models in a regime consume the same encoded prefixes (baselines see
    the row-major flattened view), so differences reflect the model class,
    not the features.  Deterministic models run once; the forest and the
    LSTM run once per seed.
    """
    for model_name in models:
        if model_name not in BASELINE_MODELS:
            raise ConfigurationError(f"unknown baseline model {model_name!r}")
    for regime in regimes:
        if regime not in REGIMES:
            raise ConfigurationError(f"unknown regime {regime!r}")
    if ("target" in regimes or "transfer" in regimes) and target_log is None:
        raise ConfigurationError("target/transfer regimes need a target log")

    runs: list[BaselineRun] = []
    src_prepared, _ = prepare_log(source_log, config)
    s_train, s_val, s_test = temporal_split(src_prepared, split)
    src_vocab = sorted(s_train.activity_vocabulary)
    src_act = build_activity_encoder(config, store=store, vocabulary=src_vocab)
    src_time = fit_time_encoder(config, s_train, seed=train_config.seed)

    arms = {}
    if "source" in regimes or "transfer" in regimes:
        arms["src_train"] = encode_log(s_train, src_act, src_time, config)
        arms["src_val"] = encode_log(s_val, src_act, src_time, config)

    if target_log is not None and ("target" in regimes or "transfer" in regimes):
        tgt_prepared, _ = prepare_log(target_log, config)
        t_train, t_val, t_test = temporal_split(tgt_prepared, split)

    for regime in regimes:
        if regime == "source":
            train_ds, val_ds = arms["src_train"], arms["src_val"]
            test_log_part, eval_act, eval_time = s_test, src_act, src_time
        elif regime == "target":
            tgt_vocab = sorted(t_train.activity_vocabulary)
            eval_act = build_activity_encoder(config, store=store, vocabulary=tgt_vocab)
            eval_time = fit_time_encoder(config, t_train, seed=train_config.seed)
            train_ds = encode_log(t_train, eval_act, eval_time, config)
            val_ds = encode_log(t_val, eval_act, eval_time, config)
            test_log_part = t_test
        else:  # transfer: source-fitted model and encoders, target test data
            train_ds, val_ds = arms["src_train"], arms["src_val"]
            eval_act = src_act
            scaler_state = src_time.scaler.state() if hasattr(src_time, "scaler") else None
            autoencoder = getattr(src_time, "autoencoder", None)
            eval_time = make_target_time_encoder(config, scaler_state, autoencoder, t_train)
            test_log_part = t_test

        test_ds = encode_log(test_log_part, eval_act, eval_time, config)
        X_train, y_train = flatten(train_ds)
        X_test, y_test = flatten(test_ds)

        for model_name in models:
            if model_name == "lstm":
                reports, used_seeds = [], []
                for seed in seeds:
                    start = init_model(
                        train_ds.n_features, hidden=hidden, n_layers=n_layers,
                        scheme=init_scheme, seed=seed,
                    )
                    best, _ = train(start, train_ds, val_ds, replace(train_config, seed=seed))
                    model = quantize_to_float32(best)
                    report, _ = evaluate_log(model, test_log_part, eval_act, eval_time, config)
                    reports.append(report)
                    used_seeds.append(seed)
            elif model_name == "forest":
                reports = [
                    _flat_report(_fit_flat("forest", X_train, y_train, seed), X_test, y_test, config.threshold)
                    for seed in seeds
                ]
                used_seeds = list(seeds)
            else:
                fitted = _fit_flat(model_name, X_train, y_train, seeds[0] if seeds else 0)
                reports = [_flat_report(fitted, X_test, y_test, config.threshold)]
                used_seeds = [seeds[0] if seeds else 0]
            runs.append(BaselineRun(model_name, regime, used_seeds, reports))
            log.info(
                "%s [%s]: AUC %s", model_name, regime,
                "/".join(f"{r.auc_roc:.3f}" for r in reports),
            )
    return runs
