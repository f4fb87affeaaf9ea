"""End-to-end preprocessing and source-side training.

This module wires the pieces together: filter and label a log, split it
chronologically, build the activity and time encoders, tensorise prefixes,
train the sequence model, and score logs with it.  The same code paths
serve both the source domain (training) and the target domain (transfer),
which is what keeps the two comparable.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .embeddings import ActivityEmbedder, EmbeddingStore, OneHotActivityEncoder
from .errors import ConfigurationError
from .eventlog import EventLog, SplitSpec, filter_by_length, label_in_time, temporal_split
from .metrics import EvalReport, evaluate
from .nn import (
    LstmModel,
    TimeAutoencoder,
    TrainConfig,
    TrainingHistory,
    forward,
    init_model,
    quantize_to_float32,
    score_sequence,
    train,
    train_time_autoencoder,
)
from .tensorize import PrefixDataset, encode_prefixes, event_matrix, generate_prefixes
from .timefeat import (
    AutoencoderDurationEncoder,
    CyclicTimeEncoder,
    ScaledDurationEncoder,
    TimeFeatureScaler,
    collect_durations,
)

log = logging.getLogger(__name__)

ENCODERS = ("embedding", "onehot")
TIME_ENCODINGS = ("scaled_duration", "cyclic", "autoencoder")
PREFIX_ENCODINGS = ("index", "last_k", "aggregate")
SCALER_MODES = ("per_domain", "source")


@dataclass(frozen=True)
class PreprocessConfig:
    """Everything that defines how a log becomes model input.

    A trained model is only applicable to data prepared with the same
    configuration, so this object travels inside the transfer bundle.
    ``scaler_mode`` decides whether elapsed-time scaling statistics move
    with the model (``source``) or are refitted on the receiving domain's
    training data (``per_domain``, the default).
    """

    encoder: str = "embedding"
    scaler_strategy: str = "relative_quantile"
    scaler_quantile: float = 0.70
    scaler_mode: str = "per_domain"
    time_encoding: str = "scaled_duration"
    cyclic_parts: tuple = ("hour", "weekday", "month")
    ae_latent_dim: int = 2
    ae_hidden_dim: int = 8
    prefix_encoding: str = "index"
    last_k: int = 3
    max_steps: int = 50
    min_prefix_len: int = 1
    min_trace_len: int = 1
    max_trace_len: int = 50
    label_quantile: float = 0.70
    threshold: float = 0.5

    def __post_init__(self):
        if self.encoder not in ENCODERS:
            raise ConfigurationError(f"unknown activity encoder {self.encoder!r}")
        if self.time_encoding not in TIME_ENCODINGS:
            raise ConfigurationError(f"unknown time encoding {self.time_encoding!r}")
        if self.prefix_encoding not in PREFIX_ENCODINGS:
            raise ConfigurationError(f"unknown prefix encoding {self.prefix_encoding!r}")
        if self.scaler_mode not in SCALER_MODES:
            raise ConfigurationError(f"unknown scaler mode {self.scaler_mode!r}")
        if self.min_prefix_len < 1 or self.min_prefix_len > self.max_steps:
            raise ConfigurationError(f"min_prefix_len {self.min_prefix_len} out of range")
        if self.prefix_encoding == "index" and self.max_trace_len > self.max_steps:
            raise ConfigurationError(
                "index encoding cannot hold traces longer than max_steps "
                f"({self.max_trace_len} > {self.max_steps})"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cyclic_parts"] = list(self.cyclic_parts)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessConfig":
        d = dict(d)
        if "cyclic_parts" in d:
            d["cyclic_parts"] = tuple(d["cyclic_parts"])
        return cls(**d)


def prepare_log(log_in: EventLog, config: PreprocessConfig) -> tuple[EventLog, float]:
    """Length-filter, then label: returns the labelled log and the in-time
    threshold in days (the duration quantile over the filtered log)."""
    filtered = filter_by_length(log_in, config.min_trace_len, config.max_trace_len)
    return label_in_time(filtered, config.label_quantile)


def build_activity_encoder(config: PreprocessConfig, store=None, vocabulary=None):
    if config.encoder == "embedding":
        if store is None:
            raise ConfigurationError("embedding encoder needs an embedding store")
        return ActivityEmbedder(store)
    if vocabulary is None:
        raise ConfigurationError("one-hot encoder needs a vocabulary to fit on")
    return OneHotActivityEncoder().fit(vocabulary)


def fit_time_encoder(
    config: PreprocessConfig,
    fit_log: EventLog | None,
    scaler: TimeFeatureScaler | None = None,
    autoencoder: TimeAutoencoder | None = None,
    seed: int = 0,
):
    """Build the time-feature encoder, fitting whatever state it needs.

    Pass ``scaler``/``autoencoder`` to reuse already-fitted state (the
    transfer case); otherwise they are fitted on ``fit_log``.
    """
    if config.time_encoding == "cyclic":
        return CyclicTimeEncoder(config.cyclic_parts)
    if config.time_encoding == "scaled_duration":
        if scaler is None:
            scaler = TimeFeatureScaler(config.scaler_strategy, config.scaler_quantile)
            scaler.fit(fit_log)
        return ScaledDurationEncoder(scaler)
    if autoencoder is None:
        values = collect_durations(fit_log)
        autoencoder, _ = train_time_autoencoder(
            values,
            latent_dim=config.ae_latent_dim,
            hidden_dim=config.ae_hidden_dim,
            config=TrainConfig(seed=seed),
        )
        # snap to serialised precision so scores do not change when the
        # autoencoder later travels through a bundle manifest
        autoencoder = TimeAutoencoder.from_state(autoencoder.state())
    return AutoencoderDurationEncoder(autoencoder)


def encode_log(log_in: EventLog, activity_encoder, time_encoder, config: PreprocessConfig) -> PrefixDataset:
    prefixes = generate_prefixes(log_in, config.min_prefix_len)
    return encode_prefixes(
        prefixes,
        activity_encoder,
        time_encoder,
        encoding=config.prefix_encoding,
        max_steps=config.max_steps,
        k=config.last_k,
    )


# ------------------------------------------------------------------- scoring

def score_trace(model: LstmModel, events, activity_encoder, time_encoder, config: PreprocessConfig) -> dict[int, float]:
    """Score every prefix of one trace; returns {prefix_length: P(in time)}.

    The index encoding runs the recurrence once over the whole trace and
    reads the output head at every step, which is bit-identical to scoring
    each prefix separately (the state after k steps never sees later
    events).  Window and aggregate encodings score each prefix on its own
    small input.
    """
    matrix = event_matrix(events, activity_encoder, time_encoder)
    n = matrix.shape[0]
    first = config.min_prefix_len
    if config.prefix_encoding == "index":
        if n > config.max_steps:
            raise ConfigurationError(
                f"trace has {n} events, more than max_steps={config.max_steps}"
            )
        probs = score_sequence(model, matrix)
        return {k: float(probs[k - 1]) for k in range(first, n + 1)}
    if config.prefix_encoding == "last_k":
        return {
            k: forward(model, matrix[max(0, k - config.last_k) : k])
            for k in range(first, n + 1)
        }
    return {
        k: forward(model, matrix[:k].mean(axis=0, keepdims=True))
        for k in range(first, n + 1)
    }


def score_events(model: LstmModel, events, activity_encoder, time_encoder, config: PreprocessConfig) -> float:
    """Score a single running instance (the prefix seen so far)."""
    matrix = event_matrix(events, activity_encoder, time_encoder)
    if config.prefix_encoding == "index":
        if matrix.shape[0] > config.max_steps:
            raise ConfigurationError(
                f"instance has {matrix.shape[0]} events, more than max_steps={config.max_steps}"
            )
        return forward(model, matrix)
    if config.prefix_encoding == "last_k":
        return forward(model, matrix[-config.last_k :])
    return forward(model, matrix.mean(axis=0, keepdims=True))


def score_log(model: LstmModel, log_in: EventLog, activity_encoder, time_encoder, config: PreprocessConfig):
    """Scores and labels for every prefix of every trace in a log.

    Returns (scores, labels, identity) with identity a list of
    (case_id, prefix_length) naming each row.
    """
    scores, labels, identity = [], [], []
    for trace in log_in.traces:
        if trace.label is None:
            raise ConfigurationError(f"trace {trace.case_id!r} is unlabelled")
        per_prefix = score_trace(model, trace.events, activity_encoder, time_encoder, config)
        for k in sorted(per_prefix):
            scores.append(per_prefix[k])
            labels.append(trace.label)
            identity.append((trace.case_id, k))
    return np.array(scores), np.array(labels, dtype=np.float64), identity


def evaluate_log(model, log_in, activity_encoder, time_encoder, config) -> tuple[EvalReport, list]:
    scores, labels, identity = score_log(model, log_in, activity_encoder, time_encoder, config)
    return evaluate(scores, labels, config.threshold), identity


# ------------------------------------------------------------ source training

@dataclass
class SourceTrainResult:
    """Everything produced by one source-side training run."""

    model: LstmModel  # best-epoch weights, rounded to float32 precision
    history: TrainingHistory
    config: PreprocessConfig
    train_config: TrainConfig
    model_meta: dict
    label_threshold_days: float
    scaler: TimeFeatureScaler | None
    autoencoder: TimeAutoencoder | None
    onehot_vocabulary: list | None
    source_vocabulary: list
    test_report: EvalReport
    split_sizes: tuple[int, int, int]
    oov: dict = field(default_factory=dict)


def train_source(
    source_log: EventLog,
    config: PreprocessConfig,
    store: EmbeddingStore | None = None,
    train_config: TrainConfig = TrainConfig(),
    hidden: int = 128,
    n_layers: int = 2,
    init_scheme: str = "dedicated",
    split: SplitSpec = SplitSpec(),
) -> SourceTrainResult:
    """Train an outcome model on a source log, end to end.

    The log is filtered, labelled, and split chronologically; encoders are
    fitted on the training split only.  The returned model carries the
    best-validation-epoch weights rounded to float32 (the packaging
    precision), and the test report is computed with those rounded weights,
    so a saved and reloaded model reproduces it bit for bit.
    """
    prepared, threshold_days = prepare_log(source_log, config)
    train_log, val_log, test_log = temporal_split(prepared, split)
    log.info(
        "source %s: %d traces after filtering (train/val/test = %d/%d/%d), "
        "in-time threshold %.3f days",
        source_log.name or "log", len(prepared), len(train_log), len(val_log),
        len(test_log), threshold_days,
    )

    vocabulary = sorted(train_log.activity_vocabulary)
    activity_encoder = build_activity_encoder(config, store=store, vocabulary=vocabulary)
    time_encoder = fit_time_encoder(config, train_log, seed=train_config.seed)

    train_ds = encode_log(train_log, activity_encoder, time_encoder, config)
    val_ds = encode_log(val_log, activity_encoder, time_encoder, config)
    log.info("encoded %d train / %d val prefixes, %d features", len(train_ds), len(val_ds), train_ds.n_features)

    start = init_model(
        train_ds.n_features, hidden=hidden, n_layers=n_layers,
        scheme=init_scheme, seed=train_config.seed,
    )
    best, history = train(start, train_ds, val_ds, train_config)
    model = quantize_to_float32(best)

    test_report, _ = evaluate_log(model, test_log, activity_encoder, time_encoder, config)
    log.info("source test AUC %.3f over %d prefixes", test_report.auc_roc, test_report.n)

    scaler = time_encoder.scaler if isinstance(time_encoder, ScaledDurationEncoder) else None
    autoencoder = (
        time_encoder.autoencoder if isinstance(time_encoder, AutoencoderDurationEncoder) else None
    )
    oov = activity_encoder.coverage() if isinstance(activity_encoder, ActivityEmbedder) else {}
    return SourceTrainResult(
        model=model,
        history=history,
        config=config,
        train_config=train_config,
        model_meta={
            "hidden": hidden,
            "n_layers": n_layers,
            "input_dim": train_ds.n_features,
            "init_scheme": init_scheme,
            "seed": train_config.seed,
        },
        label_threshold_days=threshold_days,
        scaler=scaler,
        autoencoder=autoencoder,
        onehot_vocabulary=vocabulary if config.encoder == "onehot" else None,
        source_vocabulary=vocabulary,
        test_report=test_report,
        split_sizes=(len(train_log), len(val_log), len(test_log)),
        oov=oov,
    )


def make_target_time_encoder(
    config: PreprocessConfig,
    scaler_state: dict | None,
    autoencoder: TimeAutoencoder | None,
    target_fit_log: EventLog | None,
):
    """Time encoder for a receiving domain.

    Cyclic features are stateless and the autoencoder always travels with
    the model.  The duration scaler honours ``scaler_mode``: ``source``
    applies the stored statistics, ``per_domain`` refits the same strategy
    on the target's training data.
    """
    if config.time_encoding == "cyclic":
        return CyclicTimeEncoder(config.cyclic_parts)
    if config.time_encoding == "autoencoder":
        if autoencoder is None:
            raise ConfigurationError("bundle carries no autoencoder state")
        return AutoencoderDurationEncoder(autoencoder)
    if config.scaler_mode == "source":
        if scaler_state is None:
            raise ConfigurationError("bundle carries no scaler state")
        return ScaledDurationEncoder(TimeFeatureScaler.from_state(scaler_state))
    if target_fit_log is None:
        raise ConfigurationError("per-domain scaling needs target training data")
    scaler = TimeFeatureScaler(config.scaler_strategy, config.scaler_quantile)
    return ScaledDurationEncoder(scaler.fit(target_fit_log))
