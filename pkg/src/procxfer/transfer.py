"""The transfer bundle and everything done with it on a receiving domain.

A bundle is a self-contained directory: the trained weights, the word
vectors the activity encoder needs, the fitted time-scaling statistics, and
the full preprocessing configuration, all under per-file checksums.  A
model moved this way is applied as-is; nothing here ever fine-tunes it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from datetime import datetime

from .embeddings import ActivityEmbedder, EmbeddingStore, OneHotActivityEncoder, load_embedding_store
from .errors import ConfigurationError, FormatError, IntegrityError, VersionError
from .eventlog import Event, EventLog, SplitSpec, temporal_split
from .metrics import EvalReport, evaluate, summarize_reports
from .nn import (
    LstmModel,
    TimeAutoencoder,
    TrainConfig,
    init_model,
    model_from_bytes,
    quantize_to_float32,
    train,
    weights_to_bytes,
)
from .pipeline import (
    PreprocessConfig,
    SourceTrainResult,
    build_activity_encoder,
    encode_log,
    evaluate_log,
    fit_time_encoder,
    make_target_time_encoder,
    prepare_log,
    score_events,
)

log = logging.getLogger(__name__)

BUNDLE_FORMAT_VERSION = 1
_BUNDLE_FILES = ("manifest.json", "weights.bin", "activity_vectors.txt")


@dataclass
class TransferBundle:
    """A trained model plus every resource needed to apply it elsewhere."""

    config: PreprocessConfig
    model: LstmModel
    model_meta: dict
    train_config: dict
    label_threshold_days: float
    store: EmbeddingStore | None = None
    vector_file_bytes: bytes | None = None
    onehot_vocabulary: list | None = None
    scaler_state: dict | None = None
    autoencoder_state: dict | None = None
    source_vocabulary: list = field(default_factory=list)
    source_name: str = ""
    ts_format: str = "%Y-%m-%dT%H:%M:%S"

    def activity_encoder(self):
        if self.config.encoder == "embedding":
            if self.store is None:
                raise ConfigurationError("bundle has no embedding store")
            return ActivityEmbedder(self.store)
        encoder = OneHotActivityEncoder()
        encoder.fit(self.onehot_vocabulary or ())
        return encoder

    def autoencoder(self) -> TimeAutoencoder | None:
        if self.autoencoder_state is None:
            return None
        return TimeAutoencoder.from_state(self.autoencoder_state)


def build_bundle(
    result: SourceTrainResult,
    vector_file_bytes: bytes | None = None,
    store: EmbeddingStore | None = None,
    source_name: str = "",
    ts_format: str = "%Y-%m-%dT%H:%M:%S",
) -> TransferBundle:
    """Package a training run.  For embedding encoders pass the raw bytes of
    the vector file; they are stored verbatim so the receiving side parses
    the exact same floats."""
    if result.config.encoder == "embedding" and vector_file_bytes is None:
        raise ConfigurationError("embedding-based bundles need the vector file bytes")
    return TransferBundle(
        config=result.config,
        model=result.model,
        model_meta=dict(result.model_meta),
        train_config={
            "lr": result.train_config.lr,
            "max_epochs": result.train_config.max_epochs,
            "batch_size": result.train_config.batch_size,
            "patience": result.train_config.patience,
            "seed": result.train_config.seed,
        },
        label_threshold_days=result.label_threshold_days,
        store=store,
        vector_file_bytes=vector_file_bytes,
        onehot_vocabulary=result.onehot_vocabulary,
        scaler_state=result.scaler.state() if result.scaler is not None else None,
        autoencoder_state=result.autoencoder.state() if result.autoencoder is not None else None,
        source_vocabulary=list(result.source_vocabulary),
        source_name=source_name,
        ts_format=ts_format,
    )


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_bundle(bundle: TransferBundle, out_dir) -> Path:
    """Write the bundle directory: manifest.json, weights.bin, the vector
    file (embedding encoders only), and checksums.txt over all of them."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    weights = weights_to_bytes(bundle.model)
    manifest = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "source_name": bundle.source_name,
        "model": bundle.model_meta,
        "train_config": bundle.train_config,
        "preprocessing": bundle.config.to_dict(),
        "label_threshold_days": bundle.label_threshold_days,
        "scaler_state": bundle.scaler_state,
        "autoencoder_state": bundle.autoencoder_state,
        "onehot_vocabulary": bundle.onehot_vocabulary,
        "source_vocabulary": bundle.source_vocabulary,
        "ts_format": bundle.ts_format,
        "metrics": ["precision", "recall", "f1", "mcc", "auc_roc", "bce"],
        "embedding": None,
    }
    if bundle.config.encoder == "embedding":
        manifest["embedding"] = {
            "casing": bundle.store.casing,
            "kind": bundle.store.kind,
            "dim": bundle.store.dim,
            "fingerprint_sha256": _sha256(bundle.vector_file_bytes),
        }
    manifest_bytes = json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8")
    files = {"manifest.json": manifest_bytes, "weights.bin": weights}
    if bundle.vector_file_bytes is not None:
        files["activity_vectors.txt"] = bundle.vector_file_bytes
    for name, data in files.items():
        (out / name).write_bytes(data)
    checksum_lines = [f"{_sha256(data)}  {name}" for name, data in sorted(files.items())]
    (out / "checksums.txt").write_text("\n".join(checksum_lines) + "\n")
    return out


def load_bundle(in_dir) -> TransferBundle:
    """Read a bundle back, verifying every checksum and the embedding
    fingerprint before trusting any content."""
    src = Path(in_dir)
    try:
        checksum_bytes = (src / "checksums.txt").read_bytes()
    except FileNotFoundError:
        raise FormatError(f"{src} has no checksums.txt; not a bundle?") from None
    try:
        checksum_text = checksum_bytes.decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError("checksums.txt is corrupt (not valid UTF-8)") from None
    # strict line shape: a permissive parser would let single-byte flips
    # that only touch separators (space to tab, \n to \r) slip through
    recorded = {}
    for line in checksum_text.split("\n"):
        if line == "":
            continue
        match = re.fullmatch(r"([0-9a-f]{64})  (\S+)", line)
        if match is None:
            raise FormatError(f"malformed checksum line {line!r}")
        recorded[match.group(2)] = match.group(1)
    unknown = set(recorded) - set(_BUNDLE_FILES)
    if unknown:
        raise FormatError(f"checksums.txt lists unexpected files {sorted(unknown)}")

    contents = {}
    for name, digest in recorded.items():
        try:
            data = (src / name).read_bytes()
        except FileNotFoundError:
            raise FormatError(f"bundle file {name} is missing") from None
        actual = _sha256(data)
        if actual != digest:
            raise IntegrityError(
                f"checksum mismatch for {name}: recorded {digest[:12]}…, actual {actual[:12]}…"
            )
        contents[name] = data

    if "manifest.json" not in contents or "weights.bin" not in contents:
        raise FormatError("bundle must contain manifest.json and weights.bin")
    try:
        manifest = json.loads(contents["manifest.json"].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable manifest: {exc}") from None
    version = manifest.get("format_version")
    if version != BUNDLE_FORMAT_VERSION:
        raise VersionError(f"unsupported bundle format version {version!r}")

    config = PreprocessConfig.from_dict(manifest["preprocessing"])
    meta = manifest["model"]
    model = model_from_bytes(
        contents["weights.bin"], meta["input_dim"], meta["hidden"], meta["n_layers"]
    )

    store = None
    vector_bytes = None
    if config.encoder == "embedding":
        emb = manifest.get("embedding") or {}
        vector_bytes = contents.get("activity_vectors.txt")
        if vector_bytes is None:
            raise FormatError("embedding-based bundle is missing activity_vectors.txt")
        if _sha256(vector_bytes) != emb.get("fingerprint_sha256"):
            raise IntegrityError("embedding fingerprint does not match activity_vectors.txt")
        store = load_embedding_store(
            vector_bytes, casing=emb.get("casing", "uncased"), kind=emb.get("kind", "token_level")
        )

    return TransferBundle(
        config=config,
        model=model,
        model_meta=meta,
        train_config=manifest.get("train_config", {}),
        label_threshold_days=float(manifest["label_threshold_days"]),
        store=store,
        vector_file_bytes=vector_bytes,
        onehot_vocabulary=manifest.get("onehot_vocabulary"),
        scaler_state=manifest.get("scaler_state"),
        autoencoder_state=manifest.get("autoencoder_state"),
        source_vocabulary=manifest.get("source_vocabulary") or [],
        source_name=manifest.get("source_name", ""),
        ts_format=manifest.get("ts_format", "%Y-%m-%dT%H:%M:%S"),
    )


# ------------------------------------------------------------- target scoring

@dataclass
class TargetEvaluation:
    report: EvalReport
    label_threshold_days: float
    identity: list = field(default_factory=list)
    oov: dict = field(default_factory=dict)
    n_traces: int = 0


def evaluate_on_target(
    bundle: TransferBundle,
    target_log: EventLog,
    split: SplitSpec | None = SplitSpec(),
    whole_log: bool = False,
    scaler_mode: str | None = None,
) -> TargetEvaluation:
    """Apply a bundled model to a target log without any training.

    The target is prepared exactly as the source was (same length filter,
    same label quantile, applied to the target's own durations).  By default
    the chronological test split is scored, with per-domain scaler
    statistics fitted on the target training split; ``whole_log=True``
    scores every trace instead (statistics then come from the whole log).
    """
    config = bundle.config
    if scaler_mode is not None:
        if scaler_mode not in ("per_domain", "source"):
            raise ConfigurationError(f"unknown scaler mode {scaler_mode!r}")
        config = PreprocessConfig.from_dict({**config.to_dict(), "scaler_mode": scaler_mode})
    prepared, threshold_days = prepare_log(target_log, config)
    if whole_log:
        eval_log, fit_log = prepared, prepared
    else:
        fit_log, _, eval_log = temporal_split(prepared, split or SplitSpec())

    activity_encoder = bundle.activity_encoder()
    time_encoder = make_target_time_encoder(
        config, bundle.scaler_state, bundle.autoencoder(), fit_log
    )
    report, identity = evaluate_log(bundle.model, eval_log, activity_encoder, time_encoder, config)
    oov = activity_encoder.coverage() if isinstance(activity_encoder, ActivityEmbedder) else {}
    if oov.get("oov"):
        log.info(
            "target %s: %d/%d activity lookups had no vector",
            target_log.name or "log", oov["oov"], oov["lookups"],
        )
    return TargetEvaluation(
        report=report,
        label_threshold_days=threshold_days,
        identity=identity,
        oov=oov,
        n_traces=len(eval_log),
    )


# ----------------------------------------------------- from-scratch comparison

@dataclass
class ScratchComparison:
    transferred: EvalReport
    scratch: list  # one EvalReport per seed
    seeds: list
    identity: list
    transferred_summary: dict = field(default_factory=dict)
    scratch_summary: dict = field(default_factory=dict)

    def table_rows(self):
        rows = [("Transferred (no target training)", self.transferred_summary)]
        rows.append((f"Trained on target ({len(self.seeds)} seeds)", self.scratch_summary))
        return rows


def _train_scratch_model(train_log, val_log, bundle, config, seed):
    """One from-scratch run on target data with the bundle's recipe: same
    architecture and preprocessing, but every fittable resource (scaler,
    autoencoder, one-hot vocabulary) refitted on the target training split."""
    vocabulary = sorted(train_log.activity_vocabulary)
    activity_encoder = build_activity_encoder(config, store=bundle.store, vocabulary=vocabulary)
    time_encoder = fit_time_encoder(config, train_log, seed=seed)
    train_ds = encode_log(train_log, activity_encoder, time_encoder, config)
    val_ds = encode_log(val_log, activity_encoder, time_encoder, config)
    meta = bundle.model_meta
    start = init_model(
        train_ds.n_features, hidden=meta["hidden"], n_layers=meta["n_layers"],
        scheme=meta.get("init_scheme", "dedicated"), seed=seed,
    )
    tc = dict(bundle.train_config or {})
    tc["seed"] = seed
    best, _ = train(start, train_ds, val_ds, TrainConfig(**tc))
    return quantize_to_float32(best), activity_encoder, time_encoder


def compare_from_scratch(
    bundle: TransferBundle,
    target_log: EventLog,
    seeds=(0, 1, 2, 3, 4),
    split: SplitSpec = SplitSpec(),
) -> ScratchComparison:
    """Transferred model vs models trained on the target itself.

    Both arms score the identical chronological test split of the target
    (asserted on prefix identity).  The transferred arm needs no training
    and is deterministic; the scratch arm trains one model per seed.
    """
    config = bundle.config
    prepared, _ = prepare_log(target_log, config)
    train_log, val_log, test_log = temporal_split(prepared, split)

    transferred = evaluate_on_target(bundle, target_log, split=split)

    scratch_reports = []
    for seed in seeds:
        model, activity_encoder, time_encoder = _train_scratch_model(
            train_log, val_log, bundle, config, seed
        )
        report, identity = evaluate_log(model, test_log, activity_encoder, time_encoder, config)
        if identity != transferred.identity:
            raise ConfigurationError(
                "scratch and transferred arms scored different prefix sets"
            )
        scratch_reports.append(report)
        log.info("scratch seed %d: test AUC %.3f", seed, report.auc_roc)

    return ScratchComparison(
        transferred=transferred.report,
        scratch=scratch_reports,
        seeds=list(seeds),
        identity=transferred.identity,
        transferred_summary=summarize_reports([transferred.report]),
        scratch_summary=summarize_reports(scratch_reports),
    )


# ------------------------------------------------------------ training-set scale

def scale_study(
    bundle: TransferBundle,
    target_log: EventLog,
    fractions=(10, 20, 30, 40, 50, 60, 70, 80, 90, 100),
    seeds=(0, 1, 2, 3, 4),
    split: SplitSpec = SplitSpec(),
) -> dict:
    """How much target training data would a from-scratch model need?

    For each percentage, models are trained on the temporally first part of
    the target training split (full validation and test splits unchanged)
    and compared against the transferred model's constant AUC.  Fractions
    that leave fewer than two training traces are skipped.
    """
    config = bundle.config
    prepared, _ = prepare_log(target_log, config)
    train_log, val_log, test_log = temporal_split(prepared, split)
    transferred = evaluate_on_target(bundle, target_log, split=split)

    rows = []
    for fraction in fractions:
        if not 0 < fraction <= 100:
            raise ConfigurationError(f"fraction {fraction} not in (0, 100]")
        n_sub = int(len(train_log) * fraction / 100)
        if n_sub < 2:
            log.warning("skipping %d%%: only %d training traces", fraction, n_sub)
            rows.append({"fraction": fraction, "n_traces": n_sub, "skipped": True})
            continue
        sub_log = EventLog(train_log.traces[:n_sub], name=f"{train_log.name}@{fraction}%")
        aucs = []
        for seed in seeds:
            model, activity_encoder, time_encoder = _train_scratch_model(
                sub_log, val_log, bundle, config, seed
            )
            report, _ = evaluate_log(model, test_log, activity_encoder, time_encoder, config)
            aucs.append(report.auc_roc)
        rows.append(
            {
                "fraction": fraction,
                "n_traces": n_sub,
                "skipped": False,
                "auc_mean": float(np.mean(aucs)),
                "auc_std": float(np.std(aucs)),
                "auc_per_seed": aucs,
            }
        )
        log.info("%3d%% of target training data: AUC %.3f", fraction, rows[-1]["auc_mean"])
    return {
        "transferred_auc": transferred.report.auc_roc,
        "seeds": list(seeds),
        "rows": rows,
    }


# ------------------------------------------------------------------- streaming

def predict_online(bundle: TransferBundle, lines, scaler_state: dict | None = None):
    """Score running process instances from an NDJSON stream.

    Each input line holds ``{"case_id": …, "events": [{"activity": …,
    "timestamp": …}, …]}``.  Yields one dict per line: a prediction
    ``{"case_id", "prefix_length", "score", "predicted_label"}`` or, for a
    malformed record, ``{"error": <field>, "line": k}`` without stopping the
    stream.

    Online instances arrive alone, so per-domain scaler refitting is not
    possible: the bundle's source statistics apply (or pass an explicitly
    fitted ``scaler_state``).
    """
    config = bundle.config
    activity_encoder = bundle.activity_encoder()
    state = scaler_state if scaler_state is not None else bundle.scaler_state
    online_config = config
    if config.time_encoding == "scaled_duration" and config.scaler_mode == "per_domain":
        log.info("online scoring uses the bundled source scaling statistics")
        online_config = PreprocessConfig.from_dict({**config.to_dict(), "scaler_mode": "source"})
    time_encoder = make_target_time_encoder(online_config, state, bundle.autoencoder(), None)

    for line_no, raw in enumerate(lines, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8", errors="replace")
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError:
            yield {"error": "json", "line": line_no}
            continue
        if not isinstance(record, dict):
            yield {"error": "json", "line": line_no}
            continue
        case_id = record.get("case_id")
        if case_id is None or str(case_id) == "":
            yield {"error": "case_id", "line": line_no}
            continue
        raw_events = record.get("events")
        if not isinstance(raw_events, list) or not raw_events:
            yield {"error": "events", "line": line_no}
            continue
        events, bad_field = _parse_stream_events(raw_events, str(case_id), bundle.ts_format)
        if bad_field is not None:
            yield {"error": bad_field, "line": line_no}
            continue
        if config.prefix_encoding == "index" and len(events) > config.max_steps:
            yield {"error": "length", "line": line_no}
            continue
        score = score_events(bundle.model, events, activity_encoder, time_encoder, config)
        yield {
            "case_id": str(case_id),
            "prefix_length": len(events),
            "score": score,
            "predicted_label": int(score >= config.threshold),
        }


def _parse_stream_events(raw_events, case_id, ts_format):
    """Validate one record's events; returns (events, None) on success or
    (None, offending_field_name) on the first problem."""
    events = []
    for item in raw_events:
        if not isinstance(item, dict):
            return None, "events"
        activity = item.get("activity")
        if not isinstance(activity, str) or not activity.strip():
            return None, "activity"
        try:
            ts = datetime.strptime(str(item.get("timestamp")), ts_format)
        except (ValueError, TypeError):
            return None, "timestamp"
        if ts.tzinfo is not None:
            ts = (ts - ts.utcoffset()).replace(tzinfo=None)
        ts = ts.replace(microsecond=0)
        events.append((ts, len(events), Event(case_id, activity.strip(), ts)))
    events.sort(key=lambda e: (e[0], e[1]))
    return tuple(e for _, _, e in events), None


# ----------------------------------------------------------- embedding insight

@dataclass(frozen=True)
class DistanceMatrix:
    """Pairwise Euclidean distances between target (rows) and source
    (columns) activity vectors."""

    values: np.ndarray
    target_activities: tuple
    source_activities: tuple


def embedding_distance_matrix(store: EmbeddingStore, source_vocabulary, target_vocabulary) -> DistanceMatrix:
    source = sorted(set(source_vocabulary))
    target = sorted(set(target_vocabulary))
    if not source or not target:
        raise ConfigurationError("both vocabularies must be non-empty")
    embedder = ActivityEmbedder(store)
    source_vecs = np.stack([embedder.encode(a) for a in source])
    target_vecs = np.stack([embedder.encode(a) for a in target])
    diff = target_vecs[:, None, :] - source_vecs[None, :, :]
    values = np.sqrt((diff**2).sum(axis=2))
    return DistanceMatrix(values, tuple(target), tuple(source))


def write_distance_artifacts(matrix: DistanceMatrix, out_dir) -> dict:
    """Persist the distance matrix as CSV and as an SVG heatmap."""
    import csv as _csv

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "embedding_distances.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["target\\source", *matrix.source_activities])
        for name, row in zip(matrix.target_activities, matrix.values):
            writer.writerow([name, *(f"{v:.6f}" for v in row)])

    svg_path = out / "embedding_distances.svg"
    n_rows, n_cols = matrix.values.shape
    fig, ax = plt.subplots(
        figsize=(max(4.0, 0.45 * n_cols + 2.5), max(3.0, 0.45 * n_rows + 1.5))
    )
    image = ax.imshow(matrix.values, cmap="viridis", aspect="auto")
    ax.set_xticks(range(n_cols), matrix.source_activities, rotation=90, fontsize=7)
    ax.set_yticks(range(n_rows), matrix.target_activities, fontsize=7)
    ax.set_xlabel("source activities")
    ax.set_ylabel("target activities")
    fig.colorbar(image, ax=ax, label="euclidean distance")
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    return {"csv": csv_path, "svg": svg_path}
