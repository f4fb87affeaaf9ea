"""Bundles, target-side evaluation, streaming, and embedding diagnostics."""

import json

import numpy as np
import pytest

from procxfer.errors import (
    ConfigurationError,
    FormatError,
    IntegrityError,
    VersionError,
)
from procxfer.eventlog import SplitSpec, temporal_split
from procxfer.nn import TrainConfig
from procxfer.pipeline import (
    PreprocessConfig,
    make_target_time_encoder,
    prepare_log,
    score_log,
    train_source,
)
from procxfer.embeddings import EmbeddingStore
from procxfer.transfer import (
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

from conftest import synth_log

SMALL_TRAIN = TrainConfig(lr=0.02, max_epochs=4, batch_size=32, patience=4, seed=0)


@pytest.fixture(scope="module")
def source_bundle(store, vectors_text):
    result = train_source(
        synth_log(n_traces=40, seed=1, domain="a"),
        PreprocessConfig(),
        store=store,
        train_config=SMALL_TRAIN,
        hidden=8,
        n_layers=1,
    )
    return build_bundle(
        result, vector_file_bytes=vectors_text.encode(), store=store, source_name="synthetic-a"
    )


@pytest.fixture()
def saved_bundle(source_bundle, tmp_path):
    return save_bundle(source_bundle, tmp_path / "bundle")


def retamper(bundle_dir, name, data):
    """Rewrite one bundle file and refresh checksums.txt to match."""
    import hashlib

    (bundle_dir / name).write_bytes(data)
    lines = []
    for existing in sorted(p.name for p in bundle_dir.iterdir() if p.name != "checksums.txt"):
        digest = hashlib.sha256((bundle_dir / existing).read_bytes()).hexdigest()
        lines.append(f"{digest}  {existing}")
    (bundle_dir / "checksums.txt").write_text("\n".join(lines) + "\n")


def test_build_bundle_requires_vector_bytes(store):
    result = train_source(
        synth_log(n_traces=20, seed=2, domain="a"),
        PreprocessConfig(),
        store=store,
        train_config=SMALL_TRAIN,
        hidden=4,
        n_layers=1,
    )
    with pytest.raises(ConfigurationError, match="vector file"):
        build_bundle(result)


def test_bundle_directory_layout(saved_bundle):
    names = sorted(p.name for p in saved_bundle.iterdir())
    assert names == ["activity_vectors.txt", "checksums.txt", "manifest.json", "weights.bin"]
    manifest = json.loads((saved_bundle / "manifest.json").read_text())
    assert manifest["format_version"] == 1
    assert manifest["model"]["hidden"] == 8
    assert manifest["embedding"]["dim"] == 8
    assert manifest["preprocessing"]["encoder"] == "embedding"
    assert manifest["scaler_state"]["strategy"] == "relative_quantile"
    assert manifest["source_name"] == "synthetic-a"
    assert len(manifest["source_vocabulary"]) > 0


def test_bundle_round_trip_preserves_everything(source_bundle, saved_bundle):
    loaded = load_bundle(saved_bundle)
    assert loaded.config == source_bundle.config
    assert loaded.model_meta == source_bundle.model_meta
    assert loaded.train_config == source_bundle.train_config
    assert loaded.label_threshold_days == source_bundle.label_threshold_days
    assert loaded.scaler_state == source_bundle.scaler_state
    assert loaded.source_vocabulary == source_bundle.source_vocabulary
    assert loaded.ts_format == source_bundle.ts_format
    assert loaded.vector_file_bytes == source_bundle.vector_file_bytes
    for (name, a), (_, b) in zip(
        source_bundle.model.param_items(), loaded.model.param_items()
    ):
        assert np.array_equal(a, b), name


def test_round_trip_scores_are_bit_identical(source_bundle, saved_bundle, target_log):
    loaded = load_bundle(saved_bundle)
    before = evaluate_on_target(source_bundle, target_log)
    after = evaluate_on_target(loaded, target_log)
    assert before.report == after.report
    assert before.identity == after.identity


def test_tampering_with_any_file_is_detected(source_bundle, tmp_path):
    for name in ("manifest.json", "weights.bin", "activity_vectors.txt", "checksums.txt"):
        bundle_dir = save_bundle(source_bundle, tmp_path / f"b_{name}")
        raw = bytearray((bundle_dir / name).read_bytes())
        flip_at = len(raw) // 2
        raw[flip_at] ^= 0xFF
        (bundle_dir / name).write_bytes(bytes(raw))
        with pytest.raises((IntegrityError, FormatError)):
            load_bundle(bundle_dir)


def test_version_check_fires_before_model_loading(source_bundle, tmp_path):
    bundle_dir = save_bundle(source_bundle, tmp_path / "b")
    manifest = json.loads((bundle_dir / "manifest.json").read_text())
    manifest["format_version"] = 99
    retamper(bundle_dir, "manifest.json", json.dumps(manifest, indent=2, sort_keys=True).encode())
    with pytest.raises(VersionError):
        load_bundle(bundle_dir)


def test_missing_and_unexpected_files(source_bundle, tmp_path):
    bundle_dir = save_bundle(source_bundle, tmp_path / "b")
    (bundle_dir / "weights.bin").unlink()
    with pytest.raises(FormatError, match="missing"):
        load_bundle(bundle_dir)
    bundle_dir2 = save_bundle(source_bundle, tmp_path / "b2")
    checksums = (bundle_dir2 / "checksums.txt").read_text()
    (bundle_dir2 / "checksums.txt").write_text(checksums + "0" * 64 + "  extra.bin\n")
    with pytest.raises(FormatError, match="unexpected"):
        load_bundle(bundle_dir2)
    with pytest.raises(FormatError, match="checksums"):
        load_bundle(tmp_path / "nowhere")


def test_embedding_fingerprint_is_cross_checked(source_bundle, tmp_path):
    bundle_dir = save_bundle(source_bundle, tmp_path / "b")
    vectors = (bundle_dir / "activity_vectors.txt").read_bytes()
    retamper(bundle_dir, "activity_vectors.txt", vectors + b"zzz 1 2 3 4 5 6 7 8\n")
    with pytest.raises(IntegrityError, match="fingerprint"):
        load_bundle(bundle_dir)


def test_evaluate_on_target(source_bundle, target_log):
    evaluation = evaluate_on_target(source_bundle, target_log)
    prepared, threshold = prepare_log(target_log, source_bundle.config)
    _, _, test_split = temporal_split(prepared)
    assert evaluation.label_threshold_days == threshold
    assert evaluation.n_traces == len(test_split)
    assert evaluation.report.n == sum(len(t) for t in test_split.traces)
    assert evaluation.oov["oov"] == 0  # shared verb tokens cover every name
    whole = evaluate_on_target(source_bundle, target_log, whole_log=True)
    assert whole.report.n == sum(len(t) for t in prepared.traces)


def test_scaler_mode_override_changes_scores(source_bundle, target_log):
    per_domain = evaluate_on_target(source_bundle, target_log)
    source_stats = evaluate_on_target(source_bundle, target_log, scaler_mode="source")
    assert per_domain.identity == source_stats.identity
    assert per_domain.report != source_stats.report
    with pytest.raises(ConfigurationError):
        evaluate_on_target(source_bundle, target_log, scaler_mode="both")


def test_onehot_bundle_round_trip(store, target_log, tmp_path):
    result = train_source(
        synth_log(n_traces=30, seed=3, domain="a"),
        PreprocessConfig(encoder="onehot"),
        train_config=SMALL_TRAIN,
        hidden=4,
        n_layers=1,
    )
    bundle = build_bundle(result)
    bundle_dir = save_bundle(bundle, tmp_path / "onehot")
    assert not (bundle_dir / "activity_vectors.txt").exists()
    loaded = load_bundle(bundle_dir)
    assert loaded.onehot_vocabulary == result.onehot_vocabulary
    # target activity names are unseen, so the encoder yields zero vectors
    encoder = loaded.activity_encoder()
    assert not encoder.encode("open case").any()
    evaluation = evaluate_on_target(loaded, target_log)
    assert evaluation.report.n > 0


def test_compare_from_scratch(source_bundle, target_log):
    comparison = compare_from_scratch(source_bundle, target_log, seeds=(0, 1))
    assert comparison.seeds == [0, 1]
    assert len(comparison.scratch) == 2
    assert comparison.transferred_summary["auc_roc"][1] == 0.0  # single report
    assert comparison.scratch_summary["auc_roc"][0] == pytest.approx(
        np.mean([r.auc_roc for r in comparison.scratch])
    )
    rows = comparison.table_rows()
    assert rows[0][0] == "Transferred (no target training)"
    assert "2 seeds" in rows[1][0]


def test_scale_study_rows_and_skips(source_bundle, target_log):
    study = scale_study(source_bundle, target_log, fractions=(1, 50, 100), seeds=(0,))
    assert study["transferred_auc"] > 0
    by_fraction = {row["fraction"]: row for row in study["rows"]}
    assert by_fraction[1]["skipped"] is True  # 1% of 32 training traces is none
    assert by_fraction[50]["n_traces"] == 16
    assert by_fraction[100]["n_traces"] == 32
    assert not by_fraction[100]["skipped"]
    assert 0.0 <= by_fraction[100]["auc_mean"] <= 1.0
    assert len(by_fraction[100]["auc_per_seed"]) == 1
    with pytest.raises(ConfigurationError):
        scale_study(source_bundle, target_log, fractions=(0,), seeds=(0,))


def stream_record(trace, k, ts_format="%Y-%m-%dT%H:%M:%S"):
    return json.dumps(
        {
            "case_id": trace.case_id,
            "events": [
                {"activity": e.activity, "timestamp": e.timestamp.strftime(ts_format)}
                for e in trace.events[:k]
            ],
        }
    )


def test_predict_online_scores_and_errors(source_bundle, target_log):
    trace = target_log.traces[0]
    lines = [
        stream_record(trace, 2),
        "",  # blank lines are skipped outright
        "{not json",
        json.dumps({"events": [{"activity": "x", "timestamp": "2021-01-01T00:00:00"}]}),
        json.dumps({"case_id": "c", "events": []}),
        json.dumps({"case_id": "c", "events": [{"activity": " ", "timestamp": "2021-01-01T00:00:00"}]}),
        json.dumps({"case_id": "c", "events": [{"activity": "open case", "timestamp": "yesterday"}]}),
        stream_record(trace, len(trace)),
    ]
    out = list(predict_online(source_bundle, lines))
    assert len(out) == 7
    first, *errors, last = out
    assert first["case_id"] == trace.case_id
    assert first["prefix_length"] == 2
    assert 0.0 <= first["score"] <= 1.0
    assert first["predicted_label"] == int(first["score"] >= 0.5)
    assert [e["error"] for e in errors] == ["json", "case_id", "events", "activity", "timestamp"]
    assert [e["line"] for e in errors] == [3, 4, 5, 6, 7]
    assert last["prefix_length"] == len(trace)


def test_predict_online_matches_source_mode_batch_scores(source_bundle, target_log):
    # online scoring falls back to the bundled source statistics, so it must
    # agree bit for bit with batch scoring under scaler_mode="source"
    prepared, _ = prepare_log(target_log, source_bundle.config)
    encoder = source_bundle.activity_encoder()
    time_encoder = make_target_time_encoder(
        PreprocessConfig.from_dict({**source_bundle.config.to_dict(), "scaler_mode": "source"}),
        source_bundle.scaler_state,
        source_bundle.autoencoder(),
        None,
    )
    scores, _, identity = score_log(
        source_bundle.model, prepared, encoder, time_encoder, source_bundle.config
    )
    score_by_identity = dict(zip(identity, scores))
    lines = []
    expected = []
    for trace in prepared.traces[:10]:
        for k in (1, len(trace)):
            lines.append(stream_record(trace, k))
            expected.append(score_by_identity[(trace.case_id, k)])
    out = list(predict_online(source_bundle, lines))
    assert [record["score"] for record in out] == expected


def test_predict_online_rejects_overlong_instances(source_bundle):
    n = source_bundle.config.max_steps + 1
    record = json.dumps(
        {
            "case_id": "long-runner",
            "events": [
                {"activity": "update record", "timestamp": f"2021-01-{1 + i // 24:02d}T{i % 24:02d}:00:00"}
                for i in range(n)
            ],
        }
    )
    out = list(predict_online(source_bundle, [record]))
    assert out == [{"error": "length", "line": 1}]


def test_predict_online_sorts_events_by_timestamp(source_bundle, target_log):
    trace = target_log.traces[1]
    k = min(3, len(trace))
    record = json.loads(stream_record(trace, k))
    record["events"] = record["events"][::-1]  # shuffled arrival order
    straight = list(predict_online(source_bundle, [stream_record(trace, k)]))
    shuffled = list(predict_online(source_bundle, [json.dumps(record)]))
    assert straight == shuffled


def test_embedding_distance_matrix_oracle():
    store = EmbeddingStore(
        dim=2,
        vectors={
            "open": np.array([0.0, 0.0]),
            "close": np.array([3.0, 4.0]),
            "case": np.array([0.0, 0.0]),
            "ticket": np.array([0.0, 0.0]),
        },
    )
    matrix = embedding_distance_matrix(
        store, ["close case", "open case"], ["open ticket", "close ticket"]
    )
    assert matrix.source_activities == ("close case", "open case")
    assert matrix.target_activities == ("close ticket", "open ticket")
    # mean-pooled vectors: "close *" -> (1.5, 2), "open *" -> (0, 0)
    np.testing.assert_allclose(matrix.values, [[0.0, 2.5], [2.5, 0.0]])
    with pytest.raises(ConfigurationError):
        embedding_distance_matrix(store, [], ["open case"])


def test_write_distance_artifacts(tmp_path, store):
    matrix = embedding_distance_matrix(
        store, ["open case", "close case"], ["open ticket", "close ticket"]
    )
    paths = write_distance_artifacts(matrix, tmp_path / "analysis")
    assert paths["csv"].exists()
    assert paths["svg"].exists()
    lines = paths["csv"].read_text().splitlines()
    assert lines[0].split(",")[1:] == ["close case", "open case"]
    value = float(lines[1].split(",")[1])
    assert value == pytest.approx(matrix.values[0, 0], abs=1e-6)
    assert "<svg" in paths["svg"].read_text()
