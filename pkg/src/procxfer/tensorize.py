"""Prefix extraction and tensor encoding.

Each labelled trace of length N yields N prefixes (its first 1..N events),
all inheriting the trace's outcome label.  Three encodings build the
[samples, steps, features] tensor consumed by the sequence models:

* ``index``      one row per event, zero-padded on the right to ``max_steps``
* ``last_k``     only the last k events (fewer if the prefix is shorter)
* ``aggregate``  a single row, the mean over the prefix's event rows

Feature rows concatenate the activity encoding with the time features, so
``v = activity_encoder.n_features + time_encoder.n_features``.  X is stored
as float32 (the on-disk cache format), which keeps large logs affordable;
models upcast per batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError, VersionError
from .eventlog import Event, EventLog

DATASET_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Prefix:
    """The first ``len(events)`` events of a labelled trace."""

    case_id: str
    events: tuple[Event, ...]
    label: int

    def __len__(self):
        return len(self.events)


@dataclass
class PrefixDataset:
    """Encoded prefixes: X [s, T, v] float32, labels, and true row counts.

    ``lengths[i]`` is the number of real (non-padding) rows of sample ``i``;
    for the index encoding it equals the prefix length.  ``case_ids`` and
    ``prefix_lengths`` identify which prefix each row came from.
    """

    X: np.ndarray
    y: np.ndarray
    lengths: np.ndarray
    encoding: str
    k: int | None = None
    case_ids: tuple[str, ...] = ()
    prefix_lengths: np.ndarray | None = None

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[2]

    @property
    def max_steps(self) -> int:
        return self.X.shape[1]

    def identity(self) -> list[tuple[str, int]]:
        """(case_id, prefix length) pairs, for asserting two datasets cover
        the same prefixes."""
        lens = self.prefix_lengths if self.prefix_lengths is not None else self.lengths
        return list(zip(self.case_ids, (int(v) for v in lens)))


def generate_prefixes(log: EventLog, min_len: int = 1) -> list[Prefix]:
    """All prefixes of at least ``min_len`` events, trace order preserved,
    lengths ascending within a trace."""
    if min_len < 1:
        raise ConfigurationError(f"min_len must be >= 1, got {min_len}")
    prefixes = []
    for trace in log.traces:
        if trace.label is None:
            raise ConfigurationError(
                f"trace {trace.case_id!r} has no outcome label; label the log first"
            )
        for k in range(min_len, len(trace) + 1):
            prefixes.append(Prefix(trace.case_id, trace.events[:k], trace.label))
    if not prefixes:
        raise ConfigurationError(f"no prefixes of length >= {min_len}")
    return prefixes


def _event_row(events, j, activity_encoder, time_encoder) -> np.ndarray:
    return np.concatenate(
        [activity_encoder.encode(events[j].activity), time_encoder.features(events, j)]
    )


def event_matrix(events, activity_encoder, time_encoder) -> np.ndarray:
    """Feature rows for a full event sequence, [n_events, v] float64.

    Row j only depends on events[0..j], so slicing the matrix at k rows
    gives exactly the rows the length-k prefix would produce.
    """
    if not events:
        raise ConfigurationError("cannot encode an empty event sequence")
    return np.stack(
        [_event_row(events, j, activity_encoder, time_encoder) for j in range(len(events))]
    )


def encode_index(prefixes, activity_encoder, time_encoder, max_steps: int = 50) -> PrefixDataset:
    """Index encoding: event j fills row j; rows beyond the prefix stay 0."""
    n_feat = activity_encoder.n_features + time_encoder.n_features
    X = np.zeros((len(prefixes), max_steps, n_feat), dtype=np.float32)
    y = np.empty(len(prefixes), dtype=np.float64)
    lengths = np.empty(len(prefixes), dtype=np.int64)
    for i, p in enumerate(prefixes):
        if len(p) > max_steps:
            raise ConfigurationError(
                f"prefix of case {p.case_id!r} has {len(p)} events, more than max_steps={max_steps}"
            )
        for j in range(len(p)):
            X[i, j] = _event_row(p.events, j, activity_encoder, time_encoder)
        y[i] = p.label
        lengths[i] = len(p)
    return PrefixDataset(
        X, y, lengths, "index",
        case_ids=tuple(p.case_id for p in prefixes),
        prefix_lengths=lengths.copy(),
    )


def encode_last_k(prefixes, activity_encoder, time_encoder, k: int = 3) -> PrefixDataset:
    """Last-k encoding: rows are the prefix's final ``k`` events (all of
    them when the prefix is shorter), with time features still measured from
    the case start."""
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    n_feat = activity_encoder.n_features + time_encoder.n_features
    X = np.zeros((len(prefixes), k, n_feat), dtype=np.float32)
    y = np.empty(len(prefixes), dtype=np.float64)
    lengths = np.empty(len(prefixes), dtype=np.int64)
    prefix_lengths = np.empty(len(prefixes), dtype=np.int64)
    for i, p in enumerate(prefixes):
        m = min(k, len(p))
        start = len(p) - m
        for j in range(m):
            X[i, j] = _event_row(p.events, start + j, activity_encoder, time_encoder)
        y[i] = p.label
        lengths[i] = m
        prefix_lengths[i] = len(p)
    return PrefixDataset(
        X, y, lengths, "last_k", k=k,
        case_ids=tuple(p.case_id for p in prefixes),
        prefix_lengths=prefix_lengths,
    )


def encode_aggregate(prefixes, activity_encoder, time_encoder) -> PrefixDataset:
    """Aggregation encoding: one row, the feature-wise mean over the prefix."""
    n_feat = activity_encoder.n_features + time_encoder.n_features
    X = np.zeros((len(prefixes), 1, n_feat), dtype=np.float32)
    y = np.empty(len(prefixes), dtype=np.float64)
    prefix_lengths = np.empty(len(prefixes), dtype=np.int64)
    for i, p in enumerate(prefixes):
        rows = np.stack(
            [_event_row(p.events, j, activity_encoder, time_encoder) for j in range(len(p))]
        )
        X[i, 0] = rows.mean(axis=0)
        y[i] = p.label
        prefix_lengths[i] = len(p)
    return PrefixDataset(
        X, y, np.ones(len(prefixes), dtype=np.int64), "aggregate",
        case_ids=tuple(p.case_id for p in prefixes),
        prefix_lengths=prefix_lengths,
    )


def encode_prefixes(
    prefixes,
    activity_encoder,
    time_encoder,
    encoding: str = "index",
    max_steps: int = 50,
    k: int = 3,
) -> PrefixDataset:
    if encoding == "index":
        return encode_index(prefixes, activity_encoder, time_encoder, max_steps)
    if encoding == "last_k":
        return encode_last_k(prefixes, activity_encoder, time_encoder, k)
    if encoding == "aggregate":
        return encode_aggregate(prefixes, activity_encoder, time_encoder)
    raise ConfigurationError(f"unknown prefix encoding {encoding!r}")


def flatten(dataset: PrefixDataset) -> tuple[np.ndarray, np.ndarray]:
    """Row-major [s, T*v] view for the flat baseline models."""
    s, t, v = dataset.X.shape
    return dataset.X.reshape(s, t * v).astype(np.float64), dataset.y.copy()


def save_dataset(dataset: PrefixDataset, out_dir) -> None:
    """Cache a dataset as raw little-endian float32 plus a JSON manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": DATASET_FORMAT_VERSION,
        "shape": list(dataset.X.shape),
        "encoding": dataset.encoding,
        "k": dataset.k,
        "dtype": "float32-le",
        "case_ids": list(dataset.case_ids),
        "prefix_lengths": [int(v) for v in dataset.prefix_lengths]
        if dataset.prefix_lengths is not None
        else None,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    dataset.X.astype("<f4").tofile(out / "X.bin")
    dataset.y.astype("<f4").tofile(out / "y.bin")
    dataset.lengths.astype("<i4").tofile(out / "lengths.bin")


def load_dataset(in_dir) -> PrefixDataset:
    src = Path(in_dir)
    try:
        manifest = json.loads((src / "manifest.json").read_text())
    except FileNotFoundError:
        raise FormatError(f"no dataset manifest in {src}") from None
    version = manifest.get("format_version")
    if version != DATASET_FORMAT_VERSION:
        raise VersionError(f"unsupported dataset format version {version!r}")
    s, t, v = manifest["shape"]
    X = np.fromfile(src / "X.bin", dtype="<f4")
    if X.size != s * t * v:
        raise FormatError(f"X.bin has {X.size} values, expected {s * t * v}")
    y = np.fromfile(src / "y.bin", dtype="<f4").astype(np.float64)
    lengths = np.fromfile(src / "lengths.bin", dtype="<i4").astype(np.int64)
    if y.size != s or lengths.size != s:
        raise FormatError("y.bin/lengths.bin size does not match manifest shape")
    prefix_lengths = manifest.get("prefix_lengths")
    return PrefixDataset(
        X.reshape(s, t, v),
        y,
        lengths,
        manifest["encoding"],
        k=manifest.get("k"),
        case_ids=tuple(manifest.get("case_ids", ())),
        prefix_lengths=np.array(prefix_lengths, dtype=np.int64)
        if prefix_lengths is not None
        else None,
    )
