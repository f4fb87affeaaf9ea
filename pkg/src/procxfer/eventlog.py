"""Event-log ingestion: CSV parsing, outcome labelling, and temporal splits.

An event log is an ordered collection of traces; a trace is the ordered
sequence of events recorded for one process instance.  Ordering is
reconstructed from timestamps with stable sorts, so ties keep their file
order and parsing the same file twice yields the same log.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, EmptyLogError, RowError, SchemaError

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class Event:
    case_id: str
    activity: str
    timestamp: datetime


@dataclass(frozen=True)
class Trace:
    """One process instance: its events in temporal order, plus an optional
    binary outcome label (1 = finished in time)."""

    case_id: str
    events: tuple[Event, ...]
    label: int | None = None

    def __len__(self):
        return len(self.events)

    @property
    def duration_days(self) -> float:
        """Elapsed time between first and last event, in days."""
        delta = self.events[-1].timestamp - self.events[0].timestamp
        return delta.total_seconds() / SECONDS_PER_DAY


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]
    name: str = ""

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    @property
    def activity_vocabulary(self) -> frozenset[str]:
        return frozenset(e.activity for t in self.traces for e in t.events)

    def stats(self) -> dict:
        lengths = [len(t) for t in self.traces]
        return {
            "traces": len(self.traces),
            "events": int(sum(lengths)),
            "activities": len(self.activity_vocabulary),
            "max_length": max(lengths) if lengths else 0,
        }


@dataclass(frozen=True)
class CsvSchema:
    """Column names and value formats for a CSV event log."""

    case_col: str = "case_id"
    activity_col: str = "activity"
    timestamp_col: str = "timestamp"
    ts_format: str = "%Y-%m-%dT%H:%M:%S"
    delimiter: str = ","


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/validation/test fractions.

    Sizes are computed with floor arithmetic on the first two splits; the
    test split takes the remainder.
    """

    train: float = 0.64
    val: float = 0.16
    test: float = 0.20

    def __post_init__(self):
        for name in ("train", "val", "test"):
            f = getattr(self, name)
            if not 0.0 < f < 1.0:
                raise ConfigurationError(f"split fraction {name}={f} not in (0, 1)")
        if not math.isclose(self.train + self.val + self.test, 1.0, abs_tol=1e-9):
            raise ConfigurationError("split fractions must sum to 1")

    def sizes(self, n: int) -> tuple[int, int, int]:
        n_train = int(n * self.train)
        n_val = int(n * self.val)
        return n_train, n_val, n - n_train - n_val


def _parse_timestamp(raw: str, fmt: str, line: int) -> datetime:
    try:
        ts = datetime.strptime(raw, fmt)
    except ValueError as exc:
        raise RowError(f"bad timestamp {raw!r}: {exc}", line) from None
    if ts.tzinfo is not None:
        # normalise to UTC and drop the offset so comparisons stay cheap
        ts = (ts - ts.utcoffset()).replace(tzinfo=None)
    return ts.replace(microsecond=0)


def parse_event_log(source, schema: CsvSchema = CsvSchema(), name: str = "") -> EventLog:
    """Read a CSV event log and regroup rows into traces.

    ``source`` may be a path or an open text/binary stream.  Rows are grouped
    by case id (cases keep their order of first appearance), events within a
    case are stably sorted by timestamp, and traces are stably sorted by the
    timestamp of their first event.

    Raises :class:`SchemaError` if a configured column is missing,
    :class:`RowError` (with the file line number) for malformed rows, and
    :class:`EmptyLogError` if no traces remain.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return parse_event_log(fh, schema, name or Path(source).stem)
    if isinstance(source, (bytes, bytearray)):
        source = io.StringIO(source.decode("utf-8"))
    elif hasattr(source, "read") and isinstance(source.read(0), bytes):
        source = io.TextIOWrapper(source, encoding="utf-8", newline="")

    reader = csv.reader(source, delimiter=schema.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyLogError("event log file has no header row") from None
    header = [h.strip().lstrip("﻿") for h in header]

    idx = {}
    for col in (schema.case_col, schema.activity_col, schema.timestamp_col):
        if col not in header:
            raise SchemaError(f"column {col!r} not found in header {header}")
        idx[col] = header.index(col)
    needed = max(idx.values()) + 1

    groups: dict[str, list[tuple[datetime, int, Event]]] = {}
    order = 0
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < needed:
            raise RowError(f"expected at least {needed} fields, got {len(row)}", line)
        case_id = row[idx[schema.case_col]].strip()
        activity = row[idx[schema.activity_col]].strip()
        raw_ts = row[idx[schema.timestamp_col]].strip()
        if not case_id:
            raise RowError("empty case id", line)
        if not activity:
            raise RowError("empty activity name", line)
        ts = _parse_timestamp(raw_ts, schema.ts_format, line)
        groups.setdefault(case_id, []).append((ts, order, Event(case_id, activity, ts)))
        order += 1

    if not groups:
        raise EmptyLogError("event log contains no events")

    traces = []
    for case_id, rows in groups.items():
        rows.sort(key=lambda r: (r[0], r[1]))  # stable: ties keep file order
        traces.append(Trace(case_id, tuple(e for _, _, e in rows)))
    traces.sort(key=lambda t: t.events[0].timestamp)
    return EventLog(tuple(traces), name=name)


def filter_by_length(log: EventLog, min_len: int = 1, max_len: int = 50) -> EventLog:
    """Drop traces shorter than ``min_len`` or longer than ``max_len`` events."""
    if min_len < 1 or max_len < min_len:
        raise ConfigurationError(f"bad length bounds [{min_len}, {max_len}]")
    kept = tuple(t for t in log.traces if min_len <= len(t) <= max_len)
    if not kept:
        raise EmptyLogError(
            f"no traces with length in [{min_len}, {max_len}] (had {len(log)})"
        )
    return EventLog(kept, name=log.name)


def label_in_time(log: EventLog, quantile: float = 0.70) -> tuple[EventLog, float]:
    """Attach binary in-time labels: 1 iff trace duration is at or below the
    given quantile of all trace durations in ``log``.

    Returns the labelled log and the threshold in days.  The quantile is
    computed with linear interpolation over the whole input log, so the
    threshold depends on every trace, not only the training portion.
    """
    if not 0.0 < quantile < 1.0:
        raise ConfigurationError(f"quantile {quantile} not in (0, 1)")
    if not log.traces:
        raise EmptyLogError("cannot label an empty log")
    durations = np.array([t.duration_days for t in log.traces], dtype=np.float64)
    threshold = float(np.quantile(durations, quantile))
    labelled = tuple(
        Trace(t.case_id, t.events, label=int(t.duration_days <= threshold))
        for t in log.traces
    )
    return EventLog(labelled, name=log.name), threshold


def temporal_split(
    log: EventLog, spec: SplitSpec = SplitSpec()
) -> tuple[EventLog, EventLog, EventLog]:
    """Split chronologically ordered traces into train/val/test sub-logs.

    The log is assumed already ordered by first-event timestamp (as produced
    by :func:`parse_event_log`); the earliest traces become training data.
    """
    n = len(log.traces)
    n_train, n_val, n_test = spec.sizes(n)
    parts = {
        "train": log.traces[:n_train],
        "val": log.traces[n_train : n_train + n_val],
        "test": log.traces[n_train + n_val :],
    }
    for part, traces in parts.items():
        if not traces:
            raise EmptyLogError(f"{part} split is empty for n={n} with {spec}")
    return tuple(
        EventLog(traces, name=f"{log.name}/{part}" if log.name else part)
        for part, traces in parts.items()
    )
