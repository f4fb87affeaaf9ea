"""Shared fixtures: a synthetic two-domain ticket process and tiny word
vectors.

Domain "a" and domain "b" run the same kind of process under different
activity names ("open ticket" vs "open case").  The names share their verb
tokens, so embedding-based features line up across domains while one-hot
features cannot.  Traces containing an escalation step take days longer,
which makes the in-time outcome learnable from the activity sequence.
"""

from datetime import datetime, timedelta

import numpy as np
import pytest

from procxfer.embeddings import load_embedding_store
from procxfer.eventlog import Event, EventLog, Trace

TOKENS = (
    "open", "close", "assign", "update", "review", "escalate", "resolve",
    "ticket", "case", "engineer", "technician", "status", "record",
    "request", "issue", "problem",
)

ACTIVITIES = {
    "a": {
        "start": "open ticket",
        "mid": ("assign engineer", "update status", "review request"),
        "escalate": "escalate issue",
        "end": "close ticket",
    },
    "b": {
        "start": "open case",
        "mid": ("assign technician", "update record", "review case"),
        "escalate": "escalate problem",
        "end": "close case",
    },
}


def token_vectors_text(dim: int = 8, seed: int = 7, header: bool = True) -> str:
    """A word2vec-format text block covering the synthetic vocabulary."""
    rng = np.random.default_rng(seed)
    lines = [f"{len(TOKENS)} {dim}"] if header else []
    for token in TOKENS:
        values = rng.normal(0.0, 1.0, dim)
        lines.append(token + " " + " ".join(f"{v:.6f}" for v in values))
    return "\n".join(lines) + "\n"


def synth_log(
    n_traces: int = 60,
    seed: int = 0,
    domain: str = "a",
    escalate_prob: float = 0.35,
    name: str | None = None,
) -> EventLog:
    """Generate a synthetic event log with a learnable in-time outcome.

    Slow cases escalate right after opening and keep dragging from there, so
    even short prefixes carry the outcome signal (through the escalation
    activity and through elapsed time).
    """
    acts = ACTIVITIES[domain]
    rng = np.random.default_rng(seed)
    base = datetime(2021, 3, 1, 9, 0, 0)
    traces = []
    for i in range(n_traces):
        case_id = f"{domain}{i:04d}"
        slow = rng.random() < escalate_prob
        drag = 40.0 if slow else 1.0
        ts = base + timedelta(hours=3 * i)
        events = [Event(case_id, acts["start"], ts)]
        if slow:
            ts += timedelta(minutes=float(rng.exponential(30.0)) + 5.0)
            events.append(Event(case_id, acts["escalate"], ts))
        for _ in range(int(rng.integers(1, 5))):
            ts += timedelta(minutes=drag * (float(rng.exponential(45.0)) + 5.0))
            events.append(Event(case_id, str(rng.choice(acts["mid"])), ts))
        ts += timedelta(minutes=drag * (float(rng.exponential(60.0)) + 10.0))
        if slow:
            ts += timedelta(days=float(rng.uniform(2.0, 5.0)))
        events.append(Event(case_id, acts["end"], ts))
        events = [Event(case_id, e.activity, e.timestamp.replace(microsecond=0)) for e in events]
        traces.append(Trace(case_id, tuple(events)))
    traces.sort(key=lambda t: t.events[0].timestamp)
    return EventLog(tuple(traces), name=name or f"synthetic-{domain}")


def log_to_csv(log: EventLog) -> str:
    lines = ["case_id,activity,timestamp"]
    for trace in log.traces:
        for event in trace.events:
            lines.append(
                f"{event.case_id},{event.activity},{event.timestamp.strftime('%Y-%m-%dT%H:%M:%S')}"
            )
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def vectors_text():
    return token_vectors_text()


@pytest.fixture(scope="session")
def store(vectors_text):
    return load_embedding_store(vectors_text.encode(), casing="uncased", kind="token_level")


@pytest.fixture(scope="session")
def source_log():
    return synth_log(n_traces=60, seed=1, domain="a")


@pytest.fixture(scope="session")
def target_log():
    return synth_log(n_traces=50, seed=2, domain="b")
