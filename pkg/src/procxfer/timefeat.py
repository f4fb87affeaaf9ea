"""Timestamp-derived features and their scaling.

Every event contributes one raw value, the time elapsed since the start of
its case in days.  Three encodings turn that into model inputs: a scaled
scalar, sine-transformed calendar components, and a learned autoencoder
compression.  Each encoder exposes ``n_features`` and
``features(events, index)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import ConfigurationError
from .eventlog import SECONDS_PER_DAY, EventLog

SCALER_STRATEGIES = ("relative_quantile", "relative_mean", "relative_max", "min_max")

# canonical output order for cyclic components, with their periods
CYCLIC_PERIODS = {"hour": 24.0, "weekday": 7.0, "month": 12.0}


def _events_of(trace_or_events):
    return getattr(trace_or_events, "events", trace_or_events)


def duration_since_start(trace_or_events, index: int) -> float:
    """Days elapsed between a case's first event and the event at ``index``."""
    events = _events_of(trace_or_events)
    if not 0 <= index < len(events):
        raise ConfigurationError(f"event index {index} out of range [0, {len(events)})")
    delta = events[index].timestamp - events[0].timestamp
    return delta.total_seconds() / SECONDS_PER_DAY


def collect_durations(log: EventLog) -> np.ndarray:
    """All per-event elapsed-time values in a log, in trace order."""
    values = [
        duration_since_start(trace, i)
        for trace in log.traces
        for i in range(len(trace))
    ]
    return np.array(values, dtype=np.float64)


class TimeFeatureScaler(BaseEstimator, TransformerMixin):
    """Scales elapsed-time values by a statistic of the fitted log.

    The relative strategies divide by a quantile, the mean, or the max of
    the training values and deliberately do not clip, so a slower domain can
    produce values above 1.  ``min_max`` rescales to [0, 1] and clips.
    """

    def __init__(self, strategy: str = "relative_quantile", quantile: float = 0.70):
        self.strategy = strategy
        self.quantile = quantile

    def fit(self, log, y=None):
        if self.strategy not in SCALER_STRATEGIES:
            raise ConfigurationError(f"unknown scaler strategy {self.strategy!r}")
        if not 0.0 < self.quantile < 1.0:
            raise ConfigurationError(f"quantile {self.quantile} not in (0, 1)")
        values = log if isinstance(log, np.ndarray) else collect_durations(log)
        if values.size == 0:
            raise ConfigurationError("no elapsed-time values to fit scaler on")
        self.n_values_ = int(values.size)
        if self.strategy == "min_max":
            self.min_ = float(values.min())
            self.max_ = float(values.max())
            if self.max_ <= self.min_:
                raise ConfigurationError(
                    "degenerate min-max fit: all elapsed times equal"
                )
        else:
            if self.strategy == "relative_quantile":
                divisor = float(np.quantile(values, self.quantile))
            elif self.strategy == "relative_mean":
                divisor = float(values.mean())
            else:
                divisor = float(values.max())
            if divisor <= 0.0:
                raise ConfigurationError(
                    f"degenerate {self.strategy} fit: divisor {divisor} not positive"
                )
            self.divisor_ = divisor
        return self

    def transform(self, values):
        self._check_fitted()
        values = np.asarray(values, dtype=np.float64)
        if self.strategy == "min_max":
            scaled = (values - self.min_) / (self.max_ - self.min_)
            return np.clip(scaled, 0.0, 1.0)
        return values / self.divisor_

    def transform_value(self, value: float) -> float:
        return float(self.transform(np.float64(value)))

    def state(self) -> dict:
        """Fitted statistics, for serialisation."""
        self._check_fitted()
        out = {"strategy": self.strategy, "quantile": self.quantile, "n_values": self.n_values_}
        if self.strategy == "min_max":
            out.update(min=self.min_, max=self.max_)
        else:
            out["divisor"] = self.divisor_
        return out

    @classmethod
    def from_state(cls, state: dict) -> "TimeFeatureScaler":
        scaler = cls(strategy=state["strategy"], quantile=state["quantile"])
        scaler.n_values_ = int(state.get("n_values", 0))
        if scaler.strategy == "min_max":
            scaler.min_ = float(state["min"])
            scaler.max_ = float(state["max"])
        else:
            scaler.divisor_ = float(state["divisor"])
        return scaler

    def _check_fitted(self):
        if not hasattr(self, "n_values_"):
            raise NotFittedError("TimeFeatureScaler is not fitted; call fit first")


@dataclass
class ScaledDurationEncoder:
    """One feature per event: the scaled elapsed time since case start."""

    scaler: TimeFeatureScaler

    @property
    def n_features(self) -> int:
        return 1

    def features(self, trace_or_events, index: int) -> np.ndarray:
        value = duration_since_start(trace_or_events, index)
        return np.array([self.scaler.transform_value(value)], dtype=np.float64)


@dataclass(frozen=True)
class CyclicTimeEncoder:
    """Sine-transformed calendar components of the event timestamp.

    Output order is fixed (hour, weekday, month) regardless of the order the
    parts were requested in.  Weekday counts Monday as 0; months map to 0-11.
    """

    parts: tuple[str, ...] = ("hour", "weekday", "month")

    def __post_init__(self):
        if not self.parts:
            raise ConfigurationError("cyclic encoder needs at least one component")
        unknown = set(self.parts) - set(CYCLIC_PERIODS)
        if unknown:
            raise ConfigurationError(f"unknown cyclic components {sorted(unknown)}")

    @property
    def n_features(self) -> int:
        return len(set(self.parts))

    def features(self, trace_or_events, index: int) -> np.ndarray:
        events = _events_of(trace_or_events)
        if not 0 <= index < len(events):
            raise ConfigurationError(f"event index {index} out of range [0, {len(events)})")
        ts = events[index].timestamp
        raw = {"hour": ts.hour, "weekday": ts.weekday(), "month": ts.month - 1}
        wanted = set(self.parts)
        return np.array(
            [
                np.sin(2.0 * np.pi * raw[part] / CYCLIC_PERIODS[part])
                for part in CYCLIC_PERIODS
                if part in wanted
            ],
            dtype=np.float64,
        )


@dataclass
class AutoencoderDurationEncoder:
    """Elapsed time compressed through a trained autoencoder's bottleneck."""

    autoencoder: "TimeAutoencoder"  # noqa: F821 - see procxfer.nn.autoencoder

    @property
    def n_features(self) -> int:
        return self.autoencoder.latent_dim

    def features(self, trace_or_events, index: int) -> np.ndarray:
        value = duration_since_start(trace_or_events, index)
        return self.autoencoder.encode(np.array([value]))[0]
