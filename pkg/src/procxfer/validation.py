"""Input-validation helpers for array-shaped data.

scikit-learn's ``check_array`` rejects 3-d inputs, so the sequence models
carry their own checks.  All helpers return validated ``float64`` /
``int64`` arrays and raise :class:`ConfigurationError` on bad shapes.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError


def check_prefix_tensor(X, name: str = "X") -> np.ndarray:
    """Validate a [samples, steps, features] tensor."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ConfigurationError(f"{name} must be 3-d [samples, steps, features], got shape {X.shape}")
    if X.shape[0] == 0:
        raise ConfigurationError(f"{name} has no samples")
    if not np.isfinite(X).all():
        raise ConfigurationError(f"{name} contains non-finite values")
    return X


def check_matrix(X, name: str = "X") -> np.ndarray:
    """Validate a 2-d feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ConfigurationError(f"{name} must be 2-d, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ConfigurationError(f"{name} has no samples")
    if not np.isfinite(X).all():
        raise ConfigurationError(f"{name} contains non-finite values")
    return X


def check_binary_labels(y, n: int, name: str = "y") -> np.ndarray:
    """Validate labels as a length-``n`` vector of {0, 1}."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != n:
        raise ConfigurationError(f"{name} has {y.shape[0]} entries, expected {n}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ConfigurationError(f"{name} must contain only 0 and 1")
    return y


def check_lengths(lengths, n: int, max_steps: int, name: str = "lengths") -> np.ndarray:
    """Validate per-sample true sequence lengths against the padded size."""
    if lengths is None:
        return np.full(n, max_steps, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64).ravel()
    if lengths.shape[0] != n:
        raise ConfigurationError(f"{name} has {lengths.shape[0]} entries, expected {n}")
    if lengths.min(initial=1) < 1 or (n and lengths.max() > max_steps):
        raise ConfigurationError(f"{name} must lie in [1, {max_steps}]")
    return lengths


def check_scores(scores, name: str = "scores") -> np.ndarray:
    """Validate probability scores in [0, 1]."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise ConfigurationError(f"{name} is empty")
    if not np.isfinite(scores).all() or scores.min() < 0.0 or scores.max() > 1.0:
        raise ConfigurationError(f"{name} must be finite probabilities in [0, 1]")
    return scores
