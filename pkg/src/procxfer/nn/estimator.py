"""scikit-learn style wrapper around the numpy LSTM."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from ..validation import check_binary_labels, check_lengths, check_prefix_tensor
from .lstm import batch_scores, init_model
from .training import TrainConfig, train


class _ArrayDataset:
    """Adapts raw arrays to the (X, y, lengths) interface train() expects."""

    def __init__(self, X, y, lengths):
        self.X = X
        self.y = y
        self.lengths = lengths

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[2]


class LstmOutcomeClassifier(BaseEstimator, ClassifierMixin):
    """Binary outcome classifier over padded prefix tensors.

    Follows the usual estimator conventions: constructor stores
    hyper-parameters untouched, ``fit`` learns ``model_`` and returns self,
    ``predict_proba`` yields [P(0), P(1)] columns.  ``fit`` accepts optional
    per-sample true lengths and an explicit validation set; without one it
    carves a seeded 80/20 split off the training data for early stopping.
    """

    def __init__(
        self,
        hidden: int = 128,
        n_layers: int = 2,
        init_scheme: str = "dedicated",
        lr: float = 1e-3,
        max_epochs: int = 100,
        batch_size: int = 64,
        patience: int = 10,
        seed: int = 0,
    ):
        self.hidden = hidden
        self.n_layers = n_layers
        self.init_scheme = init_scheme
        self.lr = lr
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.patience = patience
        self.seed = seed

    def fit(self, X, y, lengths=None, validation_data=None):
        X = check_prefix_tensor(X)
        y = check_binary_labels(y, X.shape[0])
        lengths = check_lengths(lengths, X.shape[0], X.shape[1])
        if validation_data is not None:
            Xv, yv, lv = validation_data
            Xv = check_prefix_tensor(Xv, "validation X")
            yv = check_binary_labels(yv, Xv.shape[0], "validation y")
            lv = check_lengths(lv, Xv.shape[0], Xv.shape[1], "validation lengths")
        else:
            rng = np.random.default_rng(self.seed)
            perm = rng.permutation(X.shape[0])
            n_val = max(1, X.shape[0] // 5)
            val_idx, train_idx = perm[:n_val], perm[n_val:]
            if train_idx.size == 0:
                train_idx = val_idx
            Xv, yv, lv = X[val_idx], y[val_idx], lengths[val_idx]
            X, y, lengths = X[train_idx], y[train_idx], lengths[train_idx]

        start = init_model(
            X.shape[2], hidden=self.hidden, n_layers=self.n_layers,
            scheme=self.init_scheme, seed=self.seed,
        )
        config = TrainConfig(
            lr=self.lr, max_epochs=self.max_epochs, batch_size=self.batch_size,
            patience=self.patience, seed=self.seed,
        )
        self.model_, self.history_ = train(
            start, _ArrayDataset(X, y, lengths), _ArrayDataset(Xv, yv, lv), config
        )
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[2]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("LstmOutcomeClassifier is not fitted; call fit first")

    def score_samples(self, X, lengths=None) -> np.ndarray:
        """P(label=1) per sample."""
        self._check_fitted()
        X = check_prefix_tensor(X)
        lengths = check_lengths(lengths, X.shape[0], X.shape[1])
        return batch_scores(self.model_, X, lengths)

    def predict_proba(self, X, lengths=None) -> np.ndarray:
        p = self.score_samples(X, lengths)
        return np.column_stack([1.0 - p, p])

    def predict(self, X, lengths=None) -> np.ndarray:
        return (self.score_samples(X, lengths) >= 0.5).astype(np.int64)
