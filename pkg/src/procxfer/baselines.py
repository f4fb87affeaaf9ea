"""Flat baseline classifiers over [samples, steps * features] matrices.

Three reference models, each written out directly: logistic regression
trained by full-batch gradient descent, a CART decision tree with Gini
splits, and a bootstrap-aggregated forest of such trees.  They exist to
quantify how much the sequence model and the embedding encoding actually
buy, so they follow the same estimator conventions as the LSTM wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import ConfigurationError
from .nn.lstm import sigmoid
from .validation import check_binary_labels, check_matrix


class LogisticRegressionBaseline(BaseEstimator, ClassifierMixin):
    """Logistic regression fitted with full-batch gradient descent on the
    L2-regularised mean cross-entropy (bias unregularised).

    Weights start at zero, so the fit is deterministic and invariant to
    duplicating the dataset.
    """

    def __init__(self, lr: float = 0.1, epochs: int = 500, l2: float = 1e-4):
        self.lr = lr
        self.epochs = epochs
        self.l2 = l2

    @staticmethod
    def loss_and_grad(X, y, w, b, l2):
        """Regularised mean BCE (computed from logits, so it cannot
        overflow) and its exact gradient."""
        z = X @ w + b
        softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
        loss = float((softplus - y * z).mean() + 0.5 * l2 * (w @ w))
        residual = sigmoid(z) - y
        grad_w = X.T @ residual / X.shape[0] + l2 * w
        grad_b = float(residual.mean())
        return loss, grad_w, grad_b

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_binary_labels(y, X.shape[0])
        if self.lr <= 0 or self.epochs < 1 or self.l2 < 0:
            raise ConfigurationError(
                f"bad logistic regression settings: lr={self.lr}, epochs={self.epochs}, l2={self.l2}"
            )
        w = np.zeros(X.shape[1])
        b = 0.0
        losses = []
        for _ in range(self.epochs):
            loss, grad_w, grad_b = self.loss_and_grad(X, y, w, b, self.l2)
            w -= self.lr * grad_w
            b -= self.lr * grad_b
            losses.append(loss)
        self.coef_ = w
        self.intercept_ = b
        self.loss_curve_ = losses
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X) -> np.ndarray:
        if not hasattr(self, "coef_"):
            raise NotFittedError("LogisticRegressionBaseline is not fitted")
        X = check_matrix(X)
        return sigmoid(X @ self.coef_ + self.intercept_)

    def predict_proba(self, X) -> np.ndarray:
        p = self.score_samples(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.score_samples(X) >= 0.5).astype(np.int64)


@dataclass
class TreeNode:
    """Internal nodes carry a (feature, threshold) test; leaves carry the
    training fraction of positive labels."""

    probability: float
    n: int
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _gini(n_pos: float, n: float) -> float:
    p = n_pos / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _best_split(X, y, min_leaf, feature_ids):
    """Highest-Gini-gain (feature, threshold) over candidate midpoints.

    Candidates sit between consecutive distinct values with at least
    ``min_leaf`` samples on each side.  Ties keep the lowest feature index,
    then the lowest threshold.  Returns None when no candidate exists.
    """
    n = y.shape[0]
    total_pos = float(y.sum())
    parent = _gini(total_pos, n)
    best = None  # (gain, feature, threshold)
    for j in feature_ids:
        values = X[:, j]
        order = np.argsort(values, kind="mergesort")
        sorted_vals = values[order]
        pos_left = np.cumsum(y[order])[:-1]  # positives among the first i samples
        sizes_left = np.arange(1, n)
        boundary = sorted_vals[1:] != sorted_vals[:-1]
        allowed = boundary & (sizes_left >= min_leaf) & (n - sizes_left >= min_leaf)
        if not allowed.any():
            continue
        sizes_right = n - sizes_left
        pos_right = total_pos - pos_left
        gini_left = 1.0 - (pos_left / sizes_left) ** 2 - (1.0 - pos_left / sizes_left) ** 2
        gini_right = 1.0 - (pos_right / sizes_right) ** 2 - (1.0 - pos_right / sizes_right) ** 2
        gains = parent - (sizes_left * gini_left + sizes_right * gini_right) / n
        gains[~allowed] = -np.inf
        i = int(np.argmax(gains))  # first max = lowest threshold
        if gains[i] > 0.0 and (best is None or gains[i] > best[0]):
            threshold = 0.5 * (sorted_vals[i] + sorted_vals[i + 1])
            best = (float(gains[i]), int(j), threshold)
    return best


def _grow_tree(X, y, depth, max_depth, min_leaf, rng=None, max_features=None):
    n = y.shape[0]
    node = TreeNode(probability=float(y.mean()), n=n)
    if depth >= max_depth or n < 2 * min_leaf or y.min() == y.max():
        return node
    if max_features is not None and max_features < X.shape[1]:
        feature_ids = np.sort(rng.choice(X.shape[1], size=max_features, replace=False))
    else:
        feature_ids = np.arange(X.shape[1])
    split = _best_split(X, y, min_leaf, feature_ids)
    if split is None:
        return node
    _, node.feature, node.threshold = split
    goes_left = X[:, node.feature] <= node.threshold
    node.left = _grow_tree(X[goes_left], y[goes_left], depth + 1, max_depth, min_leaf, rng, max_features)
    node.right = _grow_tree(X[~goes_left], y[~goes_left], depth + 1, max_depth, min_leaf, rng, max_features)
    return node


def _tree_scores(node, X, out, idx):
    if node.is_leaf:
        out[idx] = node.probability
        return
    mask = X[idx, node.feature] <= node.threshold
    _tree_scores(node.left, X, out, idx[mask])
    _tree_scores(node.right, X, out, idx[~mask])


class DecisionTreeBaseline(BaseEstimator, ClassifierMixin):
    """CART-style binary classification tree: Gini impurity, midpoint
    thresholds, leaf probabilities from training label means."""

    def __init__(self, max_depth: int = 10, min_leaf: int = 5):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_binary_labels(y, X.shape[0])
        if self.max_depth < 1 or self.min_leaf < 1:
            raise ConfigurationError(
                f"bad tree settings: max_depth={self.max_depth}, min_leaf={self.min_leaf}"
            )
        self.tree_ = _grow_tree(X, y, 0, self.max_depth, self.min_leaf)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X) -> np.ndarray:
        if not hasattr(self, "tree_"):
            raise NotFittedError("DecisionTreeBaseline is not fitted")
        X = check_matrix(X)
        out = np.empty(X.shape[0])
        _tree_scores(self.tree_, X, out, np.arange(X.shape[0]))
        return out

    def predict_proba(self, X) -> np.ndarray:
        p = self.score_samples(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.score_samples(X) >= 0.5).astype(np.int64)


class RandomForestBaseline(BaseEstimator, ClassifierMixin):
    """Bagged CART trees with per-node feature subsampling.

    Per-tree generators are spawned from one seed sequence, so results are
    reproducible and independent of how many trees run.  With
    ``bootstrap=False``, ``max_features=None`` and one tree this collapses
    to :class:`DecisionTreeBaseline` exactly (same builder underneath).
    """

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int = 10,
        min_leaf: int = 5,
        max_features: str | int | None = "sqrt",
        bootstrap: bool = True,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed

    def _resolve_max_features(self, d: int):
        if self.max_features is None:
            return None
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(d)))
        m = int(self.max_features)
        if not 1 <= m <= d:
            raise ConfigurationError(f"max_features={m} out of range [1, {d}]")
        return m

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_binary_labels(y, X.shape[0])
        if self.n_trees < 1:
            raise ConfigurationError(f"n_trees must be >= 1, got {self.n_trees}")
        m = self._resolve_max_features(X.shape[1])
        self.trees_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_trees):
            rng = np.random.default_rng(child)
            if self.bootstrap:
                idx = rng.integers(0, X.shape[0], X.shape[0])
                Xb, yb = X[idx], y[idx]
            else:
                Xb, yb = X, y
            self.trees_.append(
                _grow_tree(Xb, yb, 0, self.max_depth, self.min_leaf, rng, m)
            )
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X) -> np.ndarray:
        if not hasattr(self, "trees_"):
            raise NotFittedError("RandomForestBaseline is not fitted")
        X = check_matrix(X)
        total = np.zeros(X.shape[0])
        out = np.empty(X.shape[0])
        idx = np.arange(X.shape[0])
        for tree in self.trees_:
            _tree_scores(tree, X, out, idx)
            total += out
        return total / len(self.trees_)

    def predict_proba(self, X) -> np.ndarray:
        p = self.score_samples(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.score_samples(X) >= 0.5).astype(np.int64)
