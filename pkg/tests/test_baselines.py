"""Flat baseline models: logistic regression, CART tree, random forest."""

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from procxfer.baselines import (
    DecisionTreeBaseline,
    LogisticRegressionBaseline,
    RandomForestBaseline,
    _best_split,
    _gini,
)
from procxfer.errors import ConfigurationError
from procxfer.metrics import roc_auc


def separable_data(n=80, d=4, seed=0, flip=0.0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(np.float64)
    X = rng.normal(0.0, 1.0, (n, d))
    X[:, 0] += np.where(y == 1.0, 1.8, -1.8)
    if flip:
        swap = rng.random(n) < flip
        y[swap] = 1.0 - y[swap]
    return X, y


def test_logreg_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(12, 3))
    y = (rng.random(12) < 0.5).astype(np.float64)
    w = rng.normal(0.0, 0.5, 3)
    b = 0.3
    l2 = 0.01
    _, grad_w, grad_b = LogisticRegressionBaseline.loss_and_grad(X, y, w, b, l2)
    step = 1e-6
    for j in range(3):
        w_up, w_dn = w.copy(), w.copy()
        w_up[j] += step
        w_dn[j] -= step
        up, _, _ = LogisticRegressionBaseline.loss_and_grad(X, y, w_up, b, l2)
        dn, _, _ = LogisticRegressionBaseline.loss_and_grad(X, y, w_dn, b, l2)
        assert grad_w[j] == pytest.approx((up - dn) / (2 * step), rel=1e-6)
    up, _, _ = LogisticRegressionBaseline.loss_and_grad(X, y, w, b + step, l2)
    dn, _, _ = LogisticRegressionBaseline.loss_and_grad(X, y, w, b - step, l2)
    assert grad_b == pytest.approx((up - dn) / (2 * step), rel=1e-6)


def test_logreg_learns_separable_data():
    X, y = separable_data(seed=2)
    model = LogisticRegressionBaseline(lr=0.5, epochs=300).fit(X, y)
    assert model.loss_curve_[-1] < model.loss_curve_[0]
    assert roc_auc(model.score_samples(X), y) > 0.95
    assert model.coef_[0] > abs(model.coef_[1])
    proba = model.predict_proba(X[:3])
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert set(model.predict(X)) <= {0, 1}


def test_logreg_is_invariant_to_duplicating_the_data():
    X, y = separable_data(n=30, seed=3)
    once = LogisticRegressionBaseline(epochs=50).fit(X, y)
    twice = LogisticRegressionBaseline(epochs=50).fit(
        np.vstack([X, X]), np.concatenate([y, y])
    )
    np.testing.assert_allclose(once.coef_, twice.coef_, rtol=1e-12)
    assert once.intercept_ == pytest.approx(twice.intercept_, rel=1e-12)


def test_logreg_validation():
    X, y = separable_data(n=10, seed=4)
    with pytest.raises(ConfigurationError):
        LogisticRegressionBaseline(lr=-1.0).fit(X, y)
    with pytest.raises(NotFittedError):
        LogisticRegressionBaseline().score_samples(X)


def test_gini():
    assert _gini(0, 8) == 0.0
    assert _gini(8, 8) == 0.0
    assert _gini(4, 8) == pytest.approx(0.5)


def test_best_split_enumerated_oracle():
    # four points on one feature: the only clean cut is between 2 and 10
    X = np.array([[1.0], [2.0], [10.0], [11.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    gain, feature, threshold = _best_split(X, y, min_leaf=1, feature_ids=[0])
    assert feature == 0
    assert threshold == pytest.approx(6.0)
    assert gain == pytest.approx(0.5)  # parent gini 0.5, children pure
    # min_leaf=2 allows only the middle cut; it is still the best one
    assert _best_split(X, y, min_leaf=2, feature_ids=[0])[2] == pytest.approx(6.0)
    # a constant feature yields no candidates
    assert _best_split(np.ones((4, 1)), y, min_leaf=1, feature_ids=[0]) is None


def test_best_split_tie_breaks_toward_lowest_feature_and_threshold():
    # feature 1 mirrors feature 0, both split perfectly; the tie keeps feature 0
    X = np.array([[1.0, 5.0], [2.0, 6.0], [8.0, 9.0], [9.0, 10.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    _, feature, threshold = _best_split(X, y, min_leaf=1, feature_ids=[0, 1])
    assert feature == 0
    assert threshold == pytest.approx(5.0)


def test_tree_fits_axis_aligned_labels():
    rng = np.random.default_rng(5)
    X = rng.uniform(0.0, 1.0, (200, 3))
    y = ((X[:, 1] > 0.5) & (X[:, 2] > 0.3)).astype(np.float64)
    tree = DecisionTreeBaseline(max_depth=4, min_leaf=2).fit(X, y)
    assert roc_auc(tree.score_samples(X), y) > 0.98
    assert np.mean(tree.predict(X) == y) > 0.97


def test_tree_respects_depth_and_leaf_bounds():
    X, y = separable_data(n=100, seed=6, flip=0.2)
    stump = DecisionTreeBaseline(max_depth=1, min_leaf=5).fit(X, y)

    def walk(node, depth=0):
        if node.is_leaf:
            assert node.n >= 5
            return depth
        return max(walk(node.left, depth + 1), walk(node.right, depth + 1))

    assert walk(stump.tree_) <= 1
    deep = DecisionTreeBaseline(max_depth=8, min_leaf=5).fit(X, y)
    assert walk(deep.tree_) <= 8


def test_tree_pure_node_becomes_leaf():
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.ones(3)
    tree = DecisionTreeBaseline(min_leaf=1).fit(X, y)
    assert tree.tree_.is_leaf
    assert tree.tree_.probability == 1.0
    with pytest.raises(ConfigurationError):
        DecisionTreeBaseline(max_depth=0).fit(X, y)
    with pytest.raises(NotFittedError):
        DecisionTreeBaseline().score_samples(X)


def test_forest_degenerate_settings_equal_single_tree():
    X, y = separable_data(n=60, seed=7, flip=0.1)
    forest = RandomForestBaseline(
        n_trees=1, bootstrap=False, max_features=None, max_depth=6, min_leaf=3
    ).fit(X, y)
    tree = DecisionTreeBaseline(max_depth=6, min_leaf=3).fit(X, y)
    np.testing.assert_array_equal(forest.score_samples(X), tree.score_samples(X))


def test_forest_is_seeded_and_averages_trees():
    X, y = separable_data(n=80, seed=8, flip=0.15)
    a = RandomForestBaseline(n_trees=10, seed=3).fit(X, y)
    b = RandomForestBaseline(n_trees=10, seed=3).fit(X, y)
    np.testing.assert_array_equal(a.score_samples(X), b.score_samples(X))
    c = RandomForestBaseline(n_trees=10, seed=4).fit(X, y)
    assert not np.array_equal(a.score_samples(X), c.score_samples(X))
    assert roc_auc(a.score_samples(X), y) > 0.9
    scores = a.score_samples(X)
    assert np.all((scores >= 0.0) & (scores <= 1.0))


def test_forest_max_features_validation():
    X, y = separable_data(n=20, seed=9)
    assert RandomForestBaseline(max_features="sqrt")._resolve_max_features(9) == 3
    with pytest.raises(ConfigurationError):
        RandomForestBaseline(n_trees=2, max_features=10).fit(X, y)
    with pytest.raises(ConfigurationError):
        RandomForestBaseline(n_trees=0).fit(X, y)
