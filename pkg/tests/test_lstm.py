"""The numpy LSTM: forward correctness, gradients, init, serialisation."""

import numpy as np
import pytest

from procxfer.errors import ConfigurationError, NumericalError
from procxfer.metrics import binary_cross_entropy
from procxfer.nn.lstm import (
    GATE_ORDER,
    batch_forward,
    batch_loss_and_grads,
    batch_scores,
    forward,
    hidden_states,
    init_model,
    model_from_bytes,
    quantize_to_float32,
    score_sequence,
    sigmoid,
    weights_to_bytes,
)

from reference import scalar_hidden_states, scalar_probability


def random_model(rng, input_dim, hidden, n_layers):
    scheme = "dedicated" if rng.random() < 0.5 else "uniform"
    return init_model(input_dim, hidden, n_layers, scheme=scheme, seed=int(rng.integers(1 << 30)))


def test_sigmoid_stability_and_values():
    np.testing.assert_allclose(sigmoid(np.array([0.0])), [0.5])
    out = sigmoid(np.array([-800.0, 800.0, -1.0, 1.0]))
    assert np.all(np.isfinite(out))
    assert out[0] == 0.0 and out[1] == 1.0
    assert out[2] == pytest.approx(1.0 - out[3])


def test_forward_matches_scalar_reference():
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(30):
        v = int(rng.integers(2, 7))
        hidden = int(rng.integers(3, 9))
        n_layers = int(rng.integers(1, 3))
        T = int(rng.integers(1, 13))
        model = random_model(rng, v, hidden, n_layers)
        X = rng.normal(0.0, 1.0, (T, v))
        ours = hidden_states(model, X)
        ref = np.array(scalar_hidden_states(model, X))
        worst = max(worst, float(np.abs(ours - ref).max()))
        assert abs(forward(model, X) - scalar_probability(model, X)) < 1e-12
    assert worst < 1e-12


def test_forward_input_validation():
    model = init_model(3, hidden=4, n_layers=1, seed=0)
    with pytest.raises(ConfigurationError):
        hidden_states(model, np.zeros((2, 5)))
    X = np.zeros((3, 3))
    with pytest.raises(ConfigurationError):
        forward(model, X, length=0)
    with pytest.raises(ConfigurationError):
        forward(model, X, length=4)


def test_padding_rows_are_never_read():
    rng = np.random.default_rng(5)
    for _ in range(10):
        model = random_model(rng, 4, 6, 2)
        L = int(rng.integers(1, 8))
        X = rng.normal(0.0, 1.0, (L, 4))
        padded = np.full((50, 4), np.nan)
        padded[:L] = X
        assert forward(model, padded, length=L) == forward(model, X)


def test_score_sequence_equals_per_prefix_forward_bitwise():
    rng = np.random.default_rng(6)
    model = random_model(rng, 5, 7, 2)
    X = rng.normal(0.0, 1.0, (9, 5))
    per_step = score_sequence(model, X)
    for k in range(1, 10):
        assert per_step[k - 1] == forward(model, X[:k])


def test_batch_scores_agree_with_scoring_path():
    rng = np.random.default_rng(7)
    model = random_model(rng, 4, 8, 2)
    lengths = np.array([1, 4, 7, 3])
    X = np.zeros((4, 7, 4))
    for i, L in enumerate(lengths):
        X[i, :L] = rng.normal(0.0, 1.0, (L, 4))
    batched = batch_scores(model, X, lengths)
    single = np.array([forward(model, X[i], int(L)) for i, L in enumerate(lengths)])
    # two different kernel layouts: equal to rounding, not bit-equal
    np.testing.assert_allclose(batched, single, rtol=1e-10, atol=1e-12)


def test_batch_forward_skips_steps_beyond_longest_sample():
    model = init_model(3, hidden=4, n_layers=1, seed=1)
    X = np.full((2, 50, 3), np.nan)
    X[0, :2] = 0.5
    X[1, :1] = -0.5
    logits, h_last, caches = batch_forward(model, X, np.array([2, 1]))
    assert np.all(np.isfinite(logits))
    assert caches[0]["F"].shape[1] == 2
    assert h_last.shape == (2, 4)


def grad_rel_err(analytic, numeric):
    return float(np.abs(analytic - numeric).max() / (np.abs(numeric).max() + 1e-12))


def central_difference(model, X, y, lengths, arr, step=1e-5):
    num = np.zeros_like(arr)
    flat = arr.ravel()
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + step
        up, _ = batch_loss_and_grads(model, X, y, lengths)
        flat[j] = orig - step
        down, _ = batch_loss_and_grads(model, X, y, lengths)
        flat[j] = orig
        num.ravel()[j] = (up - down) / (2.0 * step)
    return num


def test_bptt_matches_finite_differences():
    rng = np.random.default_rng(42)
    model = init_model(5, hidden=4, n_layers=2, scheme="dedicated", seed=3)
    X = np.zeros((3, 3, 5))
    lengths = np.array([3, 2, 1])
    for i, L in enumerate(lengths):
        X[i, :L] = rng.normal(0.0, 1.0, (L, 5))
    y = np.array([1.0, 0.0, 1.0])
    _, grads = batch_loss_and_grads(model, X, y, lengths)
    assert set(grads) == {name for name, _ in model.param_items()}
    for name, arr in model.param_items():
        numeric = central_difference(model, X, y, lengths, arr)
        err = grad_rel_err(grads[name], numeric)
        assert err < 1e-4, f"{name}: relative error {err}"


def test_gradients_respect_sample_lengths():
    # shortening a padded tail must not change any gradient
    model = init_model(3, hidden=4, n_layers=1, seed=9)
    rng = np.random.default_rng(10)
    X = np.zeros((2, 5, 3))
    X[0, :5] = rng.normal(size=(5, 3))
    X[1, :2] = rng.normal(size=(2, 3))
    y = np.array([1.0, 0.0])
    _, grads_padded = batch_loss_and_grads(model, X, y, np.array([5, 2]))
    X[1, 2:] = 99.0  # junk in the padding
    _, grads_junk = batch_loss_and_grads(model, X, y, np.array([5, 2]))
    for name in grads_padded:
        np.testing.assert_array_equal(grads_padded[name], grads_junk[name])


def test_dedicated_init_invariants():
    model = init_model(6, hidden=16, n_layers=2, scheme="dedicated", seed=11)
    for layer in model.layers:
        d = layer.input_dim
        bound = np.sqrt(6.0 / (d + 16))
        for gate in GATE_ORDER:
            W = getattr(layer, f"W_{gate}")
            U = getattr(layer, f"U_{gate}")
            assert np.abs(W).max() <= bound
            gram = U.T @ U - np.eye(16)
            assert np.abs(gram).max() < 1e-5
        assert np.all(layer.b_f == 1.0)
        for gate in ("i", "g", "o"):
            assert not getattr(layer, f"b_{gate}").any()
    assert np.abs(model.W_out).max() <= np.sqrt(6.0 / 16)
    assert model.b_out[0] == 0.0


def test_uniform_init_bounds():
    model = init_model(6, hidden=8, n_layers=1, scheme="uniform", seed=12)
    for name, arr in model.param_items():
        assert np.abs(arr).max() <= 0.05, name
    # uniform draws its biases too, so b_f is not pinned at 1
    assert not np.all(model.layers[0].b_f == 1.0)


def test_init_is_bitwise_deterministic():
    a = init_model(5, hidden=8, n_layers=2, scheme="dedicated", seed=21)
    b = init_model(5, hidden=8, n_layers=2, scheme="dedicated", seed=21)
    for (name_a, arr_a), (_, arr_b) in zip(a.param_items(), b.param_items()):
        assert np.array_equal(arr_a, arr_b), name_a
    c = init_model(5, hidden=8, n_layers=2, scheme="dedicated", seed=22)
    assert not np.array_equal(a.layers[0].W_f, c.layers[0].W_f)


def test_init_validation():
    with pytest.raises(ConfigurationError):
        init_model(0, hidden=4, n_layers=1)
    with pytest.raises(ConfigurationError):
        init_model(3, hidden=4, n_layers=1, scheme="glorot_normal")


def test_batch_loss_is_bce_on_logit_scale():
    model = init_model(3, hidden=4, n_layers=1, seed=2)
    rng = np.random.default_rng(3)
    X = rng.normal(size=(4, 2, 3))
    lengths = np.array([2, 2, 1, 2])
    y = np.array([1.0, 0.0, 1.0, 0.0])
    loss, _ = batch_loss_and_grads(model, X, y, lengths)
    logits, _, _ = batch_forward(model, X, lengths)
    assert loss == pytest.approx(binary_cross_entropy(sigmoid(logits), y), abs=1e-12)


def test_non_finite_logit_raises_numerical_error():
    model = init_model(3, hidden=4, n_layers=1, seed=2)
    model.W_out[:] = np.inf
    X = np.ones((2, 2, 3))
    with np.errstate(invalid="ignore"):
        with pytest.raises(NumericalError, match="sample 0"):
            batch_loss_and_grads(model, X, np.array([1.0, 0.0]), np.array([2, 2]))


def test_weight_bytes_round_trip_after_quantization():
    model = quantize_to_float32(init_model(5, hidden=6, n_layers=2, seed=13))
    raw = weights_to_bytes(model)
    n_params = sum(arr.size for _, arr in model.param_items())
    assert len(raw) == 4 * n_params
    back = model_from_bytes(raw, input_dim=5, hidden=6, n_layers=2)
    for (name, arr), (_, arr_back) in zip(model.param_items(), back.param_items()):
        assert np.array_equal(arr, arr_back), name
    with pytest.raises(ConfigurationError, match="expected"):
        model_from_bytes(raw[:-4], input_dim=5, hidden=6, n_layers=2)


def test_quantize_is_idempotent_and_close():
    model = init_model(4, hidden=5, n_layers=1, seed=14)
    once = quantize_to_float32(model)
    twice = quantize_to_float32(once)
    for (name, a), (_, b) in zip(once.param_items(), twice.param_items()):
        assert np.array_equal(a, b), name
    assert np.abs(once.layers[0].W_f - model.layers[0].W_f).max() < 1e-6
    # the original model is untouched
    assert not np.array_equal(once.layers[0].W_f, model.layers[0].W_f)


def test_model_copy_is_deep():
    model = init_model(3, hidden=4, n_layers=1, seed=15)
    dup = model.copy()
    dup.layers[0].W_f[0, 0] += 1.0
    assert model.layers[0].W_f[0, 0] != dup.layers[0].W_f[0, 0]
