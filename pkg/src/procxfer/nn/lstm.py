"""Stacked LSTM with a sigmoid output head, implemented directly in numpy.

Per step t and layer, with x the layer input and h, c the recurrent state:

    f = sigmoid(W_f x + U_f h + b_f)        forget gate
    i = sigmoid(W_i x + U_i h + b_i)        input gate
    g = tanh   (W_g x + U_g h + b_g)        candidate cell
    o = sigmoid(W_o x + U_o h + b_o)        output gate
    c' = f * c + i * g
    h' = o * tanh(c')

The prediction reads the top layer's hidden state at the last real step
through a single sigmoid unit.

Two compute paths coexist on purpose.  The *scoring* path
(:func:`hidden_states` / :func:`forward` / :func:`score_sequence`) processes
one sequence at a time with shape-stable mat-vec products, so scoring a
prefix alone, scoring it as the padded row of a batch, or scoring it
mid-stream all produce bit-identical floats.  The *training* path
(:func:`batch_forward` / :func:`batch_loss_and_grads`) batches sequences
into big matrix products for speed; it is deterministic but not bit-aligned
with the scoring path, which is fine because its outputs only steer
optimisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, NumericalError

GATE_ORDER = ("f", "i", "g", "o")


def sigmoid(x):
    """Numerically stable logistic function, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmLayerParams:
    """One layer's gate weights: W_* act on the input, U_* on the previous
    hidden state, b_* are biases."""

    W_f: np.ndarray
    W_i: np.ndarray
    W_g: np.ndarray
    W_o: np.ndarray
    U_f: np.ndarray
    U_i: np.ndarray
    U_g: np.ndarray
    U_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_f.shape[1]

    def stacked(self):
        """Gate-stacked copies (4h, d), (4h, h), (4h,) in f, i, g, o order."""
        W = np.concatenate([self.W_f, self.W_i, self.W_g, self.W_o], axis=0)
        U = np.concatenate([self.U_f, self.U_i, self.U_g, self.U_o], axis=0)
        b = np.concatenate([self.b_f, self.b_i, self.b_g, self.b_o])
        return W, U, b

    def param_items(self, prefix: str):
        for kind in ("W", "U", "b"):
            for gate in GATE_ORDER:
                name = f"{kind}_{gate}"
                yield f"{prefix}.{name}", getattr(self, name)


@dataclass
class LstmModel:
    """A stack of LSTM layers plus the scalar output head."""

    layers: list[LstmLayerParams]
    W_out: np.ndarray  # (hidden,)
    b_out: np.ndarray  # (1,)

    @property
    def hidden_size(self) -> int:
        return self.layers[0].hidden_size

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def param_items(self):
        """(name, array) pairs in the fixed serialisation order: per layer
        W_f W_i W_g W_o, U_f..U_o, b_f..b_o; then W_out, b_out."""
        for i, layer in enumerate(self.layers):
            yield from layer.param_items(f"layers.{i}")
        yield "W_out", self.W_out
        yield "b_out", self.b_out

    def copy(self) -> "LstmModel":
        layers = [
            LstmLayerParams(**{n.split(".")[-1]: a.copy() for n, a in l.param_items("x")})
            for l in self.layers
        ]
        return LstmModel(layers, self.W_out.copy(), self.b_out.copy())


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random orthogonal matrix: QR of a Gaussian draw, sign-corrected so the
    R diagonal is positive (makes the distribution well-defined)."""
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def init_model(
    input_dim: int,
    hidden: int = 128,
    n_layers: int = 2,
    scheme: str = "dedicated",
    seed: int = 0,
) -> LstmModel:
    """Build a model with freshly initialised parameters.

    ``dedicated`` draws input weights Xavier-uniform in
    ±sqrt(6 / (fan_in + fan_out)), recurrent weights as random orthogonal
    matrices, forget-gate biases at 1 and the rest at 0, and the output
    weights He-uniform in ±sqrt(6 / fan_in).  ``uniform`` draws every tensor
    from U(-0.05, 0.05).  Draw order is fixed, so a seed pins every value.
    """
    if input_dim < 1 or hidden < 1 or n_layers < 1:
        raise ConfigurationError(
            f"bad model shape: input_dim={input_dim}, hidden={hidden}, n_layers={n_layers}"
        )
    if scheme not in ("dedicated", "uniform"):
        raise ConfigurationError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(seed)
    layers = []
    for layer_idx in range(n_layers):
        d = input_dim if layer_idx == 0 else hidden
        if scheme == "dedicated":
            bound = np.sqrt(6.0 / (d + hidden))
            W = {g: rng.uniform(-bound, bound, (hidden, d)) for g in GATE_ORDER}
            U = {g: _orthogonal(rng, hidden) for g in GATE_ORDER}
            b = {g: (np.ones(hidden) if g == "f" else np.zeros(hidden)) for g in GATE_ORDER}
        else:
            W = {g: rng.uniform(-0.05, 0.05, (hidden, d)) for g in GATE_ORDER}
            U = {g: rng.uniform(-0.05, 0.05, (hidden, hidden)) for g in GATE_ORDER}
            b = {g: rng.uniform(-0.05, 0.05, hidden) for g in GATE_ORDER}
        layers.append(
            LstmLayerParams(
                W_f=W["f"], W_i=W["i"], W_g=W["g"], W_o=W["o"],
                U_f=U["f"], U_i=U["i"], U_g=U["g"], U_o=U["o"],
                b_f=b["f"], b_i=b["i"], b_g=b["g"], b_o=b["o"],
            )
        )
    if scheme == "dedicated":
        W_out = rng.uniform(-np.sqrt(6.0 / hidden), np.sqrt(6.0 / hidden), hidden)
        b_out = np.zeros(1)
    else:
        W_out = rng.uniform(-0.05, 0.05, hidden)
        b_out = rng.uniform(-0.05, 0.05, 1)
    return LstmModel(layers, W_out, b_out)


# ---------------------------------------------------------------- scoring path

def _step(layer: LstmLayerParams, x, h, c):
    f = sigmoid(layer.W_f @ x + layer.U_f @ h + layer.b_f)
    i = sigmoid(layer.W_i @ x + layer.U_i @ h + layer.b_i)
    g = np.tanh(layer.W_g @ x + layer.U_g @ h + layer.b_g)
    o = sigmoid(layer.W_o @ x + layer.U_o @ h + layer.b_o)
    c_next = f * c + i * g
    h_next = o * np.tanh(c_next)
    return h_next, c_next


def hidden_states(model: LstmModel, X) -> np.ndarray:
    """Top-layer hidden state after every step of one sequence [T, v]."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ConfigurationError(
            f"sequence must be [steps, {model.input_dim}], got shape {X.shape}"
        )
    h = [np.zeros(l.hidden_size) for l in model.layers]
    c = [np.zeros(l.hidden_size) for l in model.layers]
    out = np.empty((X.shape[0], model.hidden_size), dtype=np.float64)
    for t in range(X.shape[0]):
        x = X[t]
        for idx, layer in enumerate(model.layers):
            h[idx], c[idx] = _step(layer, x, h[idx], c[idx])
            x = h[idx]
        out[t] = x
    return out


def _readout(model: LstmModel, h) -> float:
    return float(model.W_out @ h + model.b_out[0])


def _readout_probability(model: LstmModel, h) -> float:
    return float(sigmoid(np.array([_readout(model, h)]))[0])


def forward(model: LstmModel, X, length: int | None = None) -> float:
    """Probability for one sequence, reading the state at ``length`` steps.

    Rows at or beyond ``length`` are never touched, so the result is
    identical whether the sequence is padded or not.
    """
    X = np.asarray(X, dtype=np.float64)
    n_steps = X.shape[0] if length is None else int(length)
    if not 1 <= n_steps <= X.shape[0]:
        raise ConfigurationError(f"length {n_steps} out of range [1, {X.shape[0]}]")
    states = hidden_states(model, X[:n_steps])
    return _readout_probability(model, states[-1])


def score_sequence(model: LstmModel, X) -> np.ndarray:
    """Probability after each step of one unpadded sequence [N, v].

    ``score_sequence(model, X)[k-1]`` equals ``forward(model, X[:k])``
    bit-for-bit: the recurrence up to step k only ever sees the first k rows,
    and both paths share the same step arithmetic.
    """
    states = hidden_states(model, X)
    return np.array([_readout_probability(model, states[t]) for t in range(states.shape[0])])


# --------------------------------------------------------------- training path

def batch_forward(model: LstmModel, X, lengths):
    """Forward over a padded batch [B, T, v]; returns per-sample logits and
    the per-layer activation caches needed for backprop.

    Steps beyond ``max(lengths)`` are skipped entirely; per-sample readouts
    are gathered at each sample's own last step.
    """
    X = np.asarray(X, dtype=np.float64)
    B, T, _ = X.shape
    lengths = np.asarray(lengths, dtype=np.int64)
    t_max = int(lengths.max())
    h_dim = model.hidden_size
    inp = X[:, :t_max]
    caches = []
    for layer in model.layers:
        W4, U4, b4 = layer.stacked()
        pre = inp.reshape(B * t_max, -1) @ W4.T
        pre = pre.reshape(B, t_max, 4 * h_dim) + b4
        F = np.empty((B, t_max, h_dim))
        I = np.empty_like(F)
        G = np.empty_like(F)
        O = np.empty_like(F)
        C = np.empty_like(F)
        H = np.empty_like(F)
        h_t = np.zeros((B, h_dim))
        c_t = np.zeros((B, h_dim))
        for t in range(t_max):
            z = pre[:, t] + h_t @ U4.T
            f = sigmoid(z[:, :h_dim])
            i = sigmoid(z[:, h_dim : 2 * h_dim])
            g = np.tanh(z[:, 2 * h_dim : 3 * h_dim])
            o = sigmoid(z[:, 3 * h_dim :])
            c_t = f * c_t + i * g
            h_t = o * np.tanh(c_t)
            F[:, t], I[:, t], G[:, t], O[:, t] = f, i, g, o
            C[:, t], H[:, t] = c_t, h_t
        caches.append({"inp": inp, "F": F, "I": I, "G": G, "O": O, "C": C, "H": H})
        inp = H
    h_last = caches[-1]["H"][np.arange(B), lengths - 1]
    logits = h_last @ model.W_out + model.b_out[0]
    return logits, h_last, caches


def _backward(model, lengths, caches, dlogits, h_last):
    B = dlogits.shape[0]
    t_max = caches[0]["F"].shape[1]
    h_dim = model.hidden_size
    grads = {
        "W_out": dlogits @ h_last,
        "b_out": np.array([dlogits.sum()]),
    }
    d_above = np.zeros((B, t_max, h_dim))
    d_above[np.arange(B), lengths - 1] = np.outer(dlogits, model.W_out)
    for layer_idx in reversed(range(model.n_layers)):
        layer = model.layers[layer_idx]
        cache = caches[layer_idx]
        W4, U4, _ = layer.stacked()
        F, I, G, O, C = cache["F"], cache["I"], cache["G"], cache["O"], cache["C"]
        H = cache["H"]
        dz_all = np.empty((B, t_max, 4 * h_dim))
        dU4 = np.zeros((4 * h_dim, h_dim))
        dh = np.zeros((B, h_dim))
        dc = np.zeros((B, h_dim))
        for t in reversed(range(t_max)):
            dh = dh + d_above[:, t]
            tanh_c = np.tanh(C[:, t])
            do = dh * tanh_c
            dc = dc + dh * O[:, t] * (1.0 - tanh_c**2)
            c_prev = C[:, t - 1] if t > 0 else np.zeros((B, h_dim))
            h_prev = H[:, t - 1] if t > 0 else np.zeros((B, h_dim))
            df = dc * c_prev
            di = dc * G[:, t]
            dg = dc * I[:, t]
            dc = dc * F[:, t]
            dz = np.concatenate(
                [
                    df * F[:, t] * (1.0 - F[:, t]),
                    di * I[:, t] * (1.0 - I[:, t]),
                    dg * (1.0 - G[:, t] ** 2),
                    do * O[:, t] * (1.0 - O[:, t]),
                ],
                axis=1,
            )
            dz_all[:, t] = dz
            dU4 += dz.T @ h_prev
            dh = dz @ U4
        inp = cache["inp"]
        dW4 = dz_all.reshape(B * t_max, -1).T @ inp.reshape(B * t_max, -1)
        db4 = dz_all.sum(axis=(0, 1))
        for g_idx, gate in enumerate(GATE_ORDER):
            sl = slice(g_idx * h_dim, (g_idx + 1) * h_dim)
            grads[f"layers.{layer_idx}.W_{gate}"] = dW4[sl]
            grads[f"layers.{layer_idx}.U_{gate}"] = dU4[sl]
            grads[f"layers.{layer_idx}.b_{gate}"] = db4[sl]
        if layer_idx > 0:
            d_above = (dz_all.reshape(B * t_max, -1) @ W4).reshape(B, t_max, h_dim)
    return grads


def batch_loss_and_grads(model: LstmModel, X, y, lengths):
    """Mean binary cross-entropy over a padded batch, plus exact gradients
    for every parameter (backpropagation through time).

    The loss is computed from logits as softplus(z) - y*z, which never
    overflows; a non-finite logit raises :class:`NumericalError` naming the
    offending sample.
    """
    y = np.asarray(y, dtype=np.float64)
    logits, h_last, caches = batch_forward(model, X, lengths)
    bad = np.flatnonzero(~np.isfinite(logits))
    if bad.size:
        raise NumericalError(f"non-finite logit for sample {int(bad[0])}")
    softplus = np.maximum(logits, 0.0) + np.log1p(np.exp(-np.abs(logits)))
    loss = float((softplus - y * logits).mean())
    if not np.isfinite(loss):
        raise NumericalError("non-finite training loss")
    dlogits = (sigmoid(logits) - y) / y.shape[0]
    lengths = np.asarray(lengths, dtype=np.int64)
    return loss, _backward(model, lengths, caches, dlogits, h_last)


def batch_scores(model: LstmModel, X, lengths, chunk: int = 512) -> np.ndarray:
    """Probabilities for a padded batch via the training-path kernels.

    Fast and deterministic, but not bit-aligned with the scoring path; meant
    for validation-loss tracking and bulk estimator use.
    """
    X = np.asarray(X, dtype=np.float64)
    lengths = np.asarray(lengths, dtype=np.int64)
    out = np.empty(X.shape[0], dtype=np.float64)
    for start in range(0, X.shape[0], chunk):
        sl = slice(start, min(start + chunk, X.shape[0]))
        logits, _, _ = batch_forward(model, X[sl], lengths[sl])
        out[sl] = sigmoid(logits)
    return out


# -------------------------------------------------------------- serialisation

def weights_to_bytes(model: LstmModel) -> bytes:
    """All parameters as little-endian float32 in the declared order."""
    return b"".join(
        np.ascontiguousarray(arr, dtype="<f4").tobytes() for _, arr in model.param_items()
    )


def model_from_bytes(raw: bytes, input_dim: int, hidden: int, n_layers: int) -> LstmModel:
    """Rebuild a model from :func:`weights_to_bytes` output (upcast to
    float64 for computation)."""
    template = init_model(input_dim, hidden, n_layers, scheme="uniform", seed=0)
    flat = np.frombuffer(raw, dtype="<f4")
    expected = sum(arr.size for _, arr in template.param_items())
    if flat.size != expected:
        raise ConfigurationError(
            f"weight blob has {flat.size} values, expected {expected} for "
            f"input_dim={input_dim}, hidden={hidden}, n_layers={n_layers}"
        )
    pos = 0
    for _, arr in template.param_items():
        chunk = flat[pos : pos + arr.size].astype(np.float64).reshape(arr.shape)
        arr[...] = chunk
        pos += arr.size
    return template


def quantize_to_float32(model: LstmModel) -> LstmModel:
    """Round every parameter to float32 precision (kept as float64 arrays).

    Run before packaging a model so that serialising to float32 and loading
    back is an exact round trip.
    """
    out = model.copy()
    for _, arr in out.param_items():
        arr[...] = arr.astype(np.float32).astype(np.float64)
    return out
