"""A small dense autoencoder that compresses one elapsed-time value into a
low-dimensional code: 1 -> hidden (tanh) -> latent (linear) -> hidden (tanh)
-> 1.  Inputs are divided by the training maximum before entering the net.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .optim import AdamState
from .training import TrainConfig, TrainingHistory


@dataclass
class TimeAutoencoder:
    W1: np.ndarray  # (hidden, 1)
    b1: np.ndarray
    W2: np.ndarray  # (latent, hidden)
    b2: np.ndarray
    W3: np.ndarray  # (hidden, latent)
    b3: np.ndarray
    W4: np.ndarray  # (1, hidden)
    b4: np.ndarray
    norm_divisor: float = 1.0
    activation: str = "tanh"  # "linear" exists for hand-built fixtures

    @property
    def latent_dim(self) -> int:
        return self.W2.shape[0]

    def param_items(self):
        for name in ("W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4"):
            yield name, getattr(self, name)

    def _act(self, x):
        return np.tanh(x) if self.activation == "tanh" else x

    def _act_grad(self, activated):
        if self.activation == "tanh":
            return 1.0 - activated**2
        return np.ones_like(activated)

    def encode(self, values) -> np.ndarray:
        """Latent codes, one row per input value."""
        x = np.asarray(values, dtype=np.float64).reshape(-1, 1) / self.norm_divisor
        h1 = self._act(x @ self.W1.T + self.b1)
        return h1 @ self.W2.T + self.b2

    def _decode(self, codes) -> np.ndarray:
        h2 = self._act(codes @ self.W3.T + self.b3)
        return h2 @ self.W4.T + self.b4

    def reconstruct(self, values) -> np.ndarray:
        """Round trip through the bottleneck, mapped back to original units."""
        return (self._decode(self.encode(values)) * self.norm_divisor).ravel()

    def state(self) -> dict:
        """JSON-ready parameters (float32-rounded to match the bundle's
        weight precision)."""
        out = {
            "hidden_dim": int(self.W1.shape[0]),
            "latent_dim": int(self.latent_dim),
            "norm_divisor": self.norm_divisor,
            "activation": self.activation,
        }
        for name, arr in self.param_items():
            out[name] = arr.astype(np.float32).astype(np.float64).ravel().tolist()
        return out

    @classmethod
    def from_state(cls, state: dict) -> "TimeAutoencoder":
        hidden, latent = state["hidden_dim"], state["latent_dim"]
        shapes = {
            "W1": (hidden, 1), "b1": (hidden,),
            "W2": (latent, hidden), "b2": (latent,),
            "W3": (hidden, latent), "b3": (hidden,),
            "W4": (1, hidden), "b4": (1,),
        }
        arrays = {
            name: np.array(state[name], dtype=np.float64).reshape(shape)
            for name, shape in shapes.items()
        }
        return cls(
            **arrays,
            norm_divisor=float(state["norm_divisor"]),
            activation=state.get("activation", "tanh"),
        )


def _init_autoencoder(hidden_dim, latent_dim, rng) -> TimeAutoencoder:
    def xavier(fan_out, fan_in):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, (fan_out, fan_in))

    return TimeAutoencoder(
        W1=xavier(hidden_dim, 1), b1=np.zeros(hidden_dim),
        W2=xavier(latent_dim, hidden_dim), b2=np.zeros(latent_dim),
        W3=xavier(hidden_dim, latent_dim), b3=np.zeros(hidden_dim),
        W4=xavier(1, hidden_dim), b4=np.zeros(1),
    )


def _loss_and_grads(ae: TimeAutoencoder, x):
    """Mean squared reconstruction error and its exact gradients; ``x`` is
    already normalised, shape (n, 1)."""
    h1 = ae._act(x @ ae.W1.T + ae.b1)
    z = h1 @ ae.W2.T + ae.b2
    h2 = ae._act(z @ ae.W3.T + ae.b3)
    recon = h2 @ ae.W4.T + ae.b4
    err = recon - x
    loss = float((err**2).mean())
    d_recon = 2.0 * err / x.shape[0]
    grads = {"W4": d_recon.T @ h2, "b4": d_recon.sum(axis=0)}
    dh2 = (d_recon @ ae.W4) * ae._act_grad(h2)
    grads["W3"] = dh2.T @ z
    grads["b3"] = dh2.sum(axis=0)
    dz = dh2 @ ae.W3
    grads["W2"] = dz.T @ h1
    grads["b2"] = dz.sum(axis=0)
    dh1 = (dz @ ae.W2) * ae._act_grad(h1)
    grads["W1"] = dh1.T @ x
    grads["b1"] = dh1.sum(axis=0)
    return loss, grads


def train_time_autoencoder(
    values,
    latent_dim: int = 2,
    hidden_dim: int = 8,
    config: TrainConfig = TrainConfig(),
):
    """Fit the autoencoder on raw elapsed-time values (days).

    Values are normalised by their maximum; a constant input sequence is
    rejected because there is nothing to compress.  Returns the best-epoch
    model and the loss history (MSE).
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size < 2 or np.ptp(values) == 0.0:
        raise ConfigurationError(
            "autoencoder needs at least two distinct elapsed-time values"
        )
    divisor = float(values.max())
    if divisor <= 0.0:
        raise ConfigurationError(f"non-positive normalisation divisor {divisor}")

    rng = np.random.default_rng(config.seed)
    ae = _init_autoencoder(hidden_dim, latent_dim, rng)
    ae.norm_divisor = divisor

    x = (values / divisor).reshape(-1, 1)
    perm = rng.permutation(x.shape[0])
    n_val = max(1, x.shape[0] // 5)
    x_val, x_train = x[perm[:n_val]], x[perm[n_val:]]
    if x_train.shape[0] == 0:
        x_train = x_val

    adam = AdamState(ae)
    history = TrainingHistory()
    best_val = np.inf
    best_params = {n: a.copy() for n, a in ae.param_items()}
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(x_train.shape[0])
        batch_losses = []
        for start in range(0, x_train.shape[0], config.batch_size):
            xb = x_train[order[start : start + config.batch_size]]
            loss, grads = _loss_and_grads(ae, xb)
            adam.step(ae, grads, config.lr)
            batch_losses.append(loss)
        val_loss, _ = _loss_and_grads(ae, x_val)
        history.train_loss.append(float(np.mean(batch_losses)))
        history.val_loss.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = {n: a.copy() for n, a in ae.param_items()}
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                history.stopped_epoch = epoch
                break
    if history.stopped_epoch == 0:
        history.stopped_epoch = len(history.val_loss)
    for name, arr in ae.param_items():
        arr[...] = best_params[name]
    return ae, history
