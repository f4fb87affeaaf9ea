"""Mini-batch training loop with early stopping on validation loss."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..metrics import binary_cross_entropy
from .lstm import LstmModel, batch_loss_and_grads, batch_scores
from .optim import AdamState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    max_epochs: int = 100
    batch_size: int = 64
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.max_epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ConfigurationError(f"bad training configuration: {self}")


@dataclass
class TrainingHistory:
    """Per-epoch loss curves; BCE for classifiers, MSE for the autoencoder."""

    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    stopped_epoch: int = 0

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
        }


def _check_pair(train_ds, val_ds):
    for name, ds in (("training", train_ds), ("validation", val_ds)):
        if len(ds) == 0:
            raise ConfigurationError(f"{name} dataset is empty")
    if train_ds.n_features != val_ds.n_features:
        raise ConfigurationError(
            f"feature mismatch: train has {train_ds.n_features}, val has {val_ds.n_features}"
        )


def train(model: LstmModel, train_ds, val_ds, config: TrainConfig = TrainConfig()):
    """Fit a copy of ``model`` on ``train_ds``; returns (best model, history).

    Each epoch shuffles with a seeded generator, walks mini-batches of
    ``batch_size``, and then measures validation BCE.  Training stops when
    validation BCE has not improved for ``patience`` consecutive epochs (or
    at ``max_epochs``), and the parameters from the best epoch are returned,
    not the last ones.
    """
    _check_pair(train_ds, val_ds)
    if model.input_dim != train_ds.n_features:
        raise ConfigurationError(
            f"model expects {model.input_dim} features, dataset has {train_ds.n_features}"
        )
    work = model.copy()
    adam = AdamState(work)
    rng = np.random.default_rng(config.seed)
    history = TrainingHistory()
    best_val = np.inf
    best_model = work.copy()
    epochs_without_improvement = 0
    n = len(train_ds)

    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, grads = batch_loss_and_grads(
                work, train_ds.X[idx], train_ds.y[idx], train_ds.lengths[idx]
            )
            adam.step(work, grads, config.lr)
            batch_losses.append(loss)
        train_bce = float(np.mean(batch_losses))
        val_scores = batch_scores(work, val_ds.X, val_ds.lengths)
        val_bce = binary_cross_entropy(val_scores, val_ds.y)
        history.train_loss.append(train_bce)
        history.val_loss.append(val_bce)
        log.info("epoch %d: train BCE %.4f, val BCE %.4f", epoch, train_bce, val_bce)

        if val_bce < best_val:
            best_val = val_bce
            best_model = work.copy()
            history.best_epoch = epoch
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= config.patience:
                history.stopped_epoch = epoch
                log.info(
                    "early stop at epoch %d (best epoch %d, val BCE %.4f)",
                    epoch, history.best_epoch, best_val,
                )
                break
    if history.stopped_epoch == 0:
        history.stopped_epoch = len(history.val_loss)
    return best_model, history
