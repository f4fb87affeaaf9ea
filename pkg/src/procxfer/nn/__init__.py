"""From-scratch recurrent networks in numpy: LSTM stacks, Adam, training
loops, and a small autoencoder for elapsed-time compression."""

from .lstm import (
    GATE_ORDER,
    LstmLayerParams,
    LstmModel,
    batch_forward,
    batch_loss_and_grads,
    forward,
    hidden_states,
    init_model,
    model_from_bytes,
    quantize_to_float32,
    score_sequence,
    weights_to_bytes,
)
from .optim import AdamState
from .training import TrainConfig, TrainingHistory, train
from .autoencoder import TimeAutoencoder, train_time_autoencoder
from .estimator import LstmOutcomeClassifier

__all__ = [
    "GATE_ORDER",
    "LstmLayerParams",
    "LstmModel",
    "AdamState",
    "TrainConfig",
    "TrainingHistory",
    "TimeAutoencoder",
    "LstmOutcomeClassifier",
    "batch_forward",
    "batch_loss_and_grads",
    "forward",
    "hidden_states",
    "init_model",
    "model_from_bytes",
    "quantize_to_float32",
    "score_sequence",
    "train",
    "train_time_autoencoder",
    "weights_to_bytes",
]
