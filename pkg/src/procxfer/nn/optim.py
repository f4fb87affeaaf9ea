"""Adam optimiser over a model's named parameter arrays."""

from __future__ import annotations

import numpy as np


class AdamState:
    """First/second moment accumulators plus the shared step counter.

    Updates are applied in place with the standard bias-corrected rule
    p -= lr * m_hat / (sqrt(v_hat) + eps).
    """

    def __init__(self, model, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in model.param_items()}
        self.v = {name: np.zeros_like(arr) for name, arr in model.param_items()}

    def step(self, model, grads: dict, lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, arr in model.param_items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            arr -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
