"""Parameter update rules for the outer meta-update and the pooled trainer.

Update rules are rebuilt from a plain state dict on every step so that the
optimizer state can live inside MetaState and inside checkpoints.
"""

from typing import Optional, Protocol

import numpy as np

from .model import ParamVector, decode_values, encode_values


class UpdateRule(Protocol):
    def step(self, params: ParamVector, grad: np.ndarray) -> ParamVector: ...

    def state_dict(self) -> dict: ...


class GradientDescent:
    """θ ← θ − lr·g."""

    def __init__(self, lr: float, state: Optional[dict] = None):
        self.lr = lr

    def step(self, params: ParamVector, grad: np.ndarray) -> ParamVector:
        return params.with_values(params.values - self.lr * grad)

    def state_dict(self) -> dict:
        return {}


class Adam:
    """Adam with bias correction; moments are kept as base64 float64 strings in the state dict."""

    def __init__(
        self, lr: float, state: Optional[dict] = None, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        state = state or {}
        self.t = int(state.get("t", 0))
        self.m = decode_values(state["m"]) if "m" in state else None
        self.v = decode_values(state["v"]) if "v" in state else None

    def step(self, params: ParamVector, grad: np.ndarray) -> ParamVector:
        if self.m is None:
            self.m = np.zeros(len(params))
            self.v = np.zeros(len(params))
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params.with_values(params.values - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))

    def state_dict(self) -> dict:
        if self.m is None:
            return {"t": self.t}
        return {"t": self.t, "m": encode_values(self.m), "v": encode_values(self.v)}


OPTIMIZERS = {"sgd": GradientDescent, "adam": Adam}


def make_optimizer(name: str, lr: float, state: Optional[dict] = None) -> UpdateRule:
    if name not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer '{name}'. Valid: {', '.join(sorted(OPTIMIZERS))}")
    return OPTIMIZERS[name](lr, state)
