"""First-order optimizers implemented from their update equations.

All three operate on a flat float64 parameter vector so the training loop
has one code path for (W, b). Constants follow common framework defaults:
Adam beta1=0.9, beta2=0.999; RMSprop rho=0.9; epsilon 1e-7 for both; plain
SGD without momentum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPSILON = 1e-7

SEARCH_OPTIMIZERS = ("adam", "rmsprop", "sgd")
SEARCH_LEARNING_RATES = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
SEARCH_DROPOUT_RATES = (0.2, 0.3, 0.4, 0.5)


@dataclass(frozen=True)
class HyperParams:
    optimizer: str
    learning_rate: float
    dropout_rate: float

    def __post_init__(self) -> None:
        if self.optimizer not in SEARCH_OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")


def _check_step(params: np.ndarray, grads: np.ndarray, step: int) -> None:
    if params.shape != grads.shape:
        raise ValueError(f"parameter shape {params.shape} != gradient shape {grads.shape}")
    if not np.isfinite(grads).all():
        raise ValueError(f"non-finite gradient at step {step}")


class SGD:
    kind = "sgd"

    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        _check_step(params, grads, self.t + 1)
        self.t += 1
        return params - self.learning_rate * grads

    def state_dict(self) -> dict:
        return {"kind": self.kind, "learning_rate": self.learning_rate, "t": self.t}

    def load_state_dict(self, state: dict) -> None:
        self.learning_rate = state["learning_rate"]
        self.t = state["t"]


class RMSprop:
    kind = "rmsprop"

    def __init__(self, learning_rate: float, rho: float = 0.9, epsilon: float = EPSILON):
        self.learning_rate = learning_rate
        self.rho = rho
        self.epsilon = epsilon
        self.t = 0
        self.v: np.ndarray | None = None

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        _check_step(params, grads, self.t + 1)
        if self.v is None:
            self.v = np.zeros_like(params)
        self.t += 1
        self.v = self.rho * self.v + (1.0 - self.rho) * grads * grads
        return params - self.learning_rate * grads / (np.sqrt(self.v) + self.epsilon)

    def state_dict(self) -> dict:
        return {"kind": self.kind, "learning_rate": self.learning_rate,
                "rho": self.rho, "epsilon": self.epsilon, "t": self.t,
                "v": None if self.v is None else self.v.tolist()}

    def load_state_dict(self, state: dict) -> None:
        self.learning_rate = state["learning_rate"]
        self.rho = state["rho"]
        self.epsilon = state["epsilon"]
        self.t = state["t"]
        self.v = None if state["v"] is None else np.array(state["v"], dtype=np.float64)


class Adam:
    kind = "adam"

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = EPSILON):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        _check_step(params, grads, self.t + 1)
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)

    def state_dict(self) -> dict:
        return {"kind": self.kind, "learning_rate": self.learning_rate,
                "beta1": self.beta1, "beta2": self.beta2, "epsilon": self.epsilon,
                "t": self.t,
                "m": None if self.m is None else self.m.tolist(),
                "v": None if self.v is None else self.v.tolist()}

    def load_state_dict(self, state: dict) -> None:
        self.learning_rate = state["learning_rate"]
        self.beta1 = state["beta1"]
        self.beta2 = state["beta2"]
        self.epsilon = state["epsilon"]
        self.t = state["t"]
        self.m = None if state["m"] is None else np.array(state["m"], dtype=np.float64)
        self.v = None if state["v"] is None else np.array(state["v"], dtype=np.float64)


_OPTIMIZERS = {"sgd": SGD, "rmsprop": RMSprop, "adam": Adam}


def make_optimizer(name: str, learning_rate: float):
    try:
        cls = _OPTIMIZERS[name]
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}, expected one of "
                         f"{sorted(_OPTIMIZERS)}") from None
    return cls(learning_rate)


def load_optimizer(state: dict):
    opt = make_optimizer(state["kind"], state["learning_rate"])
    opt.load_state_dict(state)
    return opt
