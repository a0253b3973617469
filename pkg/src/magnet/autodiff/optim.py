"""Gradient-descent updates: Adam by default, plain SGD for hand-checkable tests."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError
from .tensor import DTYPE, Tensor


@dataclass
class OptimizerState:
    """Per-parameter first/second moment accumulators and the shared step count."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def sgd_adam_step(
    params: list[Tensor],
    grads: list[np.ndarray] | None,
    state: OptimizerState,
    hyper: dict,
) -> OptimizerState:
    """Apply one update in place.

    ``hyper`` keys: lr (required), beta1, beta2, eps, mode ("adam" or "sgd").
    When grads is None, each parameter's accumulated .grad is used.
    """
    lr = hyper["lr"]
    mode = hyper.get("mode", "adam")
    if grads is None:
        grads = [p.grad for p in params]
    for p, g in zip(params, grads):
        if g.shape != p.data.shape:
            raise NumericError(f"gradient shape {g.shape} != parameter shape {p.data.shape} for {p.name!r}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {p.name!r}")
    if mode == "sgd":
        for p, g in zip(params, grads):
            p.data -= lr * g
        return state
    b1 = hyper.get("beta1", 0.9)
    b2 = hyper.get("beta2", 0.999)
    eps = hyper.get("eps", 1e-8)
    state.t += 1
    t = state.t
    for p, g in zip(params, grads):
        key = id(p)
        m = state.m.get(key)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[key] = m
            state.v[key] = np.zeros_like(p.data)
        v = state.v[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        mhat = m / (1.0 - b1**t)
        vhat = v / (1.0 - b2**t)
        p.data -= lr * mhat / (np.sqrt(vhat) + eps)
    return state


class Optimizer:
    """Stateful wrapper around sgd_adam_step for a fixed parameter list."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3, mode: str = "adam",
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.hyper = {"lr": lr, "mode": mode, "beta1": beta1, "beta2": beta2, "eps": eps}
        self.state = OptimizerState()

    @property
    def lr(self) -> float:
        return self.hyper["lr"]

    @lr.setter
    def lr(self, value: float) -> None:
        self.hyper["lr"] = value

    def step(self) -> None:
        sgd_adam_step(self.params, None, self.state, self.hyper)

    def zero_grad(self) -> None:
        for p in self.params:
            p.reset_grad()
