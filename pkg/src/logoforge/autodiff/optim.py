"""Adam with bias correction plus the linear learning-rate ramp used everywhere."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    """Per-parameter first/second moments keyed like the parameter dict."""

    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_adam(params: dict[str, Tensor], beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    state = AdamState(beta1=beta1, beta2=beta2, eps=eps)
    for name, p in params.items():
        state.m[name] = np.zeros_like(p.data)
        state.v[name] = np.zeros_like(p.data)
    return state


def adam_step(params: dict[str, Tensor], grads: dict[str, Tensor], state: AdamState, lr: float) -> None:
    """In-place bias-corrected Adam update of `params`."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        g = g.data if isinstance(g, Tensor) else np.asarray(g)
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter '{name}' {p.data.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter '{name}'")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p.data -= (lr / c1) * m / (np.sqrt(v / c2) + state.eps)


def lr_linear_decay(lr0: float, iteration: int, total: int) -> float:
    """Linear ramp from lr0 at iteration 0 down to zero at `total`."""
    if total <= 0:
        raise ValueError("total must be positive")
    if iteration < 0 or iteration > total:
        raise ValueError(f"iteration {iteration} outside [0, {total}]")
    return lr0 * (1.0 - iteration / total)
