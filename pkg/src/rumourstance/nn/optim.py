from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .layers import Parameter


class StateShapeMismatch(ValueError):
    pass


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-6
    weight_decay: float = 0.01
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: Iterable[Parameter], state: AdamState) -> AdamState:
    """Bias-corrected Adam with decoupled weight decay and a constant learning rate.

    Decay (``lr * weight_decay * theta``) skips parameters flagged
    ``decay_exempt``. Parameters without a gradient are left untouched.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p in params:
        if not p.trainable or p.grad is None:
            continue
        g = p.grad
        m = state.m.get(p.name)
        v = state.v.get(p.name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        if m.shape != p.data.shape:
            raise StateShapeMismatch(f"optimizer state for {p.name!r} has shape {m.shape}, "
                                     f"parameter has {p.data.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[p.name], state.v[p.name] = m, v
        update = (m / c1) / (np.sqrt(v / c2) + state.eps)
        if state.weight_decay and not p.decay_exempt:
            update = update + state.weight_decay * p.data
        p.data = p.data - state.lr * update
    return state


def zero_grad(params: Iterable[Parameter]) -> None:
    for p in params:
        p.grad = None
