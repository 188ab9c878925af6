"""Adam with classic L2-coupled weight decay.

The decay term is added to the gradient before the moment updates
(g <- g + wd * p), then the usual bias-corrected update applies:

    m = b1*m + (1-b1)*g        mhat = m / (1 - b1^t)
    v = b2*v + (1-b2)*g^2      vhat = v / (1 - b2^t)
    p -= lr * mhat / (sqrt(vhat) + eps)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from manner.errors import DimensionError


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], lr: float = 1e-4,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                   weight_decay: float = 0.0) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps, weight_decay=weight_decay)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One update over all parameters; returns new param arrays, the state
    is advanced in place."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    new_params = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise DimensionError(f"adam_step: shape mismatch for {name!r}")
        if state.weight_decay:
            g = g + p.dtype.type(state.weight_decay) * p
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        mhat = m / bc1
        vhat = v / bc2
        new_params[name] = p - p.dtype.type(state.lr) * mhat / (np.sqrt(vhat) + state.eps)
    return new_params, state
