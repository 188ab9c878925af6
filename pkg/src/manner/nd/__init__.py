"""Minimal dense-array kernel: float32 tensors, reverse-mode gradients, Adam.

Training math runs in float32; the same graph can be evaluated in float64,
which is what gradient checking uses (finite differences are unreliable in
32-bit).  Every op validates that its output is finite.
"""

from manner.nd.tensor import (
    Tensor,
    leaf,
    constant,
    matmul,
    softmax_masked,
    dropout,
    concat,
    gather,
    grad,
)
from manner.nd.rng import Rng
from manner.nd.optim import AdamState, adam_step

__all__ = [
    "Tensor",
    "leaf",
    "constant",
    "matmul",
    "softmax_masked",
    "dropout",
    "concat",
    "gather",
    "grad",
    "Rng",
    "AdamState",
    "adam_step",
]
