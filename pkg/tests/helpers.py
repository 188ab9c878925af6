"""Shared numerical oracles for the test suite.

These deliberately avoid the library's own code paths: finite differences
for gradients, plain python loops elsewhere.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


def fd_gradient(
    loss_fn: Callable[[dict[str, np.ndarray]], float],
    params: dict[str, np.ndarray],
    step: float = 1e-3,
) -> dict[str, np.ndarray]:
    """Central finite differences of a scalar loss, entry by entry, in
    float64.  ``loss_fn`` must be deterministic across calls."""
    grads = {}
    for name, p in params.items():
        p = p.astype(np.float64)
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = loss_fn({**params, name: p.copy()})
            flat[i] = orig - step
            lo = loss_fn({**params, name: p.copy()})
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        grads[name] = g
    return grads


def max_rel_error(analytic: dict[str, np.ndarray], fd: dict[str, np.ndarray]) -> float:
    """max over entries of |analytic - fd| / max(1, |fd|)."""
    worst = 0.0
    for name in fd:
        a = np.asarray(analytic[name], dtype=np.float64)
        f = fd[name]
        err = np.abs(a - f) / np.maximum(1.0, np.abs(f))
        worst = max(worst, float(err.max()) if err.size else 0.0)
    return worst
