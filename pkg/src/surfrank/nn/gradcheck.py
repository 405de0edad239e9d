"""Finite-difference verification of the analytic gradients.

Central differences on every parameter entry, so keep the nets small (the
cost is two loss evaluations per parameter).  ReLU and max-pool kinks can make
individual entries disagree; callers avoid them by nudging tied inputs.
"""

from __future__ import annotations

import numpy as np

from .network import Array, Network


def grad_check(
    net: Network, batch: Array, labels: Array, step: float = 1e-5
) -> float:
    """Max over parameters of |analytic - central difference| / max(1, |difference|)."""
    work = net.copy()
    _, grads = work.backward(batch, labels)
    worst = 0.0
    for i, group in work.params.items():
        for key, arr in group.items():
            analytic = grads[i][key]
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + step
                up = work.loss(batch, labels)
                arr[idx] = orig - step
                down = work.loss(batch, labels)
                arr[idx] = orig
                numeric = (up - down) / (2.0 * step)
                err = abs(analytic[idx] - numeric) / max(1.0, abs(numeric))
                if err > worst:
                    worst = err
    return worst
