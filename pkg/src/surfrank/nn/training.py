"""Adam optimizer and the mini-batch training loop.

Training is a single logical sequence of optimizer steps: per epoch, rows are
reshuffled with a seeded generator and consumed without replacement in
batches.  On image inputs (one (1, H, W, C) tensor with per-pixel labels) the
"rows" are pixels and a batch is a 0/1 row-weight mask, so the same loop
drives both architectures.  Everything is deterministic given (seed, data,
config).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Array, Network


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1500
    batch_size: int | None = None  # None: half the training rows
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class AdamState:
    m: dict[int, dict[str, Array]]
    v: dict[int, dict[str, Array]]
    t: int = 0


def adam_init(net: Network) -> AdamState:
    zeros = lambda: {
        i: {k: np.zeros_like(a) for k, a in group.items()} for i, group in net.params.items()
    }
    return AdamState(m=zeros(), v=zeros())


def adam_step(
    net: Network, grads: dict[int, dict[str, Array]], state: AdamState, config: TrainConfig
) -> None:
    """One bias-corrected Adam update, in place on ``net.params`` and ``state``."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for i, group in grads.items():
        for key, g in group.items():
            m = state.m[i][key]
            v = state.v[i][key]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            net.params[i][key] -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    train_accuracy: float


def train(
    net: Network, x: Array, labels: Array, config: TrainConfig
) -> tuple[Network, list[EpochRecord]]:
    """Train a copy of ``net`` on (x, labels); returns it with per-epoch history.

    ``x`` is (M, features) with M labels, or a single (1, H, W, C) image with
    H*W pixel labels in row-major order.  The input network is not modified.
    """
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int).reshape(-1)
    image_mode = x.ndim == 4
    n_rows = x.shape[1] * x.shape[2] if image_mode else x.shape[0]
    if image_mode and x.shape[0] != 1:
        raise ValueError("image training expects a single (1, H, W, C) tensor")
    if len(labels) != n_rows:
        raise ValueError(f"{len(labels)} labels for {n_rows} training rows")
    if n_rows == 0:
        raise ValueError("empty training design")
    batch = config.batch_size if config.batch_size is not None else max(1, n_rows // 2)
    if batch > n_rows:
        raise ValueError(f"batch_size {batch} exceeds {n_rows} training rows")

    net = net.copy()
    state = adam_init(net)
    rng = np.random.default_rng(config.seed)
    history: list[EpochRecord] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_rows)
        losses: list[float] = []
        sizes: list[int] = []
        for start in range(0, n_rows, batch):
            rows = order[start : start + batch]
            if image_mode:
                mask = np.zeros(n_rows)
                mask[rows] = 1.0
                loss, grads = net.backward(x, labels, row_weights=mask)
            else:
                loss, grads = net.backward(x[rows], labels[rows])
            adam_step(net, grads, state, config)
            losses.append(loss)
            sizes.append(len(rows))
        epoch_loss = float(np.dot(losses, sizes) / n_rows)
        acc = float(np.mean(net.predict_labels(x) == labels))
        history.append(EpochRecord(epoch=epoch, loss=epoch_loss, train_accuracy=acc))
    return net, history
