"""Layered classifier networks with manual backpropagation.

A network is a chain of :class:`~surfrank.nn.layers.LayerSpec` entries, at
most one of which may be a concat pulling in an earlier layer's output (the
single skip edge of the U-shaped architecture).  Parameters are Glorot-uniform
at init, biases zero, fully determined by the seed.

On binary problems the output layer is a single sigmoid unit emitting the
probability that class 1 is minimal; on problems with more classes it is a
softmax row per input.  Labels are 1-based everywhere.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .layers import (
    Array,
    KERNEL,
    LayerShapeError,
    LayerSpec,
    activation_backward,
    activation_forward,
    concat_backward,
    concat_forward,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool2d_backward,
    maxpool2d_forward,
    upsample2d_backward,
    upsample2d_forward,
)

PROB_FLOOR = 1e-12


@dataclass
class Network:
    """Layer chain plus parameters; see module docstring for conventions."""

    specs: tuple[LayerSpec, ...]
    params: dict[int, dict[str, Array]]
    seed: int
    n_classes: int

    def copy(self) -> "Network":
        return Network(
            specs=self.specs,
            params=copy.deepcopy(self.params),
            seed=self.seed,
            n_classes=self.n_classes,
        )

    def parameter_count(self) -> int:
        return sum(arr.size for group in self.params.values() for arr in group.values())

    # -- forward ------------------------------------------------------------

    def _run(self, batch: Array) -> tuple[Array, list[Array], list[tuple]]:
        x = np.asarray(batch, dtype=float)
        outputs: list[Array] = []
        caches: list[tuple] = []
        a = x
        for i, spec in enumerate(self.specs):
            if spec.kind == "dense":
                p = self.params[i]
                a, cache = dense_forward(a, p["w"], p["b"])
            elif spec.kind == "conv2d":
                p = self.params[i]
                a, cache = conv2d_forward(a, p["w"], p["b"])
            elif spec.kind == "maxpool2d":
                a, cache = maxpool2d_forward(a)
            elif spec.kind == "upsample2d":
                a, cache = upsample2d_forward(a)
            elif spec.kind == "concat":
                a, cache = concat_forward(a, outputs[spec.skip_from])
            else:
                a, cache = activation_forward(spec.activation, a)
            outputs.append(a)
            caches.append(cache)
        return a, outputs, caches

    def forward(self, batch: Array) -> Array:
        """Output probabilities; rows on dense paths, per-pixel on image paths."""
        out, _, _ = self._run(batch)
        return out

    def predict_labels(self, batch: Array) -> Array:
        """1-based class labels: sigmoid threshold at 0.5, softmax row argmax."""
        return probabilities_to_labels(self.forward(batch), self.n_classes)

    # -- backward -----------------------------------------------------------

    def backward(
        self, batch: Array, labels: Array, row_weights: Array | None = None
    ) -> tuple[float, dict[int, dict[str, Array]]]:
        """Loss and parameter gradients of cross-entropy plus activity penalties.

        ``row_weights``, when given, weight the per-row losses (rows are batch
        entries on dense paths, pixels on image paths); they normalise by
        their sum, so a 0/1 mask selects a mini-batch of rows.
        """
        out, outputs, caches = self._run(batch)
        rows = _as_rows(out)
        weights = _norm_weights(row_weights, len(rows))
        loss, dprob = _cross_entropy_value_grad(rows, np.asarray(labels), weights)
        d = dprob.reshape(out.shape)

        grads: dict[int, dict[str, Array]] = {}
        pending: dict[int, Array] = {}
        for i in range(len(self.specs) - 1, -1, -1):
            spec = self.specs[i]
            if i in pending:
                d = d + pending.pop(i)
            if spec.activity_l1 or spec.activity_l2:
                pen, dpen = _activity_penalty(outputs[i], spec, weights)
                loss += pen
                d = d + dpen
            if spec.kind == "dense":
                d, dw, db = dense_backward(d, self.params[i]["w"], caches[i])
                grads[i] = {"w": dw, "b": db}
            elif spec.kind == "conv2d":
                d, dw, db = conv2d_backward(d, self.params[i]["w"], caches[i])
                grads[i] = {"w": dw, "b": db}
            elif spec.kind == "maxpool2d":
                d = maxpool2d_backward(d, caches[i])
            elif spec.kind == "upsample2d":
                d = upsample2d_backward(d, caches[i])
            elif spec.kind == "concat":
                d, dskip = concat_backward(d, caches[i])
                key = spec.skip_from
                pending[key] = pending[key] + dskip if key in pending else dskip
            else:
                d = activation_backward(spec.activation, d, caches[i])
        return loss, grads

    def loss(self, batch: Array, labels: Array, row_weights: Array | None = None) -> float:
        """Objective value only (used by the finite-difference gradient check)."""
        out, outputs, _ = self._run(batch)
        rows = _as_rows(out)
        weights = _norm_weights(row_weights, len(rows))
        value, _ = _cross_entropy_value_grad(rows, np.asarray(labels), weights)
        for i, spec in enumerate(self.specs):
            if spec.activity_l1 or spec.activity_l2:
                pen, _ = _activity_penalty(outputs[i], spec, weights)
                value += pen
        return value


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def init_network(specs, seed: int = 0) -> Network:
    """Allocate Glorot-uniform parameters (biases zero) for a validated chain."""
    specs = tuple(specs)
    _validate_chain(specs)
    rng = np.random.default_rng(seed)
    params: dict[int, dict[str, Array]] = {}
    for i, spec in enumerate(specs):
        if spec.kind == "dense":
            limit = np.sqrt(6.0 / (spec.in_features + spec.units))
            params[i] = {
                "w": rng.uniform(-limit, limit, size=(spec.in_features, spec.units)),
                "b": np.zeros(spec.units),
            }
        elif spec.kind == "conv2d":
            fan = KERNEL * KERNEL * (spec.in_channels + spec.out_channels)
            limit = np.sqrt(6.0 / fan)
            params[i] = {
                "w": rng.uniform(
                    -limit, limit, size=(KERNEL, KERNEL, spec.in_channels, spec.out_channels)
                ),
                "b": np.zeros(spec.out_channels),
            }
    return Network(specs=specs, params=params, seed=int(seed), n_classes=_head_classes(specs))


def _validate_chain(specs: tuple[LayerSpec, ...]) -> None:
    """Check that feature/channel counts compose along the chain."""
    width: int | None = None  # last-axis size, None until the first sized layer
    widths: list[int | None] = []
    for i, spec in enumerate(specs):
        if spec.kind == "dense":
            if width is not None and width != spec.in_features:
                raise LayerShapeError(
                    f"layer {i}: dense expects {spec.in_features} features, upstream gives {width}"
                )
            width = spec.units
        elif spec.kind == "conv2d":
            if width is not None and width != spec.in_channels:
                raise LayerShapeError(
                    f"layer {i}: conv2d expects {spec.in_channels} channels, upstream gives {width}"
                )
            width = spec.out_channels
        elif spec.kind == "concat":
            if not 0 <= spec.skip_from < i:
                raise LayerShapeError(f"layer {i}: concat skip_from {spec.skip_from} out of range")
            skip_width = widths[spec.skip_from]
            if width is None or skip_width is None:
                raise LayerShapeError(f"layer {i}: concat branches have unknown widths")
            width = width + skip_width
        widths.append(width)


def _head_classes(specs: tuple[LayerSpec, ...]) -> int:
    """Number of classes implied by the output head; 0 when there is no head."""
    if not specs or specs[-1].kind != "activation":
        return 0
    final = specs[-1].activation
    width = None
    for spec in specs[-2::-1]:
        if spec.kind == "dense":
            width = spec.units
            break
        if spec.kind == "conv2d":
            width = spec.out_channels
            break
    if final == "sigmoid" and width == 1:
        return 2
    if final == "softmax" and width is not None and width >= 2:
        return width
    return 0


# ---------------------------------------------------------------------------
# losses and label mapping
# ---------------------------------------------------------------------------


def _as_rows(out: Array) -> Array:
    """Flatten network output to (rows, classes-or-1)."""
    if out.ndim == 2:
        return out
    if out.ndim == 4:
        return out.reshape(-1, out.shape[-1])
    raise LayerShapeError(f"unexpected output shape {out.shape}")


def _norm_weights(row_weights: Array | None, n_rows: int) -> Array:
    if row_weights is None:
        return np.full(n_rows, 1.0 / n_rows)
    w = np.asarray(row_weights, dtype=float).reshape(-1)
    if len(w) != n_rows:
        raise ValueError(f"row_weights has length {len(w)}, expected {n_rows}")
    total = w.sum()
    if total <= 0:
        raise ValueError("row_weights must have positive sum")
    return w / total


def _cross_entropy_value_grad(
    rows: Array, labels: Array, weights: Array
) -> tuple[float, Array]:
    """Weighted-mean negative log-likelihood and its gradient wrt probabilities.

    Probabilities are clamped to [PROB_FLOOR, 1 - PROB_FLOOR] before the log;
    the gradient is zero where the clamp is active, matching what a finite
    difference of the clamped objective sees.
    """
    labels = labels.reshape(-1)
    if len(labels) != len(rows):
        raise ValueError(f"{len(labels)} labels for {len(rows)} prediction rows")
    dprob = np.zeros_like(rows)
    if rows.shape[1] == 1:
        if labels.min() < 1 or labels.max() > 2:
            raise ValueError("binary labels must be 1 or 2")
        p = rows[:, 0]
        pc = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
        is_one = labels == 1
        value = -np.sum(weights * np.where(is_one, np.log(pc), np.log1p(-pc)))
        live = (p > PROB_FLOOR) & (p < 1.0 - PROB_FLOOR)
        grad = np.where(is_one, -1.0 / pc, 1.0 / (1.0 - pc)) * weights
        dprob[:, 0] = np.where(live, grad, 0.0)
    else:
        if labels.min() < 1 or labels.max() > rows.shape[1]:
            raise ValueError(f"labels must lie in 1..{rows.shape[1]}")
        idx = labels - 1
        p = rows[np.arange(len(rows)), idx]
        pc = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
        value = -np.sum(weights * np.log(pc))
        live = (p > PROB_FLOOR) & (p < 1.0 - PROB_FLOOR)
        dprob[np.arange(len(rows)), idx] = np.where(live, -weights / pc, 0.0)
    return float(value), dprob


def cross_entropy(pred: Array, labels: Array) -> float:
    """Mean negative log-likelihood of 1-based ``labels`` under ``pred`` rows.

    ``pred`` is either (n, L) probability rows, or an (n,) / (n, 1) sigmoid
    column giving the probability of class 1; image outputs flatten to rows.
    """
    rows = np.asarray(pred, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    rows = _as_rows(rows)
    value, _ = _cross_entropy_value_grad(rows, np.asarray(labels), _norm_weights(None, len(rows)))
    return value


def probabilities_to_labels(out: Array, n_classes: int) -> Array:
    """Map network output to 1-based labels (smallest index wins ties)."""
    rows = np.asarray(out, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    rows = _as_rows(rows)
    if rows.shape[1] == 1:
        if n_classes not in (0, 2):
            raise ValueError("single-column output implies 2 classes")
        return np.where(rows[:, 0] >= 0.5, 1, 2)
    return rows.argmax(axis=1) + 1


def _activity_penalty(out: Array, spec: LayerSpec, weights: Array) -> tuple[float, Array]:
    """Output-activity regularizer: weighted mean over rows of l1*|a| + l2*a^2."""
    rows = out.reshape(-1, out.shape[-1])
    if len(rows) == len(weights):
        w = weights
    else:  # hidden layer on a pooled path: pixel count differs, use a plain mean
        w = np.full(len(rows), 1.0 / len(rows))
    per_row = spec.activity_l1 * np.abs(rows).sum(axis=1) + spec.activity_l2 * (rows**2).sum(
        axis=1
    )
    value = float(np.sum(w * per_row))
    drows = (spec.activity_l1 * np.sign(rows) + 2.0 * spec.activity_l2 * rows) * w[:, None]
    return value, drows.reshape(out.shape)
