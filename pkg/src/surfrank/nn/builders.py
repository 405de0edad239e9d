"""Spec builders for the two architectures used throughout the package.

``build_feedforward`` stacks ReLU dense layers; ``build_unet`` is the
one-pool U-shaped chain: a 3x3 convolution expanding the coordinate channels,
a per-pixel dense block, max-pool, a second (wider) dense block, nearest
upsampling, concatenation with the pre-pool features, and a per-pixel
classifier head.  Binary heads are a single sigmoid unit, multi-class heads a
softmax row.
"""

from __future__ import annotations

from .layers import LayerSpec, activation_spec, conv2d_spec, dense_spec


def _head(in_width: int, n_classes: int) -> list[LayerSpec]:
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if n_classes == 2:
        return [dense_spec(in_width, 1), activation_spec("sigmoid")]
    return [dense_spec(in_width, n_classes), activation_spec("softmax")]


def build_feedforward(
    d: int, n_classes: int, hidden, *, activity_l1: float = 0.0, activity_l2: float = 0.0
) -> list[LayerSpec]:
    """Dense ReLU stack from ``d`` inputs through ``hidden`` widths to a classifier head."""
    hidden = [int(h) for h in hidden]
    if not hidden:
        raise ValueError("need at least one hidden layer width")
    specs: list[LayerSpec] = []
    width = d
    for h in hidden:
        specs.append(dense_spec(width, h))
        specs.append(activation_spec("relu", activity_l1=activity_l1, activity_l2=activity_l2))
        width = h
    specs.extend(_head(width, n_classes))
    return specs


def build_unet(
    grid_h: int,
    grid_w: int,
    d: int,
    n_classes: int,
    base_channels: int = 8,
    *,
    activity_l1: float = 0.0,
    activity_l2: float = 0.0,
) -> list[LayerSpec]:
    """One-pool U-shaped chain over a (grid_h, grid_w) image with ``d`` coordinate channels.

    The training grid must have even sides (one pooling level); inference may
    use any size because concat crops the upsampled branch to the skip branch.
    Channel width doubles after pooling.
    """
    if grid_h % 2 or grid_w % 2:
        raise ValueError(f"grid dims ({grid_h}, {grid_w}) must be divisible by 2")
    c = int(base_channels)
    if c < 1:
        raise ValueError("base_channels must be >= 1")
    reg = {"activity_l1": activity_l1, "activity_l2": activity_l2}
    specs = [
        conv2d_spec(d, c),
        activation_spec("relu"),
        dense_spec(c, c),
        activation_spec("relu", **reg),  # index 3: pre-pool features for the skip edge
        LayerSpec(kind="maxpool2d"),
        dense_spec(c, 2 * c),
        activation_spec("relu", **reg),
        LayerSpec(kind="upsample2d"),
        LayerSpec(kind="concat", skip_from=3),
    ]
    specs.extend(_head(3 * c, n_classes))
    return specs
