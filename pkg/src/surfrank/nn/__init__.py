"""Minimal neural-network engine: dense/conv layers, manual backprop, Adam."""

from .builders import build_feedforward, build_unet
from .gradcheck import grad_check
from .io import load_network, save_network
from .layers import (
    LayerShapeError,
    LayerSpec,
    activation_spec,
    conv2d_spec,
    dense_spec,
)
from .network import (
    Network,
    cross_entropy,
    init_network,
    probabilities_to_labels,
)
from .training import AdamState, EpochRecord, TrainConfig, adam_init, adam_step, train

__all__ = [
    "AdamState",
    "EpochRecord",
    "LayerShapeError",
    "LayerSpec",
    "Network",
    "TrainConfig",
    "activation_spec",
    "adam_init",
    "adam_step",
    "build_feedforward",
    "build_unet",
    "conv2d_spec",
    "cross_entropy",
    "dense_spec",
    "grad_check",
    "init_network",
    "load_network",
    "probabilities_to_labels",
    "save_network",
    "train",
]
