"""Neural primitives with manual backpropagation."""

from .adam import AdamState, adam_step
from .layers import (BatchNorm1d, Conv1d, ConvTranspose1d, Dense, Flatten, LayerError,
                     LeakyReLU, ReLU, Reshape, Sigmoid, Tanh)
from .network import Network, bce_loss, init_params
from .serialize import network_bytes, read_network, save_network

__all__ = [
    "AdamState", "adam_step", "BatchNorm1d", "Conv1d", "ConvTranspose1d", "Dense",
    "Flatten", "LayerError", "LeakyReLU", "ReLU", "Reshape", "Sigmoid", "Tanh",
    "Network", "bce_loss", "init_params", "network_bytes", "read_network", "save_network",
]
