"""Minimal tensor layers with exact backpropagation, enough for the CRNN.

Every layer implements ``forward(x, training)`` / ``backward(dy)`` with
hand-derived gradients; central finite differences are the reference in the
test suite.  No autodiff, no GPU: plain numpy kernels tuned for small models
on a CPU.
"""

from .core import Param, glorot_uniform, orthogonal
from .layers import BatchNorm2d, Conv2d3x3, Linear, MaxPoolFreq, ReLU, Sigmoid, Tanh
from .loss import bce_loss
from .optim import Adam
from .recurrent import BiGru, GruDirection
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint

__all__ = [
    "Param", "glorot_uniform", "orthogonal",
    "Conv2d3x3", "BatchNorm2d", "MaxPoolFreq", "Linear", "ReLU", "Sigmoid", "Tanh",
    "GruDirection", "BiGru",
    "bce_loss", "Adam",
    "Checkpoint", "save_checkpoint", "load_checkpoint",
]
