"""Minimal reverse-mode automatic differentiation on numpy arrays."""

from . import functional
from .gradcheck import grad_check
from .nn import Conv2d, ConvTranspose2d, Linear, Module
from .optim import Adam
from .serialize import load_checkpoint, save_checkpoint
from .tensor import Tensor, as_tensor, parameter

__all__ = [
    "Adam",
    "Conv2d",
    "ConvTranspose2d",
    "Linear",
    "Module",
    "Tensor",
    "as_tensor",
    "functional",
    "grad_check",
    "load_checkpoint",
    "parameter",
    "save_checkpoint",
]
