"""Minimal dense reverse-mode automatic differentiation."""
from . import ops
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import check_gradients, check_vjp, fd_gradient, relative_error, vector_relative_error
from .optim import AdamState, adam_step, cosine_lr
from .tensor import DTensor, Tape, backward, const

__all__ = [
    "AdamState",
    "DTensor",
    "Tape",
    "adam_step",
    "backward",
    "check_gradients",
    "check_vjp",
    "const",
    "cosine_lr",
    "fd_gradient",
    "load_checkpoint",
    "ops",
    "relative_error",
    "vector_relative_error",
    "save_checkpoint",
]
