from . import kernels
from .checkpoint import load_checkpoint, save_checkpoint
from .optim import Adam, Parameter, adam_step
from .tensor import ShapeError, Tensor

__all__ = [
    "Adam",
    "Parameter",
    "ShapeError",
    "Tensor",
    "adam_step",
    "kernels",
    "load_checkpoint",
    "save_checkpoint",
]
