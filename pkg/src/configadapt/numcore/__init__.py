from . import tensor
from .kernels import BACKEND_NAME
from .optim import Adam, FreezeMask, MODULE_TAGS, module_of
from .tensor import Tensor, parameter

__all__ = [
    "Adam",
    "BACKEND_NAME",
    "FreezeMask",
    "MODULE_TAGS",
    "Tensor",
    "module_of",
    "parameter",
    "tensor",
]
