"""
vgan Core Package

Tensor storage, the reverse-mode tape, primitive ops, gradient checking and
the shared error and logging plumbing.
"""

from .errors import (
    VganError, ConfigError, ShapeError, DataError, NiftiError, BadMagicError,
    UnsupportedDatatypeError, TruncatedPayloadError, UnsupportedFormatError,
    CheckpointError, NumericError, NonFiniteError
)
from .tensor import Tensor, Tape, Function, backward, grad, no_grad, enable_grad, current_tape
from .gradcheck import grad_check
from .base import Component, log, set_verbosity
from . import ops

__all__ = [
    "Tensor", "Tape", "Function", "backward", "grad", "no_grad", "enable_grad", "current_tape",
    "grad_check", "ops", "Component", "log", "set_verbosity",
    "VganError", "ConfigError", "ShapeError", "DataError", "NiftiError", "BadMagicError",
    "UnsupportedDatatypeError", "TruncatedPayloadError", "UnsupportedFormatError",
    "CheckpointError", "NumericError", "NonFiniteError",
]
