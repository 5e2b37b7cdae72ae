"""
vgan - Volumetric progressive-growing GAN

Reverse-mode tensor engine, 3D layers, progressive networks, WGAN-GP
training, NIfTI I/O and rotation augmentation for synthesizing 3D MR
volumes.
"""

__version__ = "1.0.0"

from .core import Tensor, Tape, backward, grad, no_grad, VganError
from .config import get_config, RunConfig

__all__ = ["Tensor", "Tape", "backward", "grad", "no_grad", "VganError", "get_config", "RunConfig",
           "__version__"]
