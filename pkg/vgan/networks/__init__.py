"""
vgan Networks

Stage-indexed progressive generator and discriminator.
"""

from .stage import (
    StageConfig, NetworkWeights, resolution_for, stage_for_resolution, parse_name, is_active
)
from .generator import build_generator, generator_forward, generator_parameter_count
from .discriminator import build_discriminator, discriminator_forward, discriminator_parameter_count

__all__ = [
    "StageConfig", "NetworkWeights", "resolution_for", "stage_for_resolution", "parse_name",
    "is_active", "build_generator", "generator_forward", "generator_parameter_count",
    "build_discriminator", "discriminator_forward", "discriminator_parameter_count",
]
