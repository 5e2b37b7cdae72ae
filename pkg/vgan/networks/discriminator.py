"""
Discriminator

Mirror of the generator: a 1x1x1 from_voxel projection per stage, two 3^3
convs and an average-pool downsample per growth block, and a final 4^3 block
(minibatch stddev, conv, dense) producing an unbounded critic score.
"""

import numpy as np

from vgan.core import ops
from vgan.core.errors import ShapeError
from vgan.core.tensor import Tensor
from vgan.nn.conv import conv3d_forward
from vgan.nn.layers import (
    dense_forward, downsample_avg_2x, fade_blend, leaky_relu, minibatch_stddev
)
from .stage import BASE_RESOLUTION, NetworkWeights, StageConfig, add_conv, add_dense, resolution_for


def build_discriminator(cfg: StageConfig, rng: np.random.Generator) -> NetworkWeights:
    filters = cfg.n_filters
    weights = NetworkWeights()
    add_conv(weights, rng, "d.from_voxel0", filters, 1, 1)
    add_conv(weights, rng, "d.final.conv1", filters, filters + 1, 3)
    add_dense(weights, rng, "d.final.dense", 1, filters * BASE_RESOLUTION ** 3)
    for stage in range(1, cfg.stage_index + 1):
        add_conv(weights, rng, f"d.from_voxel{stage}", filters, 1, 1)
        add_conv(weights, rng, f"d.block{stage}.conv1", filters, filters, 3)
        add_conv(weights, rng, f"d.block{stage}.conv2", filters, filters, 3)
    return weights


def discriminator_parameter_count(cfg: StageConfig) -> int:
    """Closed-form tally of build_discriminator(cfg)"""
    f = cfg.n_filters
    from_voxel = f + f
    conv3 = f * f * 27 + f
    final = (f * (f + 1) * 27 + f) + (f * 64 + 1)
    return from_voxel + final + cfg.stage_index * (from_voxel + 2 * conv3)


def from_voxel(weights: NetworkWeights, x: Tensor, stage: int, use_equalized: bool = True) -> Tensor:
    return leaky_relu(conv3d_forward(x, weights.conv(f"d.from_voxel{stage}"), use_equalized))


def _block(weights: NetworkWeights, h: Tensor, stage: int, use_equalized: bool) -> Tensor:
    h = leaky_relu(conv3d_forward(h, weights.conv(f"d.block{stage}.conv1"), use_equalized))
    h = leaky_relu(conv3d_forward(h, weights.conv(f"d.block{stage}.conv2"), use_equalized))
    return downsample_avg_2x(h)


def _final(weights: NetworkWeights, h: Tensor, use_equalized: bool) -> Tensor:
    h = minibatch_stddev(h)
    h = leaky_relu(conv3d_forward(h, weights.conv("d.final.conv1"), use_equalized))
    h = ops.reshape(h, (h.shape[0], h.size // h.shape[0]))
    return dense_forward(h, weights.dense("d.final.dense"), use_equalized)


def discriminator_forward(weights: NetworkWeights, x: Tensor, stage: int, alpha: float = 1.0,
                          use_equalized: bool = True) -> Tensor:
    """x [B,1,R,R,R] -> score [B,1]

    While alpha < 1 the new block's output is blended with from_voxel of the
    downsampled input at the previous stage.
    """
    weights.require_stage(stage)
    resolution = resolution_for(stage)
    expected = (1, resolution, resolution, resolution)
    if x.ndim != 5 or x.shape[1:] != expected:
        raise ShapeError(f"stage {stage} expects input [B,1,{resolution},{resolution},{resolution}], "
                         f"got {x.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")

    h = from_voxel(weights, x, stage, use_equalized)
    if stage > 0:
        h = _block(weights, h, stage, use_equalized)
        if alpha < 1.0:
            coarse = from_voxel(weights, downsample_avg_2x(x), stage - 1, use_equalized)
            h = fade_blend(alpha, coarse, h)
    for block in range(stage - 1, 0, -1):
        h = _block(weights, h, block, use_equalized)
    return _final(weights, h, use_equalized)
