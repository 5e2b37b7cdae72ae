"""
Generator

Latent vector -> [B,1,R,R,R] volume. A 4^3 base block followed by one growth
block per stage; every stage keeps its own 1x1x1 to_voxel projection so the
previous resolution can be faded out while a new block fades in.
"""

import numpy as np

from vgan.core import ops
from vgan.core.errors import NonFiniteError, ShapeError
from vgan.core.tensor import Tensor
from vgan.nn.conv import conv3d_forward
from vgan.nn.layers import (
    dense_forward, fade_blend, leaky_relu, pixelwise_norm, upsample_nearest_2x
)
from .stage import BASE_RESOLUTION, NetworkWeights, StageConfig, add_conv, add_dense


def build_generator(cfg: StageConfig, rng: np.random.Generator) -> NetworkWeights:
    """Weights for every stage 0..cfg.stage_index, drawn in name order"""
    filters, latent = cfg.n_filters, cfg.latent_dim
    weights = NetworkWeights()
    add_dense(weights, rng, "g.base.dense", filters * BASE_RESOLUTION ** 3, latent)
    add_conv(weights, rng, "g.base.conv1", filters, filters, 3)
    add_conv(weights, rng, "g.to_voxel0", 1, filters, 1)
    for stage in range(1, cfg.stage_index + 1):
        add_conv(weights, rng, f"g.block{stage}.conv1", filters, filters, 3)
        add_conv(weights, rng, f"g.block{stage}.conv2", filters, filters, 3)
        add_conv(weights, rng, f"g.to_voxel{stage}", 1, filters, 1)
    return weights


def generator_parameter_count(cfg: StageConfig) -> int:
    """Closed-form tally of build_generator(cfg)"""
    f, latent = cfg.n_filters, cfg.latent_dim
    conv3 = f * f * 27 + f
    to_voxel = f + 1
    base = (f * 64 * latent + f * 64) + conv3 + to_voxel
    return base + cfg.stage_index * (2 * conv3 + to_voxel)


def _conv_act_norm(weights: NetworkWeights, prefix: str, h: Tensor, use_equalized: bool) -> Tensor:
    return pixelwise_norm(leaky_relu(conv3d_forward(h, weights.conv(prefix), use_equalized)))


def generator_features(weights: NetworkWeights, z: Tensor, stage: int,
                       use_equalized: bool = True):
    """Feature maps after the base block and each growth block up to stage"""
    filters = weights["g.base.conv1.weight"].shape[0]
    h = pixelwise_norm(z)
    h = dense_forward(h, weights.dense("g.base.dense"), use_equalized)
    h = ops.reshape(h, (z.shape[0], filters, BASE_RESOLUTION, BASE_RESOLUTION, BASE_RESOLUTION))
    h = pixelwise_norm(leaky_relu(h))
    h = _conv_act_norm(weights, "g.base.conv1", h, use_equalized)
    features = [h]
    for block in range(1, stage + 1):
        h = upsample_nearest_2x(h)
        h = _conv_act_norm(weights, f"g.block{block}.conv1", h, use_equalized)
        h = _conv_act_norm(weights, f"g.block{block}.conv2", h, use_equalized)
        features.append(h)
    return features


def to_voxel(weights: NetworkWeights, h: Tensor, stage: int, use_equalized: bool = True) -> Tensor:
    """Linear 1x1x1 projection of stage features to one channel"""
    return conv3d_forward(h, weights.conv(f"g.to_voxel{stage}"), use_equalized)


def generator_forward(weights: NetworkWeights, z: Tensor, stage: int, alpha: float = 1.0,
                      use_equalized: bool = True) -> Tensor:
    """z [B, latent_dim] -> [B,1,R,R,R] with R = 4 * 2^stage

    While alpha < 1 the output blends the upsampled stage-1 projection with the
    new stage's projection.
    """
    weights.require_stage(stage)
    latent = weights["g.base.dense.weight"].shape[1]
    if z.ndim != 2 or z.shape[1] != latent:
        raise ShapeError(f"latents must be [B,{latent}], got {z.shape}")
    if not np.all(np.isfinite(z.data)):
        raise NonFiniteError("latent batch contains non-finite values")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")

    features = generator_features(weights, z, stage, use_equalized)
    fine = to_voxel(weights, features[stage], stage, use_equalized)
    if stage == 0 or alpha >= 1.0:
        return fine
    coarse = upsample_nearest_2x(to_voxel(weights, features[stage - 1], stage - 1, use_equalized))
    return fade_blend(alpha, coarse, fine)
