"""
vgan Neural Layers

3D convolution and the progressive-growing layers built on the tensor tape.
"""

from .conv import (
    Conv3dParams, conv3d_forward, conv3d_backward, conv3d_raw, equalized_scale, add_channel_bias
)
from .layers import (
    DenseParams, dense_forward, leaky_relu, pixelwise_norm, minibatch_stddev,
    upsample_nearest_2x, downsample_avg_2x, fade_blend, LEAKY_SLOPE, PIXELNORM_EPSILON
)
from . import kernels, reference

__all__ = [
    "Conv3dParams", "conv3d_forward", "conv3d_backward", "conv3d_raw", "equalized_scale",
    "add_channel_bias", "DenseParams", "dense_forward", "leaky_relu", "pixelwise_norm",
    "minibatch_stddev", "upsample_nearest_2x", "downsample_avg_2x", "fade_blend",
    "LEAKY_SLOPE", "PIXELNORM_EPSILON", "kernels", "reference",
]
