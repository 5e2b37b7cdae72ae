"""
Progressive-Growing Layers

Resampling, normalization, fade-in and dense layers used by the generator and
discriminator. Everything except the two resampling primitives is composed
from recorded ops, so gradients come for free.
"""

from dataclasses import dataclass
from typing import Optional

from vgan.core import ops
from vgan.core.errors import ShapeError
from vgan.core.tensor import Function, Tensor
from . import kernels
from .conv import add_channel_bias, equalized_scale


PIXELNORM_EPSILON = 1e-8
LEAKY_SLOPE = 0.2


class UpsampleNearest2x(Function):
    name = "upsample_nearest_2x"

    def forward(self, a):
        return kernels.upsample_nearest_2x_kernel(a)

    def backward(self, grad):
        # block sum of the 2x2x2 children
        return (ops.scale(downsample_avg_2x(grad), 8.0),)


class DownsampleAvg2x(Function):
    name = "downsample_avg_2x"

    def forward(self, a):
        return kernels.downsample_avg_2x_kernel(a)

    def backward(self, grad):
        return (ops.scale(upsample_nearest_2x(grad), 0.125),)


def upsample_nearest_2x(a: Tensor) -> Tensor:
    """[B,C,D,H,W] -> [B,C,2D,2H,2W], each voxel replicated into a 2x2x2 block"""
    kernels.spatial_extents(a.shape)
    return UpsampleNearest2x.apply(a)


def downsample_avg_2x(a: Tensor) -> Tensor:
    """[B,C,D,H,W] -> [B,C,D/2,H/2,W/2], mean of each 2x2x2 block"""
    depth, height, width = kernels.spatial_extents(a.shape)
    if depth % 2 or height % 2 or width % 2:
        raise ShapeError(f"downsample_avg_2x needs even extents, got {a.shape}")
    return DownsampleAvg2x.apply(a)


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    """x where x > 0, slope * x elsewhere (gradient at exactly 0 is slope)"""
    return ops.leaky_slope_apply(x, x, slope)


def pixelwise_norm(a: Tensor, epsilon: float = PIXELNORM_EPSILON) -> Tensor:
    """a / sqrt(mean over channels of a^2 + epsilon), channels on axis 1

    Works for feature maps [B,C,D,H,W] and for latent batches [B,L].
    """
    if a.ndim < 2:
        raise ShapeError(f"pixelwise_norm needs a channel axis, got shape {a.shape}")
    mean_square = ops.mean(ops.mul(a, a), axes=1, keepdims=True)
    inverse_rms = ops.power(ops.add_scalar(mean_square, epsilon), -0.5)
    return ops.mul(a, ops.expand(inverse_rms, a.shape))


def minibatch_stddev(a: Tensor) -> Tensor:
    """Append one constant map: mean over (c,d,h,w) of the across-batch stddev

    Single group over the whole batch, population (1/N) variance.
    """
    if a.ndim != 5:
        raise ShapeError(f"minibatch_stddev expects [B,C,D,H,W], got {a.shape}")
    batch, _, depth, height, width = a.shape
    centered = ops.sub(a, ops.expand(ops.mean(a, axes=0, keepdims=True), a.shape))
    variance = ops.mean(ops.mul(centered, centered), axes=0)
    average_std = ops.mean(ops.sqrt(variance))
    feature = ops.expand(ops.reshape(average_std, (1, 1, 1, 1, 1)), (batch, 1, depth, height, width))
    return ops.concat([a, feature], axis=1)


def fade_blend(alpha: float, coarse_path: Tensor, fine_path: Tensor) -> Tensor:
    """(1 - alpha) * coarse + alpha * fine"""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"fade_blend alpha must be in [0, 1], got {alpha}")
    if coarse_path.shape != fine_path.shape:
        raise ShapeError(f"fade_blend: shape mismatch {coarse_path.shape} vs {fine_path.shape}")
    return ops.add(ops.scale(coarse_path, 1.0 - alpha), ops.scale(fine_path, alpha))


@dataclass
class DenseParams:
    """Weight [M, N] and bias [M]"""

    weight: Tensor
    bias: Optional[Tensor] = None

    def __post_init__(self):
        if self.weight.ndim != 2:
            raise ShapeError(f"dense weight must be [M,N], got {self.weight.shape}")
        if self.bias is not None and self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"dense bias must be [{self.weight.shape[0]}], got {self.bias.shape}")

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    def effective_weight(self, use_equalized: bool) -> Tensor:
        if not use_equalized:
            return self.weight
        return ops.scale(self.weight, equalized_scale(self.in_features))


def dense_forward(x: Tensor, params: DenseParams, use_equalized: bool = True) -> Tensor:
    """[B,N] -> [B,M] affine map; equalized weights are scaled by sqrt(2 / N)"""
    if x.ndim != 2 or x.shape[1] != params.in_features:
        raise ShapeError(f"dense: input {x.shape} does not match weight {params.weight.shape}")
    output = ops.matmul(x, ops.transpose(params.effective_weight(use_equalized)))
    if params.bias is not None:
        output = add_channel_bias(output, params.bias)
    return output
