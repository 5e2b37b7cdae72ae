"""
Volumetric Kernels

Plain numpy kernels behind the 3D layers. Convolutions are direct: the outer
loop walks the k^3 kernel offsets in a fixed order and each offset contributes
one channel contraction over a shifted window whose innermost axis is the
contiguous W axis. Accumulation order per output voxel is therefore fixed.
"""

from typing import Tuple

import numpy as np

from vgan.core.errors import ShapeError


def _padding(kernel: int) -> int:
    if kernel < 1 or kernel % 2 == 0:
        raise ShapeError(f"kernel size must be odd, got {kernel}")
    return (kernel - 1) // 2


def pad_same(x: np.ndarray, kernel: int) -> np.ndarray:
    """Zero-pad the three spatial axes of [B,C,D,H,W] for a same-size convolution"""
    pad = _padding(kernel)
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad), (pad, pad)))


def conv3d_kernel(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """y[b,o,p] = sum_{c,k} w[o,c,k] * x[b,c,p+k-pad] with zero padding"""
    batch, channels, depth, height, width = x.shape
    out_channels, in_channels, kernel = weight.shape[0], weight.shape[1], weight.shape[2]
    if in_channels != channels:
        raise ShapeError(f"conv3d: input has {channels} channels, weight expects {in_channels}")

    padded = pad_same(x, kernel)
    dtype = np.result_type(x.dtype, weight.dtype)
    accumulator = np.zeros((out_channels, batch, depth, height, width), dtype=dtype)
    for kd in range(kernel):
        for kh in range(kernel):
            for kw in range(kernel):
                window = padded[:, :, kd:kd + depth, kh:kh + height, kw:kw + width]
                accumulator += np.tensordot(weight[:, :, kd, kh, kw], window, axes=([1], [1]))
    return np.ascontiguousarray(accumulator.transpose(1, 0, 2, 3, 4))


def conv3d_weight_grad_kernel(x: np.ndarray, grad_out: np.ndarray, kernel: int) -> np.ndarray:
    """gw[o,c,k] = sum_{b,p} g[b,o,p] * x[b,c,p+k-pad]"""
    batch, channels, depth, height, width = x.shape
    out_channels = grad_out.shape[1]
    if grad_out.shape != (batch, out_channels, depth, height, width):
        raise ShapeError(f"conv3d weight grad: grad {grad_out.shape} does not match input {x.shape}")

    padded = pad_same(x, kernel)
    dtype = np.result_type(x.dtype, grad_out.dtype)
    grad_weight = np.empty((out_channels, channels, kernel, kernel, kernel), dtype=dtype)
    for kd in range(kernel):
        for kh in range(kernel):
            for kw in range(kernel):
                window = padded[:, :, kd:kd + depth, kh:kh + height, kw:kw + width]
                grad_weight[:, :, kd, kh, kw] = np.tensordot(
                    grad_out, window, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
    return grad_weight


def flip_transpose_kernel(weight: np.ndarray) -> np.ndarray:
    """w'[c,o,k] = w[o,c,K-1-k]: the kernel that maps output gradients back to inputs"""
    return np.ascontiguousarray(weight.transpose(1, 0, 2, 3, 4)[:, :, ::-1, ::-1, ::-1])


def upsample_nearest_2x_kernel(x: np.ndarray) -> np.ndarray:
    """Replicate each voxel of the trailing three axes into a 2x2x2 block"""
    return x.repeat(2, axis=-3).repeat(2, axis=-2).repeat(2, axis=-1)


def downsample_avg_2x_kernel(x: np.ndarray) -> np.ndarray:
    """Mean of each 2x2x2 block, summed as a balanced tree so constant blocks stay exact"""
    depth, height, width = x.shape[-3:]
    if depth % 2 or height % 2 or width % 2:
        raise ShapeError(f"downsample_avg_2x needs even extents, got {(depth, height, width)}")

    def corner(d: int, h: int, w: int) -> np.ndarray:
        return x[..., d::2, h::2, w::2]

    low = (corner(0, 0, 0) + corner(0, 0, 1)) + (corner(0, 1, 0) + corner(0, 1, 1))
    high = (corner(1, 0, 0) + corner(1, 0, 1)) + (corner(1, 1, 0) + corner(1, 1, 1))
    return (low + high) * 0.125


def spatial_extents(shape: Tuple[int, ...]) -> Tuple[int, int, int]:
    if len(shape) != 5:
        raise ShapeError(f"expected a [B,C,D,H,W] tensor, got shape {shape}")
    return shape[2], shape[3], shape[4]
