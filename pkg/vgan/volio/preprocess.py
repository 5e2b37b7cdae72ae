"""
Preprocessing

Factor-2 mean-pool downsampling, center cropping, intensity normalization and
nearest-neighbour upsampling of volumes. The pooling kernel is the one the
training pyramid uses, so both filters agree.
"""

from typing import Sequence, Tuple

import numpy as np

from vgan.core.base import log
from vgan.core.errors import DataError, ShapeError
from vgan.nn.kernels import downsample_avg_2x_kernel
from .volume import Volume


def downsample_by_2(volume: Volume) -> Volume:
    """2x2x2 block mean with doubled voxel size; odd extents lose their last slice"""
    dims = volume.dims
    even = tuple(extent - extent % 2 for extent in dims)
    if any(extent < 2 for extent in even):
        raise ShapeError(f"cannot downsample a volume with extents {dims}")
    data = volume.data
    if even != dims:
        log("VOLIO", f"Truncating odd extents {dims} -> {even} before downsampling", "warning")
        data = data[:even[0], :even[1], :even[2]]
    pooled = downsample_avg_2x_kernel(data).astype(np.float32)
    voxel_size = tuple(2.0 * size for size in volume.voxel_size)
    return volume.with_data(pooled, voxel_size)


def crop_offsets(dims: Sequence[int], target: Sequence[int]) -> Tuple[int, int, int]:
    """Low-side margins of a centered crop; odd margins leave the extra voxel on the high side"""
    if len(target) != 3:
        raise ShapeError(f"crop target must have three extents, got {tuple(target)}")
    if any(t < 1 or t > d for d, t in zip(dims, target)):
        raise ShapeError(f"crop target {tuple(target)} exceeds volume dims {tuple(dims)}")
    return tuple((d - t) // 2 for d, t in zip(dims, target))


def center_crop(volume: Volume, target: Sequence[int]) -> Volume:
    low = crop_offsets(volume.dims, target)
    if tuple(target) != volume.dims:
        high = tuple(d - t - l for d, t, l in zip(volume.dims, target, low))
        log("VOLIO", f"Cropping {volume.dims} -> {tuple(target)} (low margins {low}, high margins {high})",
            "debug")
    window = tuple(slice(l, l + t) for l, t in zip(low, target))
    return volume.with_data(np.ascontiguousarray(volume.data[window]))


def normalize_intensity(volume: Volume) -> Volume:
    """Map [min, max] linearly onto [-1, 1], keeping the original range for inversion"""
    low, high = volume.value_range()
    if not high > low:
        raise DataError(f"cannot normalize a constant volume (value {low})")
    scaled = (volume.data.astype(np.float64) - low) * (2.0 / (high - low)) - 1.0
    data = np.clip(scaled, -1.0, 1.0).astype(np.float32)
    return volume.with_data(data, intensity_range=(low, high), normalized=True)


def denormalize_intensity(volume: Volume) -> Volume:
    """Inverse of normalize_intensity"""
    if not volume.normalized or volume.intensity_range is None:
        raise DataError("volume carries no normalization range to invert")
    low, high = volume.intensity_range
    data = ((volume.data.astype(np.float64) + 1.0) * ((high - low) / 2.0) + low).astype(np.float32)
    return volume.with_data(data, normalized=False)


def upsample_to(volume: Volume, target: Sequence[int], mode: str = "nearest") -> Volume:
    """Nearest-neighbour replication to an integer multiple of the current dims"""
    if mode != "nearest":
        raise ValueError(f"unsupported upsample mode '{mode}' (only 'nearest')")
    target = tuple(int(extent) for extent in target)
    if len(target) != 3:
        raise ShapeError(f"upsample target must have three extents, got {target}")
    ratios = []
    for current, wanted in zip(volume.dims, target):
        if wanted < current or wanted % current:
            raise ShapeError(f"upsample target {target} is not an integer multiple of {volume.dims}")
        ratios.append(wanted // current)

    data = volume.data
    for axis, ratio in enumerate(ratios):
        data = data.repeat(ratio, axis=axis)
    voxel_size = tuple(size / ratio for size, ratio in zip(volume.voxel_size, ratios))
    return volume.with_data(np.ascontiguousarray(data), voxel_size)
