"""
Synthetic Phantoms

Brain-like stand-in volumes so the pipeline runs without external data: a
head ellipsoid, a brighter inner "white matter" ellipsoid, two darker
"ventricle" ellipsoids, a few smooth Gaussian blobs and mild noise, lightly
smoothed. Intensities land roughly in an MR-like [0, 1000] range.
"""

from typing import Sequence, Tuple

import numpy as np
from scipy import ndimage

from .volume import Volume


BACKGROUND = 0.0
GREY_MATTER = 600.0
WHITE_MATTER = 850.0
CSF = 250.0


def _ellipsoid(grid: Tuple[np.ndarray, ...], center: Sequence[float], radii: Sequence[float]) -> np.ndarray:
    distance = sum(((axis - c) / r) ** 2 for axis, c, r in zip(grid, center, radii))
    return distance <= 1.0


def synth_phantom(rng: np.random.Generator, dims: Sequence[int] = (64, 64, 64),
                  voxel_size: Sequence[float] = (1.4, 1.4, 1.4), n_blobs: int = 4) -> Volume:
    dims = tuple(int(extent) for extent in dims)
    grid = np.ogrid[tuple(slice(0, extent) for extent in dims)]
    grid = tuple(axis.astype(np.float64) for axis in grid)
    center = np.array([(extent - 1) / 2.0 for extent in dims])
    size = np.array(dims, dtype=np.float64)

    jitter = rng.normal(0.0, 0.02, 3) * size
    head_radii = size * rng.uniform(0.36, 0.44, 3)
    volume = np.full(dims, BACKGROUND, dtype=np.float64)
    volume[_ellipsoid(grid, center + jitter, head_radii)] = GREY_MATTER
    volume[_ellipsoid(grid, center + jitter, head_radii * rng.uniform(0.6, 0.75))] = WHITE_MATTER

    ventricle_radii = size * np.array([0.05, 0.12, 0.08]) * rng.uniform(0.8, 1.2)
    offset = np.array([size[0] * 0.07, 0.0, 0.0])
    for side in (-1.0, 1.0):
        volume[_ellipsoid(grid, center + jitter + side * offset, ventricle_radii)] = CSF

    head = _ellipsoid(grid, center + jitter, head_radii)
    for _ in range(n_blobs):
        blob_center = center + jitter + rng.uniform(-0.5, 0.5, 3) * head_radii
        width = float(rng.uniform(0.04, 0.1) * size.mean())
        amplitude = float(rng.uniform(-120.0, 120.0))
        distance = sum((axis - c) ** 2 for axis, c in zip(grid, blob_center))
        volume += amplitude * np.exp(-distance / (2.0 * width ** 2)) * head

    volume += rng.normal(0.0, 10.0, dims) * head
    volume = ndimage.gaussian_filter(volume, sigma=0.7)
    volume = np.clip(volume, 0.0, None).astype(np.float32)
    return Volume(data=volume, voxel_size=tuple(voxel_size),
                  intensity_range=(float(volume.min()), float(volume.max())))
