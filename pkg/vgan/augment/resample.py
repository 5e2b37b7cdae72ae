"""
Trilinear Resampling

Output voxel p takes the trilinear sample of the source at R^-1 (p - c) + c,
with c = (n - 1) / 2 per axis. Samples outside the grid take the fill value.
"""

from typing import Union

import numpy as np
from scipy.ndimage import map_coordinates

from vgan.core.errors import ShapeError
from vgan.volio.volume import Volume
from .rotation import Rotation, rotation_matrix


# Source coordinates this close to a grid point are read from it exactly
SNAP_TOLERANCE = 1e-6


def source_coordinates(dims, matrix: np.ndarray) -> np.ndarray:
    """[3, X, Y, Z] source positions for every output voxel"""
    center = (np.asarray(dims, dtype=np.float64) - 1.0) / 2.0
    grid = np.indices(dims, dtype=np.float64).reshape(3, -1)
    offsets = grid - center[:, None]
    source = matrix.T @ offsets + center[:, None]
    nearest = np.rint(source)
    snap = np.abs(source - nearest) <= SNAP_TOLERANCE
    source[snap] = nearest[snap]
    return source.reshape((3,) + tuple(dims))


def resample_trilinear(volume: Volume, rotation: Union[Rotation, np.ndarray], fill: float = 0.0) -> Volume:
    """Rotate a volume about its center; rotation is a Rotation or a 3x3 matrix"""
    if any(extent < 2 for extent in volume.dims):
        raise ShapeError(f"resampling needs at least 2 voxels per axis, got {volume.dims}")
    matrix = rotation_matrix(rotation) if isinstance(rotation, Rotation) else np.asarray(rotation, np.float64)
    if matrix.shape != (3, 3):
        raise ShapeError(f"rotation matrix must be 3x3, got {matrix.shape}")
    if np.array_equal(matrix, np.eye(3)):
        return volume.with_data(volume.data.copy())

    coordinates = source_coordinates(volume.dims, matrix)
    data = map_coordinates(volume.data.astype(np.float64), coordinates, order=1, mode="constant",
                           cval=fill, prefilter=False)
    return volume.with_data(data.astype(np.float32))
