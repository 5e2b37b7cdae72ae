"""
Volume

A 3D scalar grid with voxel spacing and the intensity range it was loaded
with. Axes follow the NIfTI voxel order (x, y, z).
"""

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from vgan.core.errors import ShapeError


@dataclass
class Volume:
    data: np.ndarray
    voxel_size: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    intensity_range: Optional[Tuple[float, float]] = None
    normalized: bool = False
    header: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.data.dtype != np.float32:
            self.data = self.data.astype(np.float32)
        if self.data.ndim != 3 or any(extent < 1 for extent in self.data.shape):
            raise ShapeError(f"volume data must be a non-empty 3D grid, got shape {self.data.shape}")
        self.voxel_size = tuple(float(size) for size in self.voxel_size)
        if len(self.voxel_size) != 3 or any(size <= 0 for size in self.voxel_size):
            raise ShapeError(f"voxel size must be three positive values, got {self.voxel_size}")

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(int(extent) for extent in self.data.shape)

    def value_range(self) -> Tuple[float, float]:
        return float(self.data.min()), float(self.data.max())

    def with_data(self, data: np.ndarray, voxel_size: Optional[Tuple[float, float, float]] = None,
                  **changes) -> "Volume":
        """Copy carrying the header and range metadata over to new data"""
        return replace(self, data=data,
                       voxel_size=voxel_size if voxel_size is not None else self.voxel_size, **changes)
