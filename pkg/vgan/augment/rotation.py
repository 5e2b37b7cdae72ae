"""
Rotations

Euler-angle rotations in degrees, composed as Rz . Ry . Rx and applied about
the volume center.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np


@dataclass(frozen=True)
class Rotation:
    theta_x: float = 0.0
    theta_y: float = 0.0
    theta_z: float = 0.0

    @property
    def angles(self) -> Tuple[float, float, float]:
        return (self.theta_x, self.theta_y, self.theta_z)

    @property
    def is_identity(self) -> bool:
        return self.theta_x == 0.0 and self.theta_y == 0.0 and self.theta_z == 0.0

    def matrix(self) -> np.ndarray:
        return rotation_matrix(self)

    def inverse_matrix(self) -> np.ndarray:
        return rotation_matrix(self).T


def _axis_rotation(axis: int, degrees: float) -> np.ndarray:
    radians = np.deg2rad(degrees)
    c, s = np.cos(radians), np.sin(radians)
    if axis == 0:
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == 1:
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_matrix(rotation: Rotation) -> np.ndarray:
    """3x3 float64 matrix Rz . Ry . Rx"""
    return (_axis_rotation(2, rotation.theta_z)
            @ _axis_rotation(1, rotation.theta_y)
            @ _axis_rotation(0, rotation.theta_x))


def sample_rotation(rng: np.random.Generator, sigma_deg: float = 10.0) -> Rotation:
    """Three i.i.d. N(0, sigma^2) angles"""
    if sigma_deg < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma_deg}")
    theta_x, theta_y, theta_z = rng.normal(0.0, sigma_deg, size=3)
    return Rotation(float(theta_x), float(theta_y), float(theta_z))
