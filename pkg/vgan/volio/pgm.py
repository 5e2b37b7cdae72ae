"""
Slice Export

Binary 8-bit PGM (P5) images of volume slices. Values in [-1, 1] map linearly
to [0, 255] with round-half-up; anything outside is clipped first.
"""

import math
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from vgan.core.errors import DataError, ShapeError
from .volume import Volume


def to_gray(values: np.ndarray) -> np.ndarray:
    """[-1, 1] -> uint8 [0, 255]"""
    clipped = np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)
    return np.floor((clipped + 1.0) * 127.5 + 0.5).astype(np.uint8)


def encode_pgm(image: np.ndarray) -> bytes:
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ShapeError(f"PGM needs a 2D uint8 image, got {image.dtype} {image.shape}")
    height, width = image.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + np.ascontiguousarray(image).tobytes()


def write_pgm(image: np.ndarray, path: str) -> str:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(encode_pgm(image))
    except OSError as e:
        raise DataError(f"{path}: cannot write: {e}")
    return str(target)


def read_pgm(path: str) -> np.ndarray:
    """Read a P5 file written by write_pgm"""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise DataError(f"{path}: not an 8-bit P5 PGM")
    width, height = (int(token) for token in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != width * height:
        raise DataError(f"{path}: expected {width * height} pixels, found {pixels.size}")
    return pixels.reshape(height, width)


def _display(plane: np.ndarray) -> np.ndarray:
    """Voxel plane indexed [first, second] -> image rows = second axis, top row = highest index"""
    return plane.T[::-1]


def central_slices(volume: Volume) -> Dict[str, np.ndarray]:
    """Axial (fixed z), coronal (fixed y) and sagittal (fixed x) planes through the center"""
    data = volume.data
    cx, cy, cz = (extent // 2 for extent in volume.dims)
    return {
        "axial": _display(data[:, :, cz]),
        "coronal": _display(data[:, cy, :]),
        "sagittal": _display(data[cx, :, :]),
    }


def export_slices(volume: Volume, prefix: str) -> List[str]:
    """Write <prefix>_axial.pgm, <prefix>_coronal.pgm and <prefix>_sagittal.pgm"""
    return [write_pgm(to_gray(plane), f"{prefix}_{name}.pgm")
            for name, plane in central_slices(volume).items()]


def export_montage(volume: Volume, path: str, n_slices: int = 16, columns: Optional[int] = None) -> str:
    """Grid of evenly spaced axial slices as one image; empty cells are black"""
    depth = volume.dims[2]
    n_slices = max(1, min(n_slices, depth))
    columns = columns or math.ceil(math.sqrt(n_slices))
    rows = math.ceil(n_slices / columns)
    positions = np.linspace(0, depth - 1, n_slices + 2)[1:-1] if n_slices < depth else np.arange(depth)
    indices = [int(round(position)) for position in positions]

    tile_height, tile_width = volume.dims[1], volume.dims[0]
    canvas = np.zeros((rows * tile_height, columns * tile_width), dtype=np.uint8)
    for cell, index in enumerate(indices):
        row, column = divmod(cell, columns)
        tile = to_gray(_display(volume.data[:, :, index]))
        canvas[row * tile_height:(row + 1) * tile_height, column * tile_width:(column + 1) * tile_width] = tile
    return write_pgm(canvas, path)
