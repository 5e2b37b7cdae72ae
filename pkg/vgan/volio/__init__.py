"""
vgan Volume I/O

NIfTI-1 reading and writing, preprocessing, slice export and synthetic
phantoms.
"""

from .volume import Volume
from .nifti import read_nifti, write_nifti, decode_nifti, encode_nifti, empty_header, parse_header
from .preprocess import (
    downsample_by_2, center_crop, crop_offsets, normalize_intensity, denormalize_intensity, upsample_to
)
from .pgm import export_slices, export_montage, central_slices, read_pgm, write_pgm, to_gray
from .phantom import synth_phantom

__all__ = [
    "Volume", "read_nifti", "write_nifti", "decode_nifti", "encode_nifti", "empty_header",
    "parse_header", "downsample_by_2", "center_crop", "crop_offsets", "normalize_intensity",
    "denormalize_intensity", "upsample_to", "export_slices", "export_montage", "central_slices",
    "read_pgm", "write_pgm", "to_gray", "synth_phantom",
]
