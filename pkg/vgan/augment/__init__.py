"""
vgan Augmentation

Random 3D rotations applied by trilinear resampling, and the rotated-copy
dataset builder.
"""

from .rotation import Rotation, rotation_matrix, sample_rotation
from .resample import resample_trilinear, source_coordinates
from .dataset import (
    DatasetAugmenter, ManifestEntry, build_augmented_dataset, check_unique_stems, copy_seed, read_manifest,
    rotated_copies, volume_stem, write_manifest, MANIFEST_NAME
)

__all__ = [
    "Rotation", "rotation_matrix", "sample_rotation", "resample_trilinear", "source_coordinates",
    "DatasetAugmenter", "ManifestEntry", "build_augmented_dataset", "check_unique_stems", "copy_seed", "read_manifest",
    "rotated_copies", "volume_stem", "write_manifest", "MANIFEST_NAME",
]
