"""
Error Types

Exception hierarchy shared by every vgan package. Each family maps onto one
process exit code in vgan.py.
"""

from typing import List, Optional, Sequence


class VganError(Exception):
    """Base class for all vgan errors"""

    exit_code = 1


class ConfigError(VganError):
    """Configuration could not be resolved; carries every problem found"""

    exit_code = 1

    def __init__(self, problems: Sequence[str]):
        self.problems: List[str] = list(problems)
        lines = "\n".join(f"  - {problem}" for problem in self.problems)
        super().__init__(f"{len(self.problems)} configuration problem(s):\n{lines}")


class ShapeError(VganError, ValueError):
    """Tensor or volume extents do not fit the operation"""

    exit_code = 1


class DataError(VganError):
    """Input data is missing, unreadable or inconsistent"""

    exit_code = 2


class NiftiError(DataError):
    """A NIfTI file could not be decoded"""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class BadMagicError(NiftiError):
    """Header magic is not a single-file NIfTI-1 magic"""


class UnsupportedDatatypeError(NiftiError):
    """Voxel datatype code is not int16 (4) or float32 (16)"""


class TruncatedPayloadError(NiftiError):
    """File ends before the header or voxel payload is complete"""


class UnsupportedFormatError(NiftiError):
    """NIfTI-2 files and .hdr/.img pairs"""


class CheckpointError(DataError):
    """Checkpoint container is corrupt or of an unknown version"""


class NumericError(VganError):
    """A numeric computation produced an unusable value"""

    exit_code = 3


class NonFiniteError(NumericError):
    """NaN or infinity reached a loss, score or gradient"""

    def __init__(self, message: str, checkpoint: Optional[str] = None):
        self.checkpoint = checkpoint
        if checkpoint:
            message = f"{message} (last good checkpoint: {checkpoint})"
        super().__init__(message)
