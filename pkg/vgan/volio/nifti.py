"""
NIfTI-1 Codec

Single-file NIfTI-1 (.nii, .nii.gz) reader and writer over a structured
numpy header. Reads int16 and float32 voxels in either byte order; always
writes little-endian float32 at vox_offset 352. Orientation fields are carried
through untouched.
"""

import gzip
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from vgan.core.errors import (
    BadMagicError, DataError, NiftiError, TruncatedPayloadError, UnsupportedDatatypeError, UnsupportedFormatError
)
from .volume import Volume


HEADER_SIZE = 348
VOX_OFFSET = 352
GZIP_MAGIC = b"\x1f\x8b"
SINGLE_FILE_MAGIC = b"n+1\x00"
PAIR_MAGIC = b"ni1\x00"
NIFTI2_HEADER_SIZE = 540

HEADER_FIELDS = [
    ('sizeof_hdr', 'i4'),
    ('data_type', 'S10'),
    ('db_name', 'S18'),
    ('extents', 'i4'),
    ('session_error', 'i2'),
    ('regular', 'S1'),
    ('dim_info', 'u1'),
    ('dim', 'i2', (8,)),
    ('intent_p1', 'f4'),
    ('intent_p2', 'f4'),
    ('intent_p3', 'f4'),
    ('intent_code', 'i2'),
    ('datatype', 'i2'),
    ('bitpix', 'i2'),
    ('slice_start', 'i2'),
    ('pixdim', 'f4', (8,)),
    ('vox_offset', 'f4'),
    ('scl_slope', 'f4'),
    ('scl_inter', 'f4'),
    ('slice_end', 'i2'),
    ('slice_code', 'u1'),
    ('xyzt_units', 'u1'),
    ('cal_max', 'f4'),
    ('cal_min', 'f4'),
    ('slice_duration', 'f4'),
    ('toffset', 'f4'),
    ('glmax', 'i4'),
    ('glmin', 'i4'),
    ('descrip', 'S80'),
    ('aux_file', 'S24'),
    ('qform_code', 'i2'),
    ('sform_code', 'i2'),
    ('quatern_b', 'f4'),
    ('quatern_c', 'f4'),
    ('quatern_d', 'f4'),
    ('qoffset_x', 'f4'),
    ('qoffset_y', 'f4'),
    ('qoffset_z', 'f4'),
    ('srow_x', 'f4', (4,)),
    ('srow_y', 'f4', (4,)),
    ('srow_z', 'f4', (4,)),
    ('intent_name', 'S16'),
    ('magic', 'S4'),
]

HEADER_DTYPE = np.dtype(HEADER_FIELDS).newbyteorder('<')

# datatype code -> voxel type (byte order applied per file)
DATATYPES = {
    4: 'i2',
    16: 'f4',
}


def empty_header() -> np.ndarray:
    """Fresh little-endian header: identity scaling, mm units, single-file magic"""
    header = np.zeros((), dtype=HEADER_DTYPE)
    header['sizeof_hdr'] = HEADER_SIZE
    header['pixdim'] = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]
    header['vox_offset'] = VOX_OFFSET
    header['scl_slope'] = 1.0
    header['xyzt_units'] = 2
    header['magic'] = SINGLE_FILE_MAGIC
    return header


def _decompress(raw: bytes, path: str) -> bytes:
    if raw[:2] != GZIP_MAGIC:
        return raw
    try:
        return gzip.decompress(raw)
    except (OSError, EOFError) as e:
        raise TruncatedPayloadError(f"gzip stream is damaged: {e}", path)


def parse_header(raw: bytes, path: str = None) -> np.ndarray:
    """Decode the 348-byte header, detecting byte order from sizeof_hdr"""
    if len(raw) < 4:
        raise TruncatedPayloadError(f"file has {len(raw)} bytes, too short for a header", path)
    sizes = {order: int(np.frombuffer(raw[:4], dtype=f'{order}i4')[0]) for order in '<>'}
    if NIFTI2_HEADER_SIZE in sizes.values():
        raise UnsupportedFormatError("NIfTI-2 files are not supported", path)
    order = next((order for order, size in sizes.items() if size == HEADER_SIZE), None)
    if order is None:
        raise BadMagicError(f"sizeof_hdr is {sizes['<']}, expected {HEADER_SIZE}", path)
    if len(raw) < HEADER_SIZE:
        raise TruncatedPayloadError(f"header truncated at {len(raw)} of {HEADER_SIZE} bytes", path)

    magic = raw[HEADER_SIZE - 4:HEADER_SIZE]
    if magic == PAIR_MAGIC:
        raise UnsupportedFormatError("header/image pairs (.hdr/.img) are not supported", path)
    if magic != SINGLE_FILE_MAGIC:
        raise BadMagicError(f"magic {magic!r} is not {SINGLE_FILE_MAGIC!r}", path)
    header = np.frombuffer(raw[:HEADER_SIZE], dtype=HEADER_DTYPE.newbyteorder(order))
    return header.astype(HEADER_DTYPE).reshape(())


def _spatial_dims(header: np.ndarray, path: str) -> Tuple[int, int, int]:
    dim = [int(extent) for extent in header['dim']]
    rank = dim[0]
    if rank < 3 or rank > 7 or any(extent != 1 for extent in dim[4:rank + 1]):
        raise UnsupportedFormatError(f"only 3D volumes are supported, dim = {dim}", path)
    dims = (dim[1], dim[2], dim[3])
    if any(extent < 1 for extent in dims):
        raise NiftiError(f"invalid dimensions {dims} in header", path)
    return dims


def decode_nifti(raw: bytes, path: str = None) -> Volume:
    raw = _decompress(raw, path)
    header = parse_header(raw, path)
    order = '<' if int(np.frombuffer(raw[:4], dtype='<i4')[0]) == HEADER_SIZE else '>'
    dims = _spatial_dims(header, path)

    code = int(header['datatype'])
    if code not in DATATYPES:
        raise UnsupportedDatatypeError(f"datatype {code} is not supported (int16=4, float32=16)", path)
    voxel_type = np.dtype(order + DATATYPES[code])

    raw_offset = float(header['vox_offset'])
    if not np.isfinite(raw_offset) or raw_offset != np.floor(raw_offset):
        raise NiftiError(f"vox_offset {raw_offset} is not a whole byte offset", path)
    offset = int(raw_offset)
    if offset < HEADER_SIZE:
        raise NiftiError(f"vox_offset {offset} lies inside the header", path)
    count = dims[0] * dims[1] * dims[2]
    needed = offset + count * voxel_type.itemsize
    if len(raw) < needed:
        raise TruncatedPayloadError(f"payload truncated: {len(raw)} bytes, need {needed}", path)

    voxels = np.frombuffer(raw, dtype=voxel_type, count=count, offset=offset).reshape(dims, order='F')
    slope, inter = float(header['scl_slope']), float(header['scl_inter'])
    if slope != 0.0 and np.isfinite(slope) and not (slope == 1.0 and inter == 0.0):
        data = (voxels.astype(np.float64) * slope + inter).astype(np.float32)
    else:
        data = voxels.astype(np.float32)
    data = np.ascontiguousarray(data)

    pixdim = [abs(float(size)) for size in header['pixdim'][1:4]]
    voxel_size = tuple(size if size > 0 else 1.0 for size in pixdim)
    return Volume(data=data, voxel_size=voxel_size,
                  intensity_range=(float(data.min()), float(data.max())), header=header)


def read_nifti(path: str) -> Volume:
    """Read a .nii or .nii.gz file (gzip detected by content)"""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"{path}: cannot read: {e}")
    return decode_nifti(raw, str(path))


def encode_nifti(volume: Volume, header: Optional[np.ndarray] = None) -> bytes:
    """Header + 4 zero extension bytes + float32 voxels in Fortran (x fastest) order"""
    if header is None:
        header = volume.header if volume.header is not None else empty_header()
    header = np.array(header, dtype=HEADER_DTYPE)
    dims = volume.dims
    header['sizeof_hdr'] = HEADER_SIZE
    header['dim'] = [3, dims[0], dims[1], dims[2], 1, 1, 1, 1]
    header['datatype'] = 16
    header['bitpix'] = 32
    pixdim = np.array(header['pixdim'], dtype=np.float32)
    if pixdim[0] not in (-1.0, 1.0):
        pixdim[0] = 1.0
    pixdim[1:4] = volume.voxel_size
    header['pixdim'] = pixdim
    header['vox_offset'] = VOX_OFFSET
    header['scl_slope'] = 1.0
    header['scl_inter'] = 0.0
    header['magic'] = SINGLE_FILE_MAGIC
    payload = np.asarray(volume.data, dtype='<f4').tobytes(order='F')
    return header.tobytes() + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + payload


def write_nifti(volume: Volume, path: str) -> str:
    """Write little-endian float32; a .gz suffix selects gzip (mtime 0, reproducible bytes)"""
    payload = encode_nifti(volume)
    if str(path).endswith(".gz"):
        payload = gzip.compress(payload, mtime=0)
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(payload)
    except OSError as e:
        raise DataError(f"{path}: cannot write: {e}")
    return str(target)
