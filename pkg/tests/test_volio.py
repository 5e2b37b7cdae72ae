"""
Volume I/O tests: NIfTI-1 header layout and decoding, preprocessing
arithmetic, PGM export and the synthetic phantom.
"""

import gzip
import struct

import numpy as np
import pytest

from vgan.core.errors import (
    BadMagicError, DataError, NiftiError, ShapeError, TruncatedPayloadError, UnsupportedDatatypeError,
    UnsupportedFormatError
)
from vgan.volio import (
    Volume, center_crop, central_slices, crop_offsets, decode_nifti, denormalize_intensity, downsample_by_2,
    empty_header, encode_nifti, export_montage, export_slices, normalize_intensity, read_nifti, read_pgm,
    synth_phantom, to_gray, upsample_to, write_nifti
)
from vgan.volio.nifti import HEADER_SIZE, VOX_OFFSET
from vgan.volio.pgm import encode_pgm


def _int16_file(raw: np.ndarray, slope: float, inter: float, order: str = "<") -> bytes:
    header = empty_header()
    header["dim"] = [3, raw.shape[0], raw.shape[1], raw.shape[2], 1, 1, 1, 1]
    header["datatype"] = 4
    header["bitpix"] = 16
    header["scl_slope"] = slope
    header["scl_inter"] = inter
    header = header.astype(header.dtype.newbyteorder(order))
    payload = raw.astype(f"{order}i2").tobytes(order="F")
    return header.tobytes() + b"\x00" * 4 + payload


# NIfTI

def test_written_header_layout():
    volume = Volume(np.arange(24, dtype=np.float32).reshape(2, 3, 4), voxel_size=(0.7, 0.8, 0.9))
    raw = encode_nifti(volume)
    assert len(raw) == VOX_OFFSET + 4 * 24
    assert struct.unpack_from("<i", raw, 0)[0] == HEADER_SIZE
    assert struct.unpack_from("<8h", raw, 40) == (3, 2, 3, 4, 1, 1, 1, 1)
    assert struct.unpack_from("<hh", raw, 70) == (16, 32)
    assert struct.unpack_from("<4f", raw, 76)[1:] == pytest.approx((0.7, 0.8, 0.9))
    assert struct.unpack_from("<fff", raw, 108) == (352.0, 1.0, 0.0)
    assert raw[344:348] == b"n+1\x00"
    assert raw[348:352] == b"\x00\x00\x00\x00"


def test_payload_is_fortran_ordered():
    data = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    raw = encode_nifti(Volume(data))
    payload = np.frombuffer(raw, dtype="<f4", offset=VOX_OFFSET)
    np.testing.assert_array_equal(payload, data.ravel(order="F"))


def test_int16_with_scaling_is_applied():
    raw = np.full((2, 2, 2), 3, dtype=np.int16)
    volume = decode_nifti(_int16_file(raw, slope=2.0, inter=1.0))
    np.testing.assert_array_equal(volume.data, np.full((2, 2, 2), 7.0, dtype=np.float32))


def test_zero_slope_means_no_scaling():
    raw = np.arange(8, dtype=np.int16).reshape(2, 2, 2)
    volume = decode_nifti(_int16_file(raw, slope=0.0, inter=5.0))
    np.testing.assert_array_equal(volume.data, raw.astype(np.float32))


def test_big_endian_files_are_read():
    raw = np.arange(-4, 4, dtype=np.int16).reshape(2, 2, 2)
    volume = decode_nifti(_int16_file(raw, slope=1.0, inter=0.0, order=">"))
    np.testing.assert_array_equal(volume.data, raw.astype(np.float32))


def test_round_trip_plain_and_gzip(tmp_path, rng):
    data = rng.standard_normal((5, 6, 7)).astype(np.float32)
    volume = Volume(data, voxel_size=(1.5, 1.5, 2.0))
    for name in ("plain.nii", "packed.nii.gz"):
        path = write_nifti(volume, str(tmp_path / name))
        restored = read_nifti(path)
        np.testing.assert_array_equal(restored.data, data)
        assert restored.voxel_size == (1.5, 1.5, 2.0)
        again = write_nifti(restored, str(tmp_path / f"again_{name}"))
        assert open(again, "rb").read() == open(path, "rb").read()
    assert (tmp_path / "packed.nii.gz").read_bytes()[:2] == b"\x1f\x8b"


def test_decoder_errors():
    good = encode_nifti(Volume(np.zeros((2, 2, 2), dtype=np.float32)))
    with pytest.raises(BadMagicError):
        decode_nifti(good[:344] + b"abc\x00" + good[348:])
    with pytest.raises(UnsupportedFormatError):
        decode_nifti(good[:344] + b"ni1\x00" + good[348:])
    with pytest.raises(UnsupportedFormatError):
        decode_nifti(struct.pack("<i", 540) + good[4:])
    with pytest.raises(BadMagicError):
        decode_nifti(struct.pack("<i", 100) + good[4:])
    with pytest.raises(TruncatedPayloadError):
        decode_nifti(good[:-4])
    with pytest.raises(TruncatedPayloadError):
        decode_nifti(good[:200])
    with pytest.raises(TruncatedPayloadError):
        decode_nifti(gzip.compress(good)[:-10])

    header = empty_header()
    header["dim"] = [3, 2, 2, 2, 1, 1, 1, 1]
    header["datatype"] = 64
    with pytest.raises(UnsupportedDatatypeError):
        decode_nifti(header.tobytes() + b"\x00" * (4 + 64))


def test_missing_file_is_a_data_error(tmp_path):
    with pytest.raises(DataError):
        read_nifti(str(tmp_path / "absent.nii"))


# Preprocessing

def test_crop_offsets_center_with_odd_margin_high():
    assert crop_offsets((130, 155, 130), (128, 128, 128)) == (1, 13, 1)
    assert crop_offsets((5, 5, 5), (2, 2, 2)) == (1, 1, 1)
    with pytest.raises(ShapeError):
        crop_offsets((10, 10, 10), (12, 8, 8))


def test_center_crop_keeps_the_middle():
    data = np.arange(5 * 6 * 7, dtype=np.float32).reshape(5, 6, 7)
    cropped = center_crop(Volume(data), (3, 4, 5))
    np.testing.assert_array_equal(cropped.data, data[1:4, 1:5, 1:6])


def test_downsample_by_2_truncates_odd_extents_and_doubles_spacing():
    data = np.arange(6 * 7 * 6, dtype=np.float32).reshape(6, 7, 6)
    pooled = downsample_by_2(Volume(data, voxel_size=(0.7, 0.7, 0.7)))
    assert pooled.dims == (3, 3, 3)
    assert pooled.voxel_size == pytest.approx((1.4, 1.4, 1.4))
    assert pooled.data[0, 0, 0] == pytest.approx(data[:2, :2, :2].mean())
    with pytest.raises(ShapeError):
        downsample_by_2(Volume(np.zeros((1, 4, 4))))


def test_normalize_maps_range_to_unit_interval_and_back(rng):
    data = rng.uniform(10.0, 500.0, (4, 4, 4)).astype(np.float32)
    normalized = normalize_intensity(Volume(data))
    assert normalized.data.min() == -1.0 and normalized.data.max() == 1.0
    restored = denormalize_intensity(normalized)
    np.testing.assert_allclose(restored.data, data, rtol=1e-5)
    with pytest.raises(DataError):
        normalize_intensity(Volume(np.full((2, 2, 2), 3.0)))
    with pytest.raises(DataError):
        denormalize_intensity(Volume(data))


def test_upsample_to_integer_multiples_only():
    data = np.arange(8, dtype=np.float32).reshape(2, 2, 2)
    up = upsample_to(Volume(data, voxel_size=(2.0, 2.0, 2.0)), (4, 4, 4))
    assert up.dims == (4, 4, 4)
    assert up.data[3, 1, 2] == data[1, 0, 1]
    assert up.voxel_size == (1.0, 1.0, 1.0)
    with pytest.raises(ShapeError):
        upsample_to(Volume(data), (3, 4, 4))
    with pytest.raises(ValueError):
        upsample_to(Volume(data), (4, 4, 4), mode="linear")


# PGM

def test_gray_mapping_rounds_half_up_and_clips():
    values = np.array([-2.0, -1.0, 0.0, 1.0, 3.0])
    np.testing.assert_array_equal(to_gray(values), [0, 0, 128, 255, 255])


def test_pgm_bytes():
    image = np.array([[0, 255], [128, 7]], dtype=np.uint8)
    assert encode_pgm(image) == b"P5\n2 2\n255\n\x00\xff\x80\x07"
    with pytest.raises(ShapeError):
        encode_pgm(image.astype(np.float32))


def test_central_slices_and_export(tmp_path, rng):
    data = rng.uniform(-1, 1, (4, 6, 8)).astype(np.float32)
    volume = Volume(data)
    planes = central_slices(volume)
    assert planes["axial"].shape == (6, 4)
    assert planes["coronal"].shape == (8, 4)
    assert planes["sagittal"].shape == (8, 6)
    np.testing.assert_array_equal(planes["axial"][-1], data[:, 0, 4])

    paths = export_slices(volume, str(tmp_path / "sample_000"))
    assert [p.rsplit("_", 1)[1] for p in paths] == ["axial.pgm", "coronal.pgm", "sagittal.pgm"]
    np.testing.assert_array_equal(read_pgm(paths[0]), to_gray(planes["axial"]))


def test_montage_tiles_axial_slices(tmp_path, rng):
    volume = Volume(rng.uniform(-1, 1, (4, 5, 9)).astype(np.float32))
    image = read_pgm(export_montage(volume, str(tmp_path / "montage.pgm"), n_slices=4))
    assert image.shape == (2 * 5, 2 * 4)


# Phantom

def test_phantom_is_seeded_and_shaped():
    first = synth_phantom(np.random.default_rng([1, 5, 0]), (20, 24, 20), (2.0, 2.0, 2.0))
    second = synth_phantom(np.random.default_rng([1, 5, 0]), (20, 24, 20), (2.0, 2.0, 2.0))
    other = synth_phantom(np.random.default_rng([1, 5, 1]), (20, 24, 20), (2.0, 2.0, 2.0))
    assert first.dims == (20, 24, 20)
    np.testing.assert_array_equal(first.data, second.data)
    assert not np.array_equal(first.data, other.data)
    low, high = first.value_range()
    assert low >= 0.0 and high > low


def _hand_built_nifti() -> bytes:
    """2x2x2 float32 file assembled field by field"""
    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, 348)
    struct.pack_into("<8h", header, 40, 3, 2, 2, 2, 1, 1, 1, 1)
    struct.pack_into("<hh", header, 70, 16, 32)
    struct.pack_into("<8f", header, 76, 1.0, 1.5, 2.0, 2.5, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<fff", header, 108, 352.0, 1.0, 0.0)
    header[344:348] = b"n+1\x00"
    payload = struct.pack("<8f", 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0)
    return bytes(header) + b"\x00" * 4 + payload


def test_hand_built_file_is_parsed(tmp_path):
    raw = _hand_built_nifti()
    path = tmp_path / "golden.nii.gz"
    path.write_bytes(gzip.compress(raw, mtime=0))
    for volume in (decode_nifti(raw), read_nifti(str(path))):
        assert volume.dims == (2, 2, 2)
        assert volume.voxel_size == (1.5, 2.0, 2.5)
        for x, y, z in np.ndindex(2, 2, 2):
            assert volume.data[x, y, z] == x + 2 * y + 4 * z
        assert volume.value_range() == (0.0, 7.0)


def test_fractional_vox_offset_is_rejected():
    raw = bytearray(_hand_built_nifti())
    struct.pack_into("<f", raw, 108, 352.5)
    with pytest.raises(NiftiError, match="whole byte offset"):
        decode_nifti(bytes(raw))
    struct.pack_into("<f", raw, 108, float("nan"))
    with pytest.raises(NiftiError):
        decode_nifti(bytes(raw))


def test_downsample_by_2_preserves_the_mean_of_even_volumes(rng):
    data = rng.uniform(-3.0, 5.0, (6, 8, 4)).astype(np.float32)
    pooled = downsample_by_2(Volume(data))
    assert float(pooled.data.mean(dtype=np.float64)) == pytest.approx(float(data.mean(dtype=np.float64)),
                                                                      abs=1e-6)


def test_ramp_volume_slices_match_hand_written_pgm(tmp_path):
    # values depend on y only: -1, 0, 1
    data = np.broadcast_to(np.array([-1.0, 0.0, 1.0], dtype=np.float32)[None, :, None], (2, 3, 2)).copy()
    axial, coronal, sagittal = export_slices(Volume(data), str(tmp_path / "ramp"))
    with open(axial, "rb") as handle:
        assert handle.read() == b"P5\n2 3\n255\n" + bytes([255, 255, 128, 128, 0, 0])
    with open(coronal, "rb") as handle:
        assert handle.read() == b"P5\n2 2\n255\n" + bytes([128] * 4)
    with open(sagittal, "rb") as handle:
        assert handle.read() == b"P5\n3 2\n255\n" + bytes([0, 128, 255, 0, 128, 255])
