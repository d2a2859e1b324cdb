import numpy as np
import pytest

from mnf_retrieve.cubes import (
    CubeHeader,
    ProfileCube,
    SpectralCube,
    apply_band_mask,
    cube_to_matrix,
    load_cube,
    save_cube,
)
from mnf_retrieve.errors import ConfigError, DataFormatError


def random_cube(rng, rows=4, cols=3, bands=5):
    return SpectralCube(values=rng.standard_normal((rows, cols, bands)))


def test_save_load_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    cube = random_cube(rng)
    save_cube(cube, tmp_path / "c")
    loaded = load_cube(tmp_path / "c")
    assert isinstance(loaded, SpectralCube)
    assert np.array_equal(
        loaded.values.view(np.uint64), cube.values.view(np.uint64)
    )


def test_save_load_save_byte_identical(tmp_path):
    rng = np.random.default_rng(1)
    cube = random_cube(rng)
    save_cube(cube, tmp_path / "a")
    save_cube(load_cube(tmp_path / "a"), tmp_path / "b")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_single_value_cube_payload(tmp_path):
    save_cube(SpectralCube(values=np.zeros((1, 1, 1))), tmp_path / "z")
    payload = (tmp_path / "z.bin").read_bytes()
    assert payload == b"\x00" * 8


def test_profile_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    prof = ProfileCube(
        values=rng.standard_normal((3, 2, 4)),
        pressure_axis=[1000.0, 700.0, 400.0, 100.0],
    )
    save_cube(prof, tmp_path / "p")
    loaded = load_cube(tmp_path / "p")
    assert isinstance(loaded, ProfileCube)
    assert np.array_equal(loaded.values, prof.values)
    assert np.array_equal(loaded.pressure_axis, prof.pressure_axis)


def test_payload_size_mismatch_rejected(tmp_path):
    cube = SpectralCube(values=np.zeros((2, 2, 3)))
    save_cube(cube, tmp_path / "c")
    (tmp_path / "c.bin").write_bytes(b"\x00" * 8 * 11)
    with pytest.raises(DataFormatError, match="11"):
        load_cube(tmp_path / "c")


def test_missing_and_malformed_header(tmp_path):
    with pytest.raises(DataFormatError, match="missing"):
        load_cube(tmp_path / "nope")
    (tmp_path / "bad.json").write_text("{not json")
    (tmp_path / "bad.bin").write_bytes(b"")
    with pytest.raises(DataFormatError, match="malformed"):
        load_cube(tmp_path / "bad")


def test_nan_rejected_before_writing(tmp_path):
    values = np.zeros((2, 2, 2))
    values[1, 0, 1] = np.nan
    with pytest.raises(DataFormatError, match="non-finite"):
        SpectralCube(values=values)


def test_nonfinite_reported_with_count_and_index():
    values = np.zeros((1, 1, 4))
    values[0, 0, 2] = np.inf
    values[0, 0, 3] = np.nan
    with pytest.raises(DataFormatError, match=r"2 non-finite.*index 2"):
        SpectralCube(values=values)


def test_paper_scale_header_accepted():
    header = CubeHeader(rows=1530, cols=60, depth=4699, role="spectral")
    assert header.n_values == 1530 * 60 * 4699


def test_header_rejects_bad_dims_and_role():
    with pytest.raises(DataFormatError):
        CubeHeader(rows=0, cols=1, depth=1, role="spectral")
    with pytest.raises(DataFormatError):
        CubeHeader(rows=1, cols=1, depth=1, role="mystery")


def test_band_mask_identity():
    rng = np.random.default_rng(3)
    cube = random_cube(rng)
    masked = apply_band_mask(cube, [True] * cube.bands)
    assert np.array_equal(masked.values, cube.values)
    assert np.array_equal(masked.band_ids, np.arange(cube.bands))


def test_band_mask_selects_in_order():
    cube = SpectralCube(values=np.array([10.0, 20.0, 30.0]).reshape(1, 1, 3))
    masked = apply_band_mask(cube, [True, False, True])
    assert masked.values.ravel().tolist() == [10.0, 30.0]
    assert masked.band_ids.tolist() == [0, 2]


def test_band_mask_paper_scale_count():
    keep = np.zeros(8461, dtype=bool)
    keep[: 4699] = True
    cube = SpectralCube(values=np.zeros((1, 2, 8461)))
    assert apply_band_mask(cube, keep).bands == 4699


def test_band_mask_errors():
    cube = SpectralCube(values=np.zeros((1, 1, 3)))
    with pytest.raises(ConfigError, match="length"):
        apply_band_mask(cube, [True, False])
    with pytest.raises(ConfigError, match="no bands"):
        apply_band_mask(cube, [False, False, False])


def test_cube_to_matrix_scan_order_and_round_trip():
    cube = SpectralCube(values=np.arange(4.0).reshape(2, 1, 2))
    matrix, to_cube = cube_to_matrix(cube)
    assert matrix.shape == (2, 2)
    assert matrix.tolist() == [[0.0, 1.0], [2.0, 3.0]]
    back = to_cube(matrix)
    assert np.array_equal(back.values, cube.values)


def test_band_mask_commutes_with_flatten():
    rng = np.random.default_rng(4)
    cube = random_cube(rng, rows=5, cols=4, bands=7)
    keep = rng.random(7) > 0.4
    keep[0] = True
    masked_then_flat, _ = cube_to_matrix(apply_band_mask(cube, keep))
    flat_then_masked = cube_to_matrix(cube)[0][:, keep]
    assert np.array_equal(masked_then_flat, flat_then_masked)


def test_pressure_axis_must_be_monotone():
    with pytest.raises(ConfigError, match="monotone"):
        ProfileCube(values=np.zeros((1, 1, 3)), pressure_axis=[1000.0, 1000.0, 10.0])
