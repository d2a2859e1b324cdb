import numpy as np
import pytest

from mnf_retrieve.cubes import SpectralCube
from mnf_retrieve.errors import ConfigError
from mnf_retrieve.noise import (
    RESIDUAL_KERNEL,
    NoiseCube,
    noise_covariance,
    paraboloid_residual_filter,
    signal_covariance,
)


def quadratic_fit_residuals_exact(band):
    """Oracle: per-pixel least-squares quadratic fit over each mirror-padded
    3x3 window, residual at the window center."""
    padded = np.pad(band, 1, mode="reflect")
    xs, ys = np.meshgrid([-1, 0, 1], [-1, 0, 1], indexing="ij")
    design = np.stack(
        [np.ones(9), xs.ravel(), ys.ravel(), xs.ravel() ** 2, ys.ravel() ** 2,
         (xs * ys).ravel()],
        axis=1,
    )
    center = np.array([1.0, 0, 0, 0, 0, 0])
    out = np.zeros_like(band)
    for i in range(band.shape[0]):
        for j in range(band.shape[1]):
            window = padded[i : i + 3, j : j + 3].ravel()
            coeff, *_ = np.linalg.lstsq(design, window, rcond=None)
            out[i, j] = window[4] - center @ coeff
    return out


def test_kernel_weights_sum_to_zero():
    assert abs(RESIDUAL_KERNEL.sum()) < 1e-15


def test_global_quadratic_annihilated():
    rows, cols = 12, 9
    x, y = np.meshgrid(np.arange(rows, dtype=float), np.arange(cols, dtype=float),
                       indexing="ij")
    band = 1.0 + 2.0 * x + 3.0 * y + x**2 - x * y + y**2
    cube = SpectralCube(values=band[:, :, None])
    noise = paraboloid_residual_filter(cube)
    interior = noise.values[noise.interior_mask, 0]
    assert np.abs(interior).max() <= 1e-12


def test_impulse_response_replicates_kernel():
    band = np.zeros((9, 9))
    band[4, 4] = 1.0
    cube = SpectralCube(values=band[:, :, None])
    noise = paraboloid_residual_filter(cube)
    got = noise.values[3:6, 3:6, 0]
    assert np.allclose(got, RESIDUAL_KERNEL, atol=1e-14)
    assert abs(got[1, 1] - 4.0 / 9.0) < 1e-14
    assert abs(got[0, 1] + 2.0 / 9.0) < 1e-14
    assert abs(got[0, 0] - 1.0 / 9.0) < 1e-14


def test_filter_matches_least_squares_oracle():
    rng = np.random.default_rng(7)
    for _ in range(100):
        cube = SpectralCube(values=rng.standard_normal((16, 16, 4)))
        noise = paraboloid_residual_filter(cube)
        for b in range(4):
            oracle = quadratic_fit_residuals_exact(cube.values[:, :, b])
            assert np.abs(noise.values[:, :, b] - oracle).max() <= 1e-10


def test_white_noise_residual_variance():
    rng = np.random.default_rng(11)
    cube = SpectralCube(values=rng.standard_normal((128, 128, 1)))
    raw = paraboloid_residual_filter(cube, scaling="raw")
    var = raw.values[raw.interior_mask, 0].var()
    assert abs(var - 4.0 / 9.0) <= 0.05 * (4.0 / 9.0)
    unit = paraboloid_residual_filter(cube, scaling="unit-white-noise-gain")
    var = unit.values[unit.interior_mask, 0].var()
    assert abs(var - 1.0) <= 0.05


def test_filter_rejects_small_cubes_and_bad_mode():
    cube = SpectralCube(values=np.zeros((2, 5, 1)))
    with pytest.raises(ConfigError, match="3x3"):
        paraboloid_residual_filter(cube)
    with pytest.raises(ConfigError, match="scaling"):
        paraboloid_residual_filter(SpectralCube(values=np.zeros((4, 4, 1))), scaling="odd")


def test_noise_covariance_zero_residuals():
    noise = NoiseCube(
        values=np.zeros((4, 4, 3)),
        interior_mask=np.pad(np.ones((2, 2), bool), 1, constant_values=False),
    )
    est = noise_covariance(noise)
    assert np.array_equal(est.matrix, np.zeros((3, 3)))
    assert est.count == 4
    assert not est.centered


def test_noise_covariance_near_identity_for_white_noise():
    rng = np.random.default_rng(13)
    cube = SpectralCube(values=rng.standard_normal((256, 256, 4)))
    noise = paraboloid_residual_filter(cube, scaling="unit-white-noise-gain")
    est = noise_covariance(noise)
    off = est.matrix - np.diag(np.diag(est.matrix))
    assert np.abs(np.diag(est.matrix) - 1.0).max() <= 0.05
    assert np.abs(off).max() <= 0.05


def test_duplicated_noise_band_gives_rank_one_block():
    rng = np.random.default_rng(17)
    band = rng.standard_normal((32, 32))
    cube = SpectralCube(values=np.stack([band, band], axis=2))
    est = noise_covariance(paraboloid_residual_filter(cube))
    corr = est.matrix[0, 1] / np.sqrt(est.matrix[0, 0] * est.matrix[1, 1])
    assert abs(corr - 1.0) <= 1e-12
    assert abs(np.linalg.det(est.matrix)) <= 1e-12 * est.matrix[0, 0] ** 2


def test_low_sample_warning():
    noise = NoiseCube(
        values=np.zeros((3, 3, 8)),
        interior_mask=np.pad(np.ones((1, 1), bool), 1, constant_values=False),
    )
    assert noise_covariance(noise).low_sample_warning


def test_covariances_positive_semidefinite():
    rng = np.random.default_rng(19)
    for seed in range(20):
        cube = SpectralCube(values=np.random.default_rng(seed).standard_normal((10, 10, 6)))
        for est in (signal_covariance(cube),
                    noise_covariance(paraboloid_residual_filter(cube))):
            evals = np.linalg.eigvalsh(est.matrix)
            assert evals.min() >= -1e-10 * np.trace(est.matrix)


def test_signal_covariance_examples():
    const = SpectralCube(values=np.full((3, 3, 2), 7.0))
    assert np.abs(signal_covariance(const).matrix).max() <= 1e-12

    two_point = SpectralCube(values=np.array([[-1.0], [1.0]]).reshape(1, 2, 1))
    est = signal_covariance(two_point)
    assert abs(est.matrix[0, 0] - 1.0) <= 1e-15  # population divisor n

    rng = np.random.default_rng(23)
    band = rng.standard_normal((6, 5))
    cube = SpectralCube(values=np.stack([band, band, rng.standard_normal((6, 5))], axis=2))
    est = signal_covariance(cube)
    assert np.allclose(est.matrix[0], est.matrix[1])
    assert np.allclose(est.matrix[:, 0], est.matrix[:, 1])


def test_signal_covariance_needs_two_pixels():
    with pytest.raises(ConfigError):
        signal_covariance(SpectralCube(values=np.zeros((1, 1, 2))))
