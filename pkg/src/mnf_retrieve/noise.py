"""Per-pixel noise estimation and covariance accumulation.

Noise is estimated band by band as the residual of a least-squares quadratic
surface (basis 1, x, y, x^2, y^2, xy) fitted over each 3x3 window.  On the
3x3 grid that residual collapses to a single convolution kernel, so the
estimator runs as a plain filtering operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .cubes import SpectralCube
from .errors import ConfigError

__all__ = [
    "RESIDUAL_KERNEL",
    "WHITE_NOISE_RESIDUAL_STD",
    "NoiseCube",
    "CovarianceEstimate",
    "paraboloid_residual_filter",
    "noise_covariance",
    "signal_covariance",
    "pooled_noise_covariance",
    "pooled_signal_covariance",
]

# Residual of the 3x3 quadratic-surface fit at the window center.  Weights
# sum to zero, so any global quadratic in pixel coordinates is annihilated.
RESIDUAL_KERNEL = np.array(
    [[1.0, -2.0, 1.0],
     [-2.0, 4.0, -2.0],
     [1.0, -2.0, 1.0]]
) / 9.0

# i.i.d. noise of std sigma leaves residuals of std (2/3) sigma: the kernel's
# squared weights sum to 4/9.
WHITE_NOISE_RESIDUAL_STD = 2.0 / 3.0


@dataclass(frozen=True)
class NoiseCube:
    """Per-band residuals on the source grid.

    ``interior_mask`` is true where the full 3x3 window was in-bounds; border
    residuals use mirror padding and should not enter covariance estimates.
    """

    values: np.ndarray  # (rows, cols, bands)
    interior_mask: np.ndarray  # (rows, cols) bool
    scaling: str = "raw"  # raw | unit-white-noise-gain

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class CovarianceEstimate:
    """d x d second-moment matrix with provenance flags."""

    matrix: np.ndarray
    count: int
    centered: bool
    scaling: str = "raw"
    mean: np.ndarray | None = None
    low_sample_warning: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        scale = max(np.abs(m).max(), 1.0)
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise ConfigError("covariance matrix is not symmetric")
        object.__setattr__(self, "matrix", (m + m.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def paraboloid_residual_filter(cube: SpectralCube, scaling: str = "raw") -> NoiseCube:
    """Apply the 3x3 quadratic-residual kernel to every band.

    ``scaling="unit-white-noise-gain"`` rescales by 3/2 so white noise of std
    sigma yields residuals of std sigma.  Borders use mirror padding
    (reflection without repeating the edge pixel) and are flagged out of the
    interior mask.
    """
    if cube.rows < 3 or cube.cols < 3:
        raise ConfigError(f"residual filter needs at least 3x3 pixels, got {cube.rows}x{cube.cols}")
    if scaling not in ("raw", "unit-white-noise-gain"):
        raise ConfigError(f"unknown scaling mode {scaling!r}")
    residual = ndimage.correlate(cube.values, RESIDUAL_KERNEL[:, :, None], mode="mirror")
    if scaling == "unit-white-noise-gain":
        residual = residual / WHITE_NOISE_RESIDUAL_STD
    mask = np.zeros((cube.rows, cube.cols), dtype=bool)
    mask[1:-1, 1:-1] = True
    return NoiseCube(values=residual, interior_mask=mask, scaling=scaling)


def noise_covariance(noise: NoiseCube) -> CovarianceEstimate:
    """(1/m) sum of residual outer products over interior pixels.

    No mean subtraction: the residual kernel already annihilates local means.
    When fewer interior samples than bands are available the estimate carries
    a low-sample warning and downstream use must regularize.
    """
    v = noise.values[noise.interior_mask]  # (m, d)
    m, d = v.shape
    cov = (v.T @ v) / m
    return CovarianceEstimate(
        matrix=cov,
        count=m,
        centered=False,
        scaling=noise.scaling,
        low_sample_warning=m < d,
    )


def signal_covariance(cube: SpectralCube) -> CovarianceEstimate:
    """Mean-centered covariance over all pixels (population divisor n)."""
    x = cube.values.reshape(cube.n_pixels, cube.bands)
    n = x.shape[0]
    if n < 2:
        raise ConfigError("signal covariance needs at least 2 pixels")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / n
    return CovarianceEstimate(matrix=cov, count=n, centered=True, mean=mean)


def pooled_signal_covariance(cubes) -> CovarianceEstimate:
    """Centered covariance over the union of pixels of several cubes."""
    cubes = list(cubes)
    if not cubes:
        raise ConfigError("no cubes given")
    d = cubes[0].bands
    n = 0
    s1 = np.zeros(d)
    s2 = np.zeros((d, d))
    for cube in cubes:
        if cube.bands != d:
            raise ConfigError("cubes have inconsistent band counts")
        x = cube.values.reshape(cube.n_pixels, d)
        n += x.shape[0]
        s1 += x.sum(axis=0)
        s2 += x.T @ x
    if n < 2:
        raise ConfigError("signal covariance needs at least 2 pixels")
    mean = s1 / n
    cov = s2 / n - np.outer(mean, mean)
    return CovarianceEstimate(matrix=cov, count=n, centered=True, mean=mean)


def pooled_noise_covariance(cubes, scaling: str = "raw") -> CovarianceEstimate:
    """Residual-filter noise covariance pooled over several cubes."""
    cubes = list(cubes)
    if not cubes:
        raise ConfigError("no cubes given")
    d = cubes[0].bands
    m = 0
    s2 = np.zeros((d, d))
    for cube in cubes:
        if cube.bands != d:
            raise ConfigError("cubes have inconsistent band counts")
        noise = paraboloid_residual_filter(cube, scaling=scaling)
        v = noise.values[noise.interior_mask]
        m += v.shape[0]
        s2 += v.T @ v
    return CovarianceEstimate(
        matrix=s2 / m,
        count=m,
        centered=False,
        scaling=scaling,
        low_sample_warning=m < d,
    )
