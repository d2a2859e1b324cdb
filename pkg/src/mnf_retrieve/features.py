"""Spatial-neighborhood feature stacking for regression design matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decompose import ScoreCube
from .errors import ConfigError

__all__ = ["DesignMatrix", "extract_neighborhood", "OFFSET_MAJOR_ORDERING"]

# offsets scanned row-major from (-r,-r) to (r,r); the k components of each
# offset stay contiguous
OFFSET_MAJOR_ORDERING = "offset-major-row-scan"


@dataclass(frozen=True)
class DesignMatrix:
    """n_samples x (k * w^2) stacked-neighborhood feature matrix."""

    matrix: np.ndarray
    window: int
    components: int
    ordering: str
    pixel_coords: np.ndarray  # (n_samples, 2) row/col of each sample

    def __post_init__(self):
        if self.matrix.shape[1] != self.components * self.window**2:
            raise ConfigError("design matrix width must be k * w^2")

    @property
    def n_samples(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]


def extract_neighborhood(scores: ScoreCube, w: int, padding: str = "mirror") -> DesignMatrix:
    """One sample per pixel: the pixel's scores plus those of its w x w window.

    Out-of-bounds neighbors are filled by mirror padding (reflection without
    repeating the edge pixel); ``padding="replicate"`` repeats the edge pixel
    instead, useful for checking that interior rows do not depend on the
    policy.
    """
    if w < 1 or w % 2 == 0:
        raise ConfigError(f"window size must be odd and positive, got {w}")
    rows, cols, k = scores.values.shape
    if w > min(rows, cols):
        raise ConfigError(f"window {w} exceeds grid {rows}x{cols}")
    if padding not in ("mirror", "replicate"):
        raise ConfigError(f"unknown padding policy {padding!r}")

    r = (w - 1) // 2
    coords = np.stack(
        np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij"), axis=-1
    ).reshape(-1, 2)
    if r == 0:
        matrix = scores.values.reshape(rows * cols, k).copy()
        return DesignMatrix(matrix, w, k, OFFSET_MAJOR_ORDERING, coords)

    mode = "reflect" if padding == "mirror" else "edge"
    padded = np.pad(scores.values, ((r, r), (r, r), (0, 0)), mode=mode)
    blocks = [
        padded[r + dy : r + dy + rows, r + dx : r + dx + cols, :]
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
    ]
    matrix = np.concatenate(blocks, axis=2).reshape(rows * cols, k * w * w)
    return DesignMatrix(matrix, w, k, OFFSET_MAJOR_ORDERING, coords)
