"""Gridded cube data model and bit-exact file I/O.

A cube is a rows x cols x depth image stored band-interleaved-by-pixel
(pixel-major row scan, the depth values of one pixel contiguous).  On disk
each cube is a pair of files: ``<name>.json`` sidecar header plus
``<name>.bin`` raw little-endian 64-bit floats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError

__all__ = [
    "SpectralCube",
    "ProfileCube",
    "CubeHeader",
    "load_cube",
    "save_cube",
    "apply_band_mask",
    "cube_to_matrix",
    "matrix_to_cube",
    "profiles_to_matrix",
    "matrix_to_profiles",
]


def _check_values(values: np.ndarray, what: str) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float64)
    if not np.isfinite(values).all():
        bad = ~np.isfinite(values.ravel())
        count = int(bad.sum())
        first = int(np.argmax(bad))
        raise DataFormatError(
            f"{what} contains {count} non-finite value(s); first at flat index {first}"
        )
    return values


@dataclass(frozen=True)
class SpectralCube:
    """Radiance / brightness-temperature image, shape (rows, cols, bands)."""

    values: np.ndarray
    band_ids: np.ndarray | None = None

    def __post_init__(self):
        values = _check_values(self.values, "spectral cube")
        if values.ndim != 3 or min(values.shape) < 1:
            raise ConfigError(f"cube values must be (rows, cols, bands), got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.band_ids is not None:
            ids = np.asarray(self.band_ids, dtype=np.int64)
            if ids.shape != (values.shape[2],):
                raise ConfigError("band_ids length must equal the number of bands")
            if np.any(np.diff(ids) <= 0):
                raise ConfigError("band_ids must be strictly increasing")
            ids.setflags(write=False)
            object.__setattr__(self, "band_ids", ids)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class ProfileCube:
    """Target atmospheric profiles on the same grid, shape (rows, cols, levels).

    ``pressure_axis`` gives the vertical coordinate (hPa) of each level and
    must be strictly monotone.
    """

    values: np.ndarray
    pressure_axis: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        values = _check_values(self.values, "profile cube")
        if values.ndim != 3 or min(values.shape) < 1:
            raise ConfigError(f"profile values must be (rows, cols, levels), got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.pressure_axis is None:
            raise ConfigError("profile cube requires a pressure_axis")
        axis = np.asarray(self.pressure_axis, dtype=np.float64)
        if axis.shape != (values.shape[2],):
            raise ConfigError("pressure_axis length must equal the number of levels")
        d = np.diff(axis)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigError("pressure_axis must be strictly monotone")
        axis.setflags(write=False)
        object.__setattr__(self, "pressure_axis", axis)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def levels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class CubeHeader:
    """Sidecar metadata describing a binary cube payload."""

    rows: int
    cols: int
    depth: int
    role: str  # spectral | profile | noise | scores
    dtype: str = "f64"
    order: str = "little"
    layout: str = "bip"
    band_ids: list | None = None
    pressure_axis: list | None = None

    def __post_init__(self):
        if min(self.rows, self.cols, self.depth) < 1:
            raise DataFormatError("header dims must be positive")
        if self.dtype != "f64" or self.order != "little" or self.layout != "bip":
            raise DataFormatError(
                f"unsupported format tags dtype={self.dtype} order={self.order} layout={self.layout}"
            )
        if self.role not in ("spectral", "profile", "noise", "scores"):
            raise DataFormatError(f"unknown cube role {self.role!r}")

    @property
    def n_values(self) -> int:
        return self.rows * self.cols * self.depth

    def to_dict(self) -> dict:
        out = {
            "rows": self.rows,
            "cols": self.cols,
            "depth": self.depth,
            "dtype": self.dtype,
            "order": self.order,
            "layout": self.layout,
            "role": self.role,
        }
        if self.band_ids is not None:
            out["band_ids"] = list(int(b) for b in self.band_ids)
        if self.pressure_axis is not None:
            out["pressure_axis"] = list(float(p) for p in self.pressure_axis)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CubeHeader":
        try:
            return cls(
                rows=int(d["rows"]),
                cols=int(d["cols"]),
                depth=int(d["depth"]),
                role=str(d["role"]),
                dtype=str(d.get("dtype", "f64")),
                order=str(d.get("order", "little")),
                layout=str(d.get("layout", "bip")),
                band_ids=d.get("band_ids"),
                pressure_axis=d.get("pressure_axis"),
            )
        except KeyError as exc:
            raise DataFormatError(f"cube header missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed cube header: {exc}") from exc


def _base_path(path) -> Path:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p


def save_cube(cube, path, role: str | None = None) -> None:
    """Write ``<path>.json`` + ``<path>.bin`` for a SpectralCube or ProfileCube."""
    base = _base_path(path)
    if isinstance(cube, ProfileCube):
        header = CubeHeader(
            cube.rows, cube.cols, cube.levels, role or "profile",
            pressure_axis=list(cube.pressure_axis),
        )
    elif isinstance(cube, SpectralCube):
        header = CubeHeader(
            cube.rows, cube.cols, cube.bands, role or "spectral",
            band_ids=None if cube.band_ids is None else list(cube.band_ids),
        )
    else:
        raise ConfigError(f"cannot save object of type {type(cube).__name__}")
    base.parent.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(cube.values, dtype="<f8").tobytes()
    base.with_suffix(".bin").write_bytes(payload)
    base.with_suffix(".json").write_text(
        json.dumps(header.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_cube(path):
    """Read a cube pair written by :func:`save_cube`.

    The header role decides the returned type: ``profile`` yields a
    ProfileCube, everything else a SpectralCube.
    """
    base = _base_path(path)
    hpath = base.with_suffix(".json")
    bpath = base.with_suffix(".bin")
    if not hpath.exists():
        raise DataFormatError(f"missing cube header {hpath}")
    if not bpath.exists():
        raise DataFormatError(f"missing cube payload {bpath}")
    try:
        header = CubeHeader.from_dict(json.loads(hpath.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"malformed cube header {hpath}: {exc}") from exc
    raw = bpath.read_bytes()
    expected = header.n_values * 8
    if len(raw) != expected:
        raise DataFormatError(
            f"{bpath}: payload holds {len(raw) // 8} values but header declares "
            f"{header.rows}x{header.cols}x{header.depth} = {header.n_values}"
        )
    values = np.frombuffer(raw, dtype="<f8").reshape(header.rows, header.cols, header.depth)
    if header.role == "profile":
        if header.pressure_axis is None:
            raise DataFormatError(f"{hpath}: profile cube missing pressure_axis")
        return ProfileCube(values=values.copy(), pressure_axis=np.asarray(header.pressure_axis))
    return SpectralCube(values=values.copy(), band_ids=header.band_ids)


def apply_band_mask(cube: SpectralCube, keep) -> SpectralCube:
    """Drop bands where ``keep`` is false; records surviving original indices."""
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != (cube.bands,):
        raise ConfigError(f"mask length {keep.size} does not match {cube.bands} bands")
    if not keep.any():
        raise ConfigError("band mask keeps no bands")
    source_ids = cube.band_ids if cube.band_ids is not None else np.arange(cube.bands)
    return SpectralCube(values=cube.values[:, :, keep], band_ids=source_ids[keep])


def cube_to_matrix(cube: SpectralCube):
    """Flatten to the n x d sample matrix (pixel-major row scan).

    Returns ``(matrix, to_cube)`` where ``to_cube(matrix)`` restores the
    original grid layout.
    """
    rows, cols, band_ids = cube.rows, cube.cols, cube.band_ids

    def to_cube(matrix: np.ndarray) -> SpectralCube:
        return matrix_to_cube(matrix, rows, cols, band_ids=band_ids)

    return cube.values.reshape(cube.n_pixels, cube.bands), to_cube


def matrix_to_cube(matrix: np.ndarray, rows: int, cols: int, band_ids=None) -> SpectralCube:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != rows * cols:
        raise ConfigError(f"matrix shape {matrix.shape} does not match a {rows}x{cols} grid")
    return SpectralCube(values=matrix.reshape(rows, cols, matrix.shape[1]), band_ids=band_ids)


def profiles_to_matrix(profiles: ProfileCube) -> np.ndarray:
    """Flatten targets to n x o in the same pixel order as cube_to_matrix."""
    return profiles.values.reshape(profiles.rows * profiles.cols, profiles.levels)


def matrix_to_profiles(matrix: np.ndarray, rows: int, cols: int, pressure_axis) -> ProfileCube:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != rows * cols:
        raise ConfigError(f"matrix shape {matrix.shape} does not match a {rows}x{cols} grid")
    return ProfileCube(
        values=matrix.reshape(rows, cols, matrix.shape[1]), pressure_axis=pressure_axis
    )
