"""Deterministic synthetic scene generation.

Stands in for real sounder orbits: a handful of spatially smooth latent
fields drive both the spectra (through a random mixing matrix) and the
target profiles (through random per-level loadings), while per-band noise
is spatially rough.  That contrast - smooth signal, rough noise - is the
regime where residual-filter noise estimation is valid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict, fields as dc_fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from .cubes import ProfileCube, SpectralCube
from .errors import ConfigError

__all__ = ["SceneConfig", "generate_scene", "generate_orbit_set", "default_scene_config"]


@dataclass(frozen=True)
class SceneConfig:
    rows: int = 128
    cols: int = 32
    bands: int = 64
    levels: int = 16
    latent_count: int = 6
    length_scale: float = 6.0  # pixels; squared-exponential smoothing of latents
    noise_std: object = 0.0  # scalar or per-band list of length `bands`
    noise_spatial_correlation: bool = False
    nonlinearity: float = 0.0
    seed: int = 0  # master seed: fixes mixing/profile loadings and field streams
    orbit: int = 0  # varies latent/noise realizations under a fixed mixing
    mixing_seed: int | None = None  # overrides the mixing stream when set

    def __post_init__(self):
        if min(self.rows, self.cols, self.bands, self.levels) < 1:
            raise ConfigError("scene dims must be positive")
        if not 1 <= self.latent_count <= min(self.bands, self.rows * self.cols):
            raise ConfigError(
                f"latent_count {self.latent_count} must be in [1, min(bands, rows*cols)]"
            )
        if self.length_scale < 0:
            raise ConfigError("length_scale must be non-negative")
        if self.nonlinearity < 0:
            raise ConfigError("nonlinearity must be non-negative")
        profile = self.noise_std_profile()
        if not np.all(np.isfinite(profile)) or np.any(profile < 0):
            raise ConfigError("noise_std entries must be finite and non-negative")

    def noise_std_profile(self) -> np.ndarray:
        prof = np.asarray(self.noise_std, dtype=np.float64)
        if prof.ndim == 0:
            return np.full(self.bands, float(prof))
        if prof.shape != (self.bands,):
            raise ConfigError(
                f"noise_std has length {prof.size} but the scene has {self.bands} bands"
            )
        return prof

    def to_json(self) -> str:
        d = asdict(self)
        if isinstance(d["noise_std"], np.ndarray):
            d["noise_std"] = list(d["noise_std"])
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "SceneConfig":
        known = {f.name for f in dc_fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scene config field(s): {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"invalid scene config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SceneConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scene config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"scene config {path} must hold a JSON object")
        return cls.from_dict(data)


def _streams(config: SceneConfig):
    """Fixed stream-splitting order (latents, mixing, noise, profile).

    Adding config fields never perturbs earlier streams; mixing and profile
    loadings depend only on the master seed (or mixing_seed), so orbits
    generated under one master seed share a generative model.
    """
    master = np.random.SeedSequence(config.seed)
    latents_ss, mixing_ss, noise_ss, profile_ss = master.spawn(4)
    if config.mixing_seed is not None:
        mixing_ss = np.random.SeedSequence(config.mixing_seed)
    latents_ss = latents_ss.spawn(config.orbit + 1)[config.orbit]
    noise_ss = noise_ss.spawn(config.orbit + 1)[config.orbit]
    return (
        np.random.default_rng(latents_ss),
        np.random.default_rng(mixing_ss),
        np.random.default_rng(noise_ss),
        np.random.default_rng(profile_ss),
    )


def _smooth_fields(rng, rows, cols, count, length_scale) -> np.ndarray:
    """Standardized squared-exponential-smoothed white noise, (rows, cols, count)."""
    white = rng.standard_normal((rows, cols, count))
    if length_scale > 0:
        fields = ndimage.gaussian_filter(
            white, sigma=(length_scale, length_scale, 0), mode="mirror"
        )
    else:
        fields = white
    fields = fields - fields.mean(axis=(0, 1))
    std = fields.std(axis=(0, 1))
    std[std == 0] = 1.0
    return fields / std


def generate_scene(config: SceneConfig):
    """Build one paired (SpectralCube, ProfileCube) plus the true latent fields.

    Identical configs produce bit-identical output.
    """
    latents_rng, mixing_rng, noise_rng, profile_rng = _streams(config)
    q = config.latent_count
    latents = _smooth_fields(latents_rng, config.rows, config.cols, q, config.length_scale)
    z = latents.reshape(-1, q)

    mixing = mixing_rng.standard_normal((q, config.bands))
    mixed = z @ mixing
    spectra = mixed.copy()
    if config.nonlinearity > 0:
        spectra += config.nonlinearity * np.tanh(mixed)

    noise_profile = config.noise_std_profile()
    if noise_profile.any():
        noise = noise_rng.standard_normal((config.rows, config.cols, config.bands))
        if config.noise_spatial_correlation:
            noise = ndimage.gaussian_filter(noise, sigma=(1.0, 1.0, 0), mode="mirror")
            scale = noise.std(axis=(0, 1))
            scale[scale == 0] = 1.0
            noise = noise / scale
        spectra += (noise * noise_profile).reshape(-1, config.bands)

    loadings = profile_rng.standard_normal((q, config.levels))
    profiles = z @ loadings

    # descending pressure, surface first
    pressure = np.linspace(1000.0, 10.0, config.levels)
    spectral = SpectralCube(values=spectra.reshape(config.rows, config.cols, config.bands))
    profile = ProfileCube(
        values=profiles.reshape(config.rows, config.cols, config.levels),
        pressure_axis=pressure,
    )
    return spectral, profile, latents


def generate_orbit_set(config: SceneConfig, n_orbits: int = 4):
    """Generate n_orbits scenes sharing the mixing/profile model of `config`.

    Returns a list of (SpectralCube, ProfileCube) pairs; orbit index varies
    the latent and noise realizations only.
    """
    if n_orbits < 1:
        raise ConfigError("n_orbits must be positive")
    pairs = []
    for orbit in range(n_orbits):
        cfg = SceneConfig(**{**asdict(config), "orbit": orbit})
        spectral, profile, _ = generate_scene(cfg)
        pairs.append((spectral, profile))
    return pairs


def default_scene_config(seed: int = 0) -> SceneConfig:
    """Structured-noise benchmark scene: smooth signal, band-dependent white noise."""
    bands = 64
    noise = np.linspace(0.2, 6.0, bands)
    return SceneConfig(
        rows=128,
        cols=32,
        bands=bands,
        levels=16,
        latent_count=6,
        length_scale=6.0,
        noise_std=list(noise),
        seed=seed,
    )
