import numpy as np
import pytest

from mnf_retrieve.errors import ConfigError
from mnf_retrieve.synth import SceneConfig, default_scene_config, generate_orbit_set, generate_scene


def small_config(**overrides):
    base = dict(rows=32, cols=16, bands=8, levels=4, latent_count=3,
                length_scale=4.0, noise_std=0.5, seed=42)
    base.update(overrides)
    return SceneConfig(**base)


def test_same_config_is_bit_identical():
    a_spec, a_prof, a_lat = generate_scene(small_config())
    b_spec, b_prof, b_lat = generate_scene(small_config())
    assert np.array_equal(a_spec.values, b_spec.values)
    assert np.array_equal(a_prof.values, b_prof.values)
    assert np.array_equal(a_lat, b_lat)


def test_requested_dims():
    cfg = SceneConfig(rows=128, cols=32, bands=64, levels=16, latent_count=4, seed=0)
    spec, prof, latents = generate_scene(cfg)
    assert spec.values.shape == (128, 32, 64)
    assert prof.values.shape == (128, 32, 16)
    assert latents.shape == (128, 32, 4)


def test_orbits_differ_but_share_mixing():
    pairs = generate_orbit_set(small_config(noise_std=0.0), 2)
    assert not np.array_equal(pairs[0][0].values, pairs[1][0].values)
    # noiseless spectra of both orbits live in the same q-dim mixing row space
    stacked = np.vstack([p[0].values.reshape(-1, 8) for p in pairs])
    rank = np.linalg.matrix_rank(stacked, tol=1e-8)
    assert rank == 3


def test_latent_fields_are_smooth():
    cfg = small_config(rows=64, cols=64, length_scale=4.0)
    _, _, latents = generate_scene(cfg)
    for q in range(latents.shape[2]):
        f = latents[:, :, q]
        lag1 = np.corrcoef(f[:-1].ravel(), f[1:].ravel())[0, 1]
        assert lag1 > 0.9


def test_noise_variance_matches_profile():
    stds = np.linspace(0.5, 2.0, 8)
    cfg = small_config(rows=64, cols=64, noise_std=list(stds), length_scale=4.0)
    noisy, _, _ = generate_scene(cfg)
    clean, _, _ = generate_scene(SceneConfig(**{**cfg.__dict__, "noise_std": 0.0}))
    noise = (noisy.values - clean.values).reshape(-1, 8)
    assert np.all(np.abs(noise.var(axis=0) - stds**2) <= 0.1 * stds**2)


def test_spatially_correlated_noise_preserves_band_stds():
    stds = np.linspace(0.5, 2.0, 8)
    cfg = small_config(rows=64, cols=64, noise_std=list(stds),
                       noise_spatial_correlation=True)
    noisy, _, _ = generate_scene(cfg)
    clean, _, _ = generate_scene(
        SceneConfig(**{**cfg.__dict__, "noise_std": 0.0, "noise_spatial_correlation": False})
    )
    noise = (noisy.values - clean.values).reshape(-1, 8)
    assert np.all(np.abs(noise.var(axis=0) - stds**2) <= 0.1 * stds**2)


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(latent_count=0)
    with pytest.raises(ConfigError):
        small_config(latent_count=100)
    with pytest.raises(ConfigError):
        small_config(noise_std=-1.0)
    with pytest.raises(ConfigError):
        small_config(nonlinearity=-0.1)
    with pytest.raises(ConfigError):
        small_config(noise_std=[1.0, 2.0])  # wrong length


def test_config_json_round_trip(tmp_path):
    cfg = default_scene_config(7)
    path = tmp_path / "scene.json"
    path.write_text(cfg.to_json())
    assert SceneConfig.load(path) == cfg


def test_config_rejects_unknown_field(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text('{"rows": 4, "colz": 5}')
    with pytest.raises(ConfigError, match="colz"):
        SceneConfig.load(path)


def test_config_rejects_invalid_json(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text("{broken")
    with pytest.raises(ConfigError, match="JSON"):
        SceneConfig.load(path)


def test_pressure_axis_monotone():
    _, prof, _ = generate_scene(small_config())
    assert np.all(np.diff(prof.pressure_axis) < 0)
