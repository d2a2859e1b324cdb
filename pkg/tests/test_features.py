import numpy as np
import pytest

from mnf_retrieve.decompose import ScoreCube
from mnf_retrieve.errors import ConfigError
from mnf_retrieve.features import OFFSET_MAJOR_ORDERING, extract_neighborhood


def ramp_scores():
    return ScoreCube(values=np.arange(1.0, 10.0).reshape(3, 3, 1), method="pca")


def test_w1_is_flattened_scores():
    rng = np.random.default_rng(0)
    scores = ScoreCube(values=rng.standard_normal((5, 4, 3)), method="pca")
    dm = extract_neighborhood(scores, 1)
    assert np.array_equal(dm.matrix, scores.values.reshape(20, 3))
    assert dm.ordering == OFFSET_MAJOR_ORDERING


def test_center_pixel_row_in_offset_order():
    dm = extract_neighborhood(ramp_scores(), 3)
    center_row = dm.matrix[4]  # pixel (1, 1)
    assert center_row.tolist() == [1, 2, 3, 4, 5, 6, 7, 8, 9]


def test_corner_pixel_matches_explicit_mirror_padding():
    scores = ramp_scores()
    dm = extract_neighborhood(scores, 3)
    padded = np.pad(scores.values[:, :, 0], 1, mode="reflect")
    oracle = padded[0:3, 0:3].ravel()
    assert np.array_equal(dm.matrix[0], oracle)


def test_interior_rows_independent_of_padding_policy():
    rng = np.random.default_rng(1)
    scores = ScoreCube(values=rng.standard_normal((7, 6, 2)), method="mnf")
    mirror = extract_neighborhood(scores, 3, padding="mirror")
    replicate = extract_neighborhood(scores, 3, padding="replicate")
    interior = (
        (mirror.pixel_coords[:, 0] >= 1)
        & (mirror.pixel_coords[:, 0] <= 5)
        & (mirror.pixel_coords[:, 1] >= 1)
        & (mirror.pixel_coords[:, 1] <= 4)
    )
    assert np.array_equal(mirror.matrix[interior], replicate.matrix[interior])
    assert not np.array_equal(mirror.matrix, replicate.matrix)


def test_components_contiguous_within_offset():
    rng = np.random.default_rng(2)
    scores = ScoreCube(values=rng.standard_normal((5, 5, 3)), method="pca")
    dm = extract_neighborhood(scores, 3)
    # offset (0, 0) is the 5th of 9 row-major offsets
    center_block = dm.matrix[:, 4 * 3 : 5 * 3]
    assert np.array_equal(center_block, scores.values.reshape(25, 3))


def test_column_count_scales_as_k_w_squared():
    rng = np.random.default_rng(3)
    scores = ScoreCube(values=rng.standard_normal((9, 9, 4)), method="pca")
    for w in (1, 3, 5):
        dm = extract_neighborhood(scores, w)
        assert dm.n_features == 4 * w * w
        assert dm.n_samples == 81


def test_window_validation():
    scores = ramp_scores()
    with pytest.raises(ConfigError, match="odd"):
        extract_neighborhood(scores, 2)
    with pytest.raises(ConfigError, match="exceeds"):
        extract_neighborhood(scores, 5)
    with pytest.raises(ConfigError, match="padding"):
        extract_neighborhood(scores, 3, padding="wrap")
