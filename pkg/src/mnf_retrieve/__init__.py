"""Noise-aware PCA/MNF decomposition and linear retrieval of atmospheric
profiles from gridded hyperspectral cubes."""

__version__ = "0.1.0"

from .cubes import (  # noqa: F401
    CubeHeader,
    ProfileCube,
    SpectralCube,
    apply_band_mask,
    cube_to_matrix,
    load_cube,
    matrix_to_cube,
    save_cube,
)
from .decompose import (  # noqa: F401
    LinearBasis,
    ScoreCube,
    eigenvalue_curve,
    fit_mnf,
    fit_pca,
    project,
    signal_fraction,
    truncate_basis,
)
from .errors import ConfigError, DataFormatError, NumericalError, PipelineError  # noqa: F401
from .evaluate import (  # noqa: F401
    SweepResult,
    gaussian_total_correlation,
    mean_rmse,
    rmse_profile,
    run_sweep,
)
from .features import DesignMatrix, extract_neighborhood  # noqa: F401
from .noise import (  # noqa: F401
    CovarianceEstimate,
    NoiseCube,
    noise_covariance,
    paraboloid_residual_filter,
    signal_covariance,
)
from .regression import RetrievalModel, fit_linear, predict  # noqa: F401
from .synth import SceneConfig, default_scene_config, generate_orbit_set, generate_scene  # noqa: F401
