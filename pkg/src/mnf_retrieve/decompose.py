"""PCA and minimum-noise-fraction linear bases, projection, and diagnostics.

Both transforms come from eigenproblems on the centered signal covariance.
PCA takes the top eigenvectors directly; MNF solves the generalized problem
against the (regularized) noise covariance by Cholesky whitening, ranking
directions by signal-to-noise ratio.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .cubes import SpectralCube
from .errors import ConfigError, DataFormatError, NumericalError
from .noise import CovarianceEstimate

__all__ = [
    "LinearBasis",
    "ScoreCube",
    "fit_pca",
    "fit_mnf",
    "project",
    "reconstruct",
    "truncate_basis",
    "eigenvalue_curve",
    "signal_fraction",
    "save_basis",
    "load_basis",
    "export_component_images",
]

DEFAULT_MNF_RIDGE = 1e-10

SIGN_CONVENTION = "largest-entry-positive"


@dataclass(frozen=True)
class LinearBasis:
    """Fitted projection: x -> W^T (x - mean).

    Columns of ``components`` are ordered by descending eigenvalue.  For PCA
    the columns are orthonormal; for MNF they are orthonormal in the metric
    of the regularized noise covariance kept in ``noise_cov_reg``.
    """

    method: str  # pca | mnf
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (d, k)
    eigenvalues: np.ndarray  # (k,) descending
    noise_ridge: float = 0.0
    sign_convention: str = SIGN_CONVENTION
    noise_cov_reg: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.method not in ("pca", "mnf"):
            raise ConfigError(f"unknown basis method {self.method!r}")
        ev = np.asarray(self.eigenvalues, dtype=np.float64)
        if ev.size and np.any(np.diff(ev) > 1e-12 * max(abs(ev[0]), 1.0)):
            raise ConfigError("eigenvalues must be sorted descending")

    @property
    def d(self) -> int:
        return self.components.shape[0]

    @property
    def k(self) -> int:
        return self.components.shape[1]


@dataclass(frozen=True)
class ScoreCube:
    """Projected scores on the source grid, shape (rows, cols, k)."""

    values: np.ndarray
    method: str

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def k(self) -> int:
        return self.values.shape[2]


def _fix_signs(w: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column positive.

    argmax breaks magnitude ties toward the lowest index, which pins the
    convention across eigensolvers.
    """
    w = w.copy()
    idx = np.argmax(np.abs(w), axis=0)
    flip = w[idx, np.arange(w.shape[1])] < 0
    w[:, flip] *= -1.0
    return w


def _check_k(k: int, d: int) -> None:
    if not 1 <= k <= d:
        raise ConfigError(f"component count k={k} out of range [1, {d}]")


def fit_pca(signal_cov: CovarianceEstimate, k: int) -> LinearBasis:
    """Top-k unit eigenvectors of the centered signal covariance."""
    d = signal_cov.dim
    _check_k(k, d)
    evals, evecs = np.linalg.eigh(signal_cov.matrix)
    order = np.argsort(evals)[::-1]
    evals = evals[order][:k]
    w = _fix_signs(evecs[:, order][:, :k])
    mean = signal_cov.mean if signal_cov.mean is not None else np.zeros(d)
    return LinearBasis(method="pca", mean=mean, components=w, eigenvalues=evals)


def fit_mnf(
    signal_cov: CovarianceEstimate,
    noise_cov: CovarianceEstimate,
    k: int,
    ridge: float = DEFAULT_MNF_RIDGE,
) -> LinearBasis:
    """Solve  Sigma w = lambda (Sigma_N + ridge * mean-diag * I) w  by whitening.

    Cholesky-factor the regularized noise covariance as L L^T, take the
    symmetric eigendecomposition of L^-1 Sigma L^-T, and back-transform the
    eigenvectors with L^-T.  Eigenvalues are total-over-noise variance ratios,
    sorted descending.
    """
    d = signal_cov.dim
    if noise_cov.dim != d:
        raise ConfigError(f"signal ({d}) and noise ({noise_cov.dim}) dimensions differ")
    _check_k(k, d)
    if ridge < 0:
        raise ConfigError("ridge must be non-negative")
    sigma_n = noise_cov.matrix + ridge * (np.trace(noise_cov.matrix) / d) * np.eye(d)
    try:
        chol = np.linalg.cholesky(sigma_n)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"noise covariance not positive definite at ridge={ridge!r}; increase ridge"
        ) from exc
    # whitened = L^-1 Sigma L^-T, symmetric by construction
    half = solve_triangular(chol, signal_cov.matrix, lower=True)
    whitened = solve_triangular(chol, half.T, lower=True)
    whitened = (whitened + whitened.T) / 2.0
    evals, evecs = np.linalg.eigh(whitened)
    order = np.argsort(evals)[::-1]
    evals = evals[order][:k]
    u = evecs[:, order][:, :k]
    w = _fix_signs(solve_triangular(chol, u, lower=True, trans="T"))
    mean = signal_cov.mean if signal_cov.mean is not None else np.zeros(d)
    return LinearBasis(
        method="mnf",
        mean=mean,
        components=w,
        eigenvalues=evals,
        noise_ridge=ridge,
        noise_cov_reg=sigma_n,
    )


def truncate_basis(basis: LinearBasis, k: int) -> LinearBasis:
    """Keep the leading k components of a fitted basis."""
    _check_k(k, basis.k)
    if k == basis.k:
        return basis
    return LinearBasis(
        method=basis.method,
        mean=basis.mean,
        components=basis.components[:, :k],
        eigenvalues=basis.eigenvalues[:k],
        noise_ridge=basis.noise_ridge,
        sign_convention=basis.sign_convention,
        noise_cov_reg=basis.noise_cov_reg,
    )


def project(cube: SpectralCube, basis: LinearBasis) -> ScoreCube:
    """Per-pixel scores W^T (x - mean)."""
    if cube.bands != basis.d:
        raise ConfigError(f"cube has {cube.bands} bands but basis expects {basis.d}")
    x = cube.values.reshape(cube.n_pixels, cube.bands)
    scores = (x - basis.mean) @ basis.components
    return ScoreCube(values=scores.reshape(cube.rows, cube.cols, basis.k), method=basis.method)


def reconstruct(scores: ScoreCube, basis: LinearBasis) -> SpectralCube:
    """Back-project scores: mean + W scores (exact only for full-rank PCA)."""
    if scores.k != basis.k:
        raise ConfigError("score depth does not match basis")
    s = scores.values.reshape(scores.rows * scores.cols, scores.k)
    x = s @ basis.components.T + basis.mean
    return SpectralCube(values=x.reshape(scores.rows, scores.cols, basis.d))


def eigenvalue_curve(basis: LinearBasis):
    """Cumulative normalized eigenvalues: cumsum(ev) / sum(ev).

    Returns ``(curve, partial)``; partial is true when the basis holds fewer
    than d components, in which case the curve only covers the retained part
    of the spectrum (its last entry is still forced to 1).
    """
    ev = basis.eigenvalues
    total = ev.sum()
    if total <= 0:
        raise NumericalError("eigenvalue sum is not positive")
    return np.cumsum(ev) / total, basis.k < basis.d


def signal_fraction(basis: LinearBasis) -> np.ndarray:
    """Per-component signal fraction 1 - 1/lambda for an MNF basis.

    MNF eigenvalues are total/noise variance ratios in whitened units, so the
    fraction of variance attributable to signal is 1 - 1/lambda, clamped to
    [0, 1].
    """
    if basis.method != "mnf":
        raise ConfigError("signal fractions are defined only for MNF bases")
    ev = basis.eigenvalues
    if np.any(ev <= 0):
        raise NumericalError("signal fractions require strictly positive eigenvalues")
    return np.clip(1.0 - 1.0 / ev, 0.0, 1.0)


def save_basis(basis: LinearBasis, path) -> None:
    """Serialize as JSON header + binary payload (mean, then W column-major)."""
    base = Path(path)
    if base.suffix in (".json", ".bin"):
        base = base.with_suffix("")
    header = {
        "kind": "linear-basis",
        "method": basis.method,
        "d": basis.d,
        "k": basis.k,
        "eigenvalues": [float(v) for v in basis.eigenvalues],
        "noise_ridge": float(basis.noise_ridge),
        "sign_convention": basis.sign_convention,
        "dtype": "f64",
        "order": "little",
    }
    base.parent.mkdir(parents=True, exist_ok=True)
    payload = np.concatenate(
        [basis.mean, np.asfortranarray(basis.components).ravel(order="F")]
    )
    base.with_suffix(".bin").write_bytes(np.ascontiguousarray(payload, dtype="<f8").tobytes())
    base.with_suffix(".json").write_text(
        json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_basis(path) -> LinearBasis:
    base = Path(path)
    if base.suffix in (".json", ".bin"):
        base = base.with_suffix("")
    hpath, bpath = base.with_suffix(".json"), base.with_suffix(".bin")
    if not hpath.exists() or not bpath.exists():
        raise DataFormatError(f"missing basis files {base}.json/.bin")
    try:
        header = json.loads(hpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"malformed basis header {hpath}: {exc}") from exc
    if header.get("kind") != "linear-basis":
        raise DataFormatError(f"{hpath} is not a linear-basis header")
    d, k = int(header["d"]), int(header["k"])
    payload = np.frombuffer(bpath.read_bytes(), dtype="<f8")
    if payload.size != d + d * k:
        raise DataFormatError(f"{bpath}: payload size {payload.size} != d + d*k = {d + d * k}")
    mean = payload[:d].copy()
    w = payload[d:].reshape(d, k, order="F").copy()
    basis = LinearBasis(
        method=str(header["method"]),
        mean=mean,
        components=w,
        eigenvalues=np.asarray(header["eigenvalues"], dtype=np.float64),
        noise_ridge=float(header.get("noise_ridge", 0.0)),
        sign_convention=str(header.get("sign_convention", SIGN_CONVENTION)),
    )
    if basis.method == "pca":
        gram = w.T @ w
        if np.abs(gram - np.eye(k)).max() > 1e-8:
            raise DataFormatError(f"{base}: PCA components not orthonormal on load")
    return basis


def export_component_images(scores: ScoreCube, indices, out_dir) -> list:
    """Write one 16-bit PGM per requested component plus a scaling sidecar.

    Each image is min-max scaled to the full 16-bit range; a constant map is
    rendered mid-gray and flagged degenerate in the sidecar.
    """
    indices = list(indices)
    if not indices:
        raise ConfigError("no component indices given")
    if max(indices) >= scores.k or min(indices) < 0:
        raise ConfigError(f"component index out of range 0..{scores.k - 1}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sidecar = {}
    written = []
    for idx in indices:
        band = scores.values[:, :, idx]
        lo, hi = float(band.min()), float(band.max())
        degenerate = hi - lo <= 0.0
        if degenerate:
            pixels = np.full(band.shape, 32768, dtype=np.uint16)
        else:
            pixels = np.round((band - lo) / (hi - lo) * 65535.0).astype(np.uint16)
        name = f"component_{idx:03d}.pgm"
        header = f"P5\n{band.shape[1]} {band.shape[0]}\n65535\n".encode("ascii")
        # PGM 16-bit samples are big-endian
        (out / name).write_bytes(header + pixels.astype(">u2").tobytes())
        sidecar[name] = {
            "component": idx,
            "min": lo,
            "max": hi,
            "degenerate_range": degenerate,
        }
        written.append(out / name)
    (out / "scaling.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return written
