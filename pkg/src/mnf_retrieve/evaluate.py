"""Retrieval scoring, method/k/window sweeps, and information diagnostics."""

from __future__ import annotations

import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cubes import profiles_to_matrix
from .decompose import fit_mnf, fit_pca, project, truncate_basis
from .errors import ConfigError, NumericalError, PipelineError
from .features import extract_neighborhood
from .noise import pooled_noise_covariance, pooled_signal_covariance
from .regression import fit_linear, predict

__all__ = [
    "rmse_profile",
    "mean_rmse",
    "gaussian_total_correlation",
    "total_correlation_excess",
    "SweepRow",
    "SweepResult",
    "run_sweep",
]

RESULTS_CSV_HEADER = "method,k,w,seed,split,mean_rmse,wall_ms"
PER_LEVEL_CSV_HEADER = "method,k,w,seed,level,pressure,rmse"


def rmse_profile(y_true, y_pred) -> np.ndarray:
    """Per-level root-mean-square error over samples."""
    yt = np.asarray(y_true, dtype=np.float64)
    yp = np.asarray(y_pred, dtype=np.float64)
    if yt.shape != yp.shape or yt.ndim != 2 or yt.shape[0] < 1:
        raise ConfigError(f"shape mismatch {yt.shape} vs {yp.shape}")
    return np.sqrt(np.mean((yp - yt) ** 2, axis=0))


def mean_rmse(per_level) -> float:
    per_level = np.asarray(per_level, dtype=np.float64)
    if per_level.size == 0:
        raise ConfigError("empty per-level RMSE vector")
    return float(per_level.mean())


def _standardize(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    if np.any(std == 0):
        raise NumericalError("constant column: joint covariance is singular")
    return (x - mean) / std


def _total_correlation(block: np.ndarray, shrinkage: float) -> float:
    joint = _standardize(block)
    n, m = joint.shape
    if n <= m:
        raise ConfigError(f"need more samples ({n}) than joint variables ({m})")
    r = (joint.T @ joint) / n
    if shrinkage > 0:
        r = (1.0 - shrinkage) * r + shrinkage * np.eye(m)
    sign, logdet = np.linalg.slogdet(r)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericalError(
            "singular joint correlation matrix; increase the shrinkage weight"
        )
    return max(-0.5 * logdet, 0.0)


def gaussian_total_correlation(scores, targets, shrinkage: float = 1e-6) -> float:
    """Gaussian proxy for the multiinformation of the joint block [scores, targets].

    T = -0.5 * log det R, where R is the sample correlation matrix of the
    standardized joint variables, shrunk toward the identity by `shrinkage`.
    Exact for Gaussian data; zero iff all variables are uncorrelated.
    """
    s = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    t = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if s.shape[0] != t.shape[0]:
        raise ConfigError("scores and targets need the same sample count")
    return _total_correlation(np.hstack([s, t]), shrinkage)


def total_correlation_excess(scores, targets, shrinkage: float = 1e-6) -> float:
    """T([scores, targets]) - T(scores): the target-linked share of the joint
    total correlation (a Gaussian stand-in for mutual information)."""
    joint = gaussian_total_correlation(scores, targets, shrinkage)
    s = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    inputs_only = _total_correlation(s, shrinkage) if s.shape[1] >= 2 else 0.0
    return joint - inputs_only


@dataclass(frozen=True)
class SweepRow:
    method: str
    k: int
    w: int
    seed: int
    split: str  # train | test
    mean_rmse: float
    per_level: np.ndarray
    wall_ms: float

    def sort_key(self):
        return (self.method, self.k, self.w, self.seed, self.split)


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    pressure_axis: np.ndarray | None = None
    failures: list = field(default_factory=list)  # [(method, k, w, seed, message)]

    def extend(self, other: "SweepResult") -> None:
        self.rows.extend(other.rows)
        self.failures.extend(other.failures)
        if self.pressure_axis is None:
            self.pressure_axis = other.pressure_axis

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=SweepRow.sort_key)

    def results_csv(self) -> str:
        buf = io.StringIO()
        buf.write(RESULTS_CSV_HEADER + "\n")
        for r in self.sorted_rows():
            buf.write(
                f"{r.method},{r.k},{r.w},{r.seed},{r.split},"
                f"{r.mean_rmse!r},{r.wall_ms!r}\n"
            )
        return buf.getvalue()

    def per_level_csv(self) -> str:
        if self.pressure_axis is None:
            raise ConfigError("sweep result has no pressure axis")
        buf = io.StringIO()
        buf.write(PER_LEVEL_CSV_HEADER + "\n")
        for r in self.sorted_rows():
            if r.split != "test":
                continue
            for level, (pressure, value) in enumerate(zip(self.pressure_axis, r.per_level)):
                buf.write(
                    f"{r.method},{r.k},{r.w},{r.seed},{level},"
                    f"{float(pressure)!r},{float(value)!r}\n"
                )
        return buf.getvalue()


def _evaluate_cell(basis_full, train_pairs, test_pairs, k, w, ridge, seed, timing):
    t0 = time.perf_counter()
    basis = truncate_basis(basis_full, k)

    def design_and_targets(pairs):
        xs, ys = [], []
        for spectral, profile in pairs:
            scores = project(spectral, basis)
            xs.append(extract_neighborhood(scores, w).matrix)
            ys.append(profiles_to_matrix(profile))
        return np.vstack(xs), np.vstack(ys)

    x_train, y_train = design_and_targets(train_pairs)
    model = fit_linear(x_train, y_train, ridge=ridge)
    rows = []
    for split, (x, y) in (
        ("train", (x_train, y_train)),
        ("test", design_and_targets(test_pairs)),
    ):
        per_level = rmse_profile(y, predict(model, x))
        wall = (time.perf_counter() - t0) * 1000.0 if timing else 0.0
        rows.append(
            SweepRow(basis_full.method, k, w, seed, split, mean_rmse(per_level), per_level, wall)
        )
    return rows


def run_sweep(
    train_pairs,
    test_pairs,
    methods=("pca", "mnf"),
    k_list=(5, 10, 20),
    w_list=(1, 3),
    ridge: float = 0.0,
    mnf_ridge: float = 1e-10,
    seed: int = 0,
    jobs: int = 1,
    timing: bool = True,
    skip_cells=(),
) -> SweepResult:
    """Fit each method once at max(k) on the training cubes, then evaluate every
    (k, w) cell by truncation.

    ``train_pairs`` / ``test_pairs`` are sequences of (SpectralCube,
    ProfileCube).  Transformations are computed on the training set only and
    applied to both splits.  Cells listed in ``skip_cells`` (as (method, k, w)
    triples) are not rerun; failures are recorded per cell rather than raised.
    Output ordering is fixed by (method, k, w, seed, split) regardless of
    ``jobs``.
    """
    train_pairs = list(train_pairs)
    test_pairs = list(test_pairs)
    if not train_pairs or not test_pairs:
        raise ConfigError("sweep needs at least one training and one test cube pair")
    methods = list(methods)
    k_list = sorted(set(int(k) for k in k_list))
    w_list = sorted(set(int(w) for w in w_list))
    for method in methods:
        if method not in ("pca", "mnf"):
            raise ConfigError(f"unknown method {method!r}")
    d = train_pairs[0][0].bands
    if max(k_list) > d:
        raise ConfigError(f"max k {max(k_list)} exceeds band count {d}")

    train_cubes = [pair[0] for pair in train_pairs]
    signal_cov = pooled_signal_covariance(train_cubes)
    result = SweepResult(pressure_axis=train_pairs[0][1].pressure_axis)

    bases = {}
    kmax = max(k_list)
    for method in methods:
        if method == "pca":
            bases[method] = fit_pca(signal_cov, kmax)
        else:
            noise_cov = pooled_noise_covariance(train_cubes)
            bases[method] = fit_mnf(signal_cov, noise_cov, kmax, ridge=mnf_ridge)

    skip = set(skip_cells)
    cells = [
        (method, k, w)
        for method in methods
        for k in k_list
        for w in w_list
        if (method, k, w) not in skip
    ]

    def run_cell(cell):
        method, k, w = cell
        try:
            return cell, _evaluate_cell(
                bases[method], train_pairs, test_pairs, k, w, ridge, seed, timing
            ), None
        except PipelineError as exc:
            return cell, None, f"{exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(cell) for cell in cells]

    for cell, rows, error in outcomes:
        if error is not None:
            result.failures.append((*cell, seed, error))
        else:
            result.rows.extend(rows)
    result.rows.sort(key=SweepRow.sort_key)
    return result
