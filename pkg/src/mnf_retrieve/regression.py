"""Multi-output linear least squares with an unpenalized intercept."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigError, DataFormatError, NumericalError
from .features import DesignMatrix

__all__ = ["RetrievalModel", "fit_linear", "predict", "save_model", "load_model"]


@dataclass(frozen=True)
class RetrievalModel:
    """Affine map: Y_hat = X @ weights + intercept."""

    intercept: np.ndarray  # (o,)
    weights: np.ndarray  # (p, o)
    ridge: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.intercept.ndim != 1 or self.weights.ndim != 2:
            raise ConfigError("intercept must be (o,), weights (p, o)")
        if self.weights.shape[1] != self.intercept.shape[0]:
            raise ConfigError("weights and intercept disagree on output count")
        if not (np.isfinite(self.intercept).all() and np.isfinite(self.weights).all()):
            raise NumericalError("model has non-finite coefficients")

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[1]


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, DesignMatrix):
        return x.matrix
    return np.asarray(x, dtype=np.float64)


def fit_linear(x, y, ridge: float = 0.0, metadata: dict | None = None) -> RetrievalModel:
    """Minimize ||X B + 1 a^T - Y||_F^2 + ridge ||B||_F^2 (a unpenalized).

    With ridge 0 the fit goes through an SVD least-squares solve and a
    rank-deficient design raises, demanding ridge; with ridge > 0 the
    column-centered normal equations are solved directly.
    """
    xm = _as_matrix(x)
    ym = np.asarray(y, dtype=np.float64)
    if ym.ndim == 1:
        ym = ym[:, None]
    if xm.shape[0] != ym.shape[0]:
        raise ConfigError(f"X has {xm.shape[0]} rows but Y has {ym.shape[0]}")
    if ridge < 0:
        raise ConfigError("ridge must be non-negative")
    n, p = xm.shape
    x_mean = xm.mean(axis=0)
    y_mean = ym.mean(axis=0)
    xc = xm - x_mean
    yc = ym - y_mean
    if ridge == 0.0:
        beta, _, rank, _ = np.linalg.lstsq(xc, yc, rcond=None)
        if rank < p:
            raise NumericalError(
                f"design matrix is rank-deficient ({rank} < {p}); refit with ridge > 0"
            )
    else:
        gram = xc.T @ xc + ridge * np.eye(p)
        try:
            beta = cho_solve(cho_factor(gram, lower=True), xc.T @ yc)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise NumericalError("normal equations not positive definite") from exc
    intercept = y_mean - x_mean @ beta
    return RetrievalModel(
        intercept=intercept, weights=beta, ridge=ridge, metadata=dict(metadata or {})
    )


def predict(model: RetrievalModel, x) -> np.ndarray:
    xm = _as_matrix(x)
    if xm.shape[1] != model.n_features:
        raise ConfigError(
            f"X has {xm.shape[1]} columns but the model expects {model.n_features}"
        )
    return xm @ model.weights + model.intercept


def save_model(model: RetrievalModel, path) -> None:
    """JSON header + binary payload (intercept, then weights column-major)."""
    base = Path(path)
    if base.suffix in (".json", ".bin"):
        base = base.with_suffix("")
    header = {
        "kind": "retrieval-model",
        "p": model.n_features,
        "o": model.n_outputs,
        "ridge": float(model.ridge),
        "metadata": model.metadata,
        "dtype": "f64",
        "order": "little",
    }
    base.parent.mkdir(parents=True, exist_ok=True)
    payload = np.concatenate(
        [model.intercept, np.asfortranarray(model.weights).ravel(order="F")]
    )
    base.with_suffix(".bin").write_bytes(np.ascontiguousarray(payload, dtype="<f8").tobytes())
    base.with_suffix(".json").write_text(
        json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(path) -> RetrievalModel:
    base = Path(path)
    if base.suffix in (".json", ".bin"):
        base = base.with_suffix("")
    hpath, bpath = base.with_suffix(".json"), base.with_suffix(".bin")
    if not hpath.exists() or not bpath.exists():
        raise DataFormatError(f"missing model files {base}.json/.bin")
    try:
        header = json.loads(hpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"malformed model header {hpath}: {exc}") from exc
    if header.get("kind") != "retrieval-model":
        raise DataFormatError(f"{hpath} is not a retrieval-model header")
    p, o = int(header["p"]), int(header["o"])
    payload = np.frombuffer(bpath.read_bytes(), dtype="<f8")
    if payload.size != o + p * o:
        raise DataFormatError(f"{bpath}: payload size {payload.size} != o + p*o = {o + p * o}")
    return RetrievalModel(
        intercept=payload[:o].copy(),
        weights=payload[o:].reshape(p, o, order="F").copy(),
        ridge=float(header.get("ridge", 0.0)),
        metadata=dict(header.get("metadata", {})),
    )
