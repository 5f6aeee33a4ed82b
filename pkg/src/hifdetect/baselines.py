"""Comparison detectors sharing the score-then-threshold interface.

Every model exposes ``errors(V, C)`` returning one raw error per window
and carries ``epsilon_bar``, the mean of those errors on its training
set.  The confidence score is always ``errors / epsilon_bar``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import checkpoint, picae
from .ellipse import EllipseParams, design_matrix, fit_beta, residual
from .errors import ParameterError, RankError, ShapeError

#: Fraction of the singular-value sum kept by the PCA baseline.
PCA_TAU = 0.99


def _windows(V) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[None]
    if V.ndim != 2:
        raise ShapeError(f"expected (N, T) windows, got shape {V.shape}")
    return V


def select_rank(singular_values, tau: float = PCA_TAU) -> int:
    """Smallest r whose leading singular values reach ``tau`` of the total."""
    s = np.asarray(singular_values, dtype=np.float64)
    total = s.sum()
    if total <= 0:
        raise RankError("all singular values are zero")
    ratio = np.cumsum(s) / total
    return int(np.searchsorted(ratio, tau - 1e-12) + 1)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    directions: np.ndarray  # T x r, orthonormal columns
    singular_values: np.ndarray
    epsilon_bar: float

    @property
    def r(self) -> int:
        return self.directions.shape[1]

    @property
    def T(self) -> int:
        return self.mean.shape[0]

    def reconstruct(self, V) -> np.ndarray:
        X = _windows(V) - self.mean
        if X.shape[1] != self.T:
            raise ShapeError(f"expected windows of length {self.T}, got {X.shape[1]}")
        return (X @ self.directions) @ self.directions.T + self.mean

    def errors(self, V, C=None) -> np.ndarray:
        V = _windows(V)
        return np.sum((V - self.reconstruct(V)) ** 2, axis=1)

    def score(self, v, c=None) -> np.ndarray:
        return self.errors(v) / self.epsilon_bar


def pca_fit(V, tau: float = PCA_TAU, rank: int | None = None) -> PcaModel:
    """Truncated-SVD subspace of the training voltages.

    ``rank`` overrides the ``tau`` rule (used to study error versus r).
    """
    V = _windows(V)
    if V.shape[0] < 2:
        raise RankError("PCA needs at least two windows")
    mean = V.mean(axis=0)
    X = V - mean
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    if s[0] <= 1e-12 * max(1.0, np.abs(V).max()):
        raise RankError("training windows are all identical")
    r = select_rank(s, tau) if rank is None else int(rank)
    if not 1 <= r <= len(s):
        raise ParameterError(f"rank must be in [1, {len(s)}], got {r}")
    D = vt[:r].T.copy()
    resid = X - (X @ D) @ D.T
    eps = float(np.mean(np.sum(resid**2, axis=1)))
    return PcaModel(mean, D, s, max(eps, np.finfo(float).tiny))


@dataclass(frozen=True)
class ErModel:
    beta: EllipseParams
    epsilon_bar: float

    def errors(self, V, C) -> np.ndarray:
        V, C = _windows(V), _windows(C)
        if V.shape != C.shape:
            raise ShapeError("voltage and current windows differ in shape")
        return np.array([residual(design_matrix(v, c), self.beta) for v, c in zip(V, C)])

    def score(self, v, c) -> np.ndarray:
        return self.errors(v, c) / self.epsilon_bar


def er_fit(V, C) -> ErModel:
    """Pooled conic fit; the mean per-window residual is the reference error."""
    V, C = _windows(V), _windows(C)
    if V.shape != C.shape:
        raise ShapeError("voltage and current windows differ in shape")
    beta = fit_beta(design_matrix(V.ravel(), C.ravel()))
    model = ErModel(beta, 1.0)
    eps = float(np.mean(model.errors(V, C)))
    return ErModel(beta, max(eps, np.finfo(float).tiny))


def er_score(model: ErModel, v, c) -> np.ndarray:
    return model.score(v, c)


def pca_score(model: PcaModel, v) -> np.ndarray:
    return model.score(v)


@dataclass(frozen=True)
class CaeScorer:
    """A trained CAE paired with its training reference error."""

    model: picae.CaeModel
    epsilon_bar: float

    @property
    def T(self) -> int:
        return self.model.T

    def errors(self, V, C=None) -> np.ndarray:
        return picae.reconstruction_errors(self.model, _windows(V))

    def score(self, v, c=None) -> np.ndarray:
        return self.errors(v) / self.epsilon_bar


def ae_train(V, C, config: picae.TrainConfig | None = None, **kwargs) -> tuple:
    """Plain autoencoder: the CAE trained without the ellipse term."""
    config = replace(config or picae.TrainConfig(), lambda_r=0.0)
    return picae.train(V, C, config, **kwargs)


def ae_score(model: picae.CaeModel, epsilon_bar: float, v) -> np.ndarray:
    return CaeScorer(model, epsilon_bar).score(v)


def save_baseline(model, path, meta: dict | None = None):
    header = dict(meta or {})
    if isinstance(model, PcaModel):
        header.update(kind="pca", epsilon_bar=model.epsilon_bar)
        arrays = [model.mean, model.directions, model.singular_values]
    elif isinstance(model, ErModel):
        header.update(kind="er", epsilon_bar=model.epsilon_bar)
        arrays = [model.beta.beta]
    else:
        raise ParameterError(f"not a baseline model: {type(model).__name__}")
    return checkpoint.write_envelope(path, header, arrays)


def load_baseline(path) -> tuple:
    header, arrays = checkpoint.read_envelope(path)
    kind = header.get("kind")
    if kind == "pca":
        return PcaModel(arrays[0], arrays[1], arrays[2], header["epsilon_bar"]), header
    if kind == "er":
        return ErModel(EllipseParams(arrays[0]), header["epsilon_bar"]), header
    raise ParameterError(f"{path} holds a '{kind}' checkpoint, not a baseline")
