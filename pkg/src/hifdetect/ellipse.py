"""Rotated-ellipse voltage-current characteristic.

A linear circuit driven at one frequency traces a closed ellipse in the
(v, c) plane.  The curve is written as the conic

    a v^2 + b v c + c c^2 + d v + e c + 1 = 0

so the coefficient vector ``beta = [a, b, c, d, e]`` is fixed by the
"+1" constant term.  Fitting it is a linear least-squares problem in the
design matrix ``Z = [v*v, v*c, c*c, v, c]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, ShapeError, SingularFitError
from .feedersim import Phasor

#: Largest condition number accepted for the scaled normal equations.
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class EllipseParams:
    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        if beta.shape != (5,):
            raise ShapeError(f"beta must have 5 entries, got {beta.shape}")
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite")
        if not np.any(beta[:3]):
            raise DegeneracyError("quadratic coefficients a, b, c are all zero")
        object.__setattr__(self, "beta", beta)

    @property
    def discriminant(self) -> float:
        a, b, c = self.beta[:3]
        return float(b * b - 4 * a * c)

    @property
    def is_real_ellipse(self) -> bool:
        """True when the conic is a non-empty bounded ellipse."""
        a, b, c, d, e = self.beta
        if self.discriminant >= 0:
            return False
        centre = np.linalg.solve([[2 * a, b], [b, 2 * c]], [-d, -e])
        value_at_centre = 1.0 + 0.5 * (d * centre[0] + e * centre[1])
        return bool(a * value_at_centre < 0)

    def phase(self) -> float:
        return phase_from_beta(self)

    def to_json(self) -> str:
        return json.dumps({"beta": [float(x) for x in self.beta]})

    @classmethod
    def from_json(cls, text: str) -> "EllipseParams":
        return cls(np.array(json.loads(text)["beta"], dtype=np.float64))


def _as_beta(beta) -> np.ndarray:
    if isinstance(beta, EllipseParams):
        return beta.beta
    return np.asarray(beta, dtype=np.float64)


def design_matrix(v, c) -> np.ndarray:
    """Stack ``[v*v, v*c, c*c, v, c]`` column-wise (T x 5).

    No centring or rescaling happens here; callers that need conditioning
    go through :func:`fit_beta`.
    """
    v = np.asarray(v, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if v.ndim != 1 or v.shape != c.shape:
        raise ShapeError(f"v and c must be 1-D of equal length, got {v.shape} and {c.shape}")
    return np.column_stack([v * v, v * c, c * c, v, c])


def _column_scales(Z: np.ndarray) -> np.ndarray:
    sv = np.max(np.abs(Z[:, 3]))
    sc = np.max(np.abs(Z[:, 4]))
    if sv == 0 or sc == 0:
        raise SingularFitError("a channel is identically zero")
    return np.array([sv * sv, sv * sc, sc * sc, sv, sc])


def fit_beta(Z) -> EllipseParams:
    """Least-squares conic coefficients minimising ``||Z beta + 1||^2``.

    Columns are scaled by the channel max-abs before solving and the
    solution is mapped back to the caller's units.  Raises
    :class:`SingularFitError` when the scaled problem is rank deficient
    (for instance a straight-line trajectory or a constant channel).
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != 5:
        raise ShapeError(f"design matrix must be T x 5, got {Z.shape}")
    if Z.shape[0] < 5:
        raise ShapeError(f"need at least 5 rows to fit, got {Z.shape[0]}")
    scales = _column_scales(Z)
    Zs = Z / scales
    sv = np.linalg.svd(Zs, compute_uv=False)
    # cond(Zs^T Zs) = cond(Zs)^2
    if sv[-1] == 0 or (sv[0] / sv[-1]) ** 2 >= MAX_CONDITION:
        raise SingularFitError("design matrix is numerically rank deficient")
    beta_scaled, *_ = np.linalg.lstsq(Zs, -np.ones(Z.shape[0]), rcond=None)
    beta = beta_scaled / scales
    try:
        return EllipseParams(beta)
    except DegeneracyError as exc:
        raise SingularFitError(str(exc)) from exc


def beta_from_phasor(phasor: Phasor) -> EllipseParams:
    """Conic coefficients of the ellipse traced by a steady-state phasor pair.

    For ``v = V0 cos(wt)`` and ``c = C0 cos(wt - phi)`` the trajectory is
    ``(v/V0)^2 - 2 cos(phi) (v/V0)(c/C0) + (c/C0)^2 = sin(phi)^2``, which
    is the expansion of the rotated-ellipse parametrisation with
    half-angle axes ``2 V0 cos(phi/2)`` etc.
    """
    V0, C0, phi = phasor.V0, phasor.C0, phasor.phi
    s2 = np.sin(phi) ** 2
    if s2 < 1e-24:
        raise DegeneracyError(f"phase {phi} collapses the ellipse to a line")
    a = -1.0 / (V0 * V0 * s2)
    b = 2.0 * np.cos(phi) / (V0 * C0 * s2)
    c = -1.0 / (C0 * C0 * s2)
    return EllipseParams(np.array([a, b, c, 0.0, 0.0]))


def phase_from_beta(beta) -> float:
    """Recover the voltage-current phase lag from the quadratic part.

    Invariant under per-channel scaling and shifting of the data.  When the
    origin lies outside the ellipse the "+1" normalisation flips the sign
    of the whole conic, which is undone through the sign of ``a``.
    """
    a, b, c = _as_beta(beta)[:3]
    if a * c <= 0:
        raise DegeneracyError("quadratic part is not elliptic")
    ratio = -np.sign(a) * b / (2.0 * np.sqrt(a * c))
    return float(np.arccos(np.clip(ratio, -1.0, 1.0)))


def conic_values(Z, beta) -> np.ndarray:
    """Row-wise algebraic distances ``Z beta + 1``."""
    return np.asarray(Z, dtype=np.float64) @ _as_beta(beta) + 1.0


def residual(Z, beta) -> float:
    """Sum of squared algebraic distances ``||Z beta + 1||^2``."""
    Z = np.asarray(Z, dtype=np.float64)
    b = _as_beta(beta)
    if Z.ndim != 2 or Z.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot apply beta of shape {b.shape} to Z of shape {Z.shape}")
    r = Z @ b + 1.0
    return float(r @ r)
