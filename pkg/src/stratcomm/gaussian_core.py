"""Exact second-order algebra for zero-mean jointly Gaussian variables.

Every distortion, rate and decoder coefficient reported elsewhere in the
package is ultimately computed here, from an explicit covariance matrix, so
this module doubles as the reference oracle for the closed forms.

Variables are addressed by index. The model covariance uses the fixed order
``0 = X`` (source), ``1 = theta`` (transmitter private information) and
``2 = W`` (receiver side information, when present). Independent noise terms
(test-channel noise ``S``, channel noise ``N``) are appended with
:func:`augment`.

.. note::

   :class:`ModelParams` stores second moments *normalised by* ``sigma_x2``,
   not correlation coefficients. ``rho_xtheta = cov(X, theta) / var(X)``, so
   the actual correlation is ``rho_xtheta / sqrt(r_theta)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegeneratePrivateInfo,
    DimensionMismatch,
    DomainError,
    InternalInconsistency,
    NonpositiveVariance,
    NotPositiveDefinite,
    OverlappingSets,
    SingularConditioningBlock,
)

X, THETA, W = 0, 1, 2

# Cholesky pivots below this fraction of the largest diagonal entry count as
# singular. Near-singular input is rejected, never regularised.
PIVOT_RTOL = 1e-12

_SI_KEYS = ("rho_xw", "rho_thetaw", "r_w")
_ALL_KEYS = ("sigma_x2", "rho_xtheta", "r_theta") + _SI_KEYS


@dataclass(frozen=True)
class ModelParams:
    """Normalised joint second-order statistics of ``(X, theta[, W])``.

    The covariance is ``sigma_x2 * [[1, rho_xtheta, rho_xw],
    [rho_xtheta, r_theta, rho_thetaw], [rho_xw, rho_thetaw, r_w]]``. The three
    side-information fields are all set or all ``None``.
    """

    sigma_x2: float
    rho_xtheta: float
    r_theta: float
    rho_xw: float | None = None
    rho_thetaw: float | None = None
    r_w: float | None = None

    def __post_init__(self):
        present = [getattr(self, k) is not None for k in _SI_KEYS]
        if any(present) and not all(present):
            raise DomainError("rho_xw, rho_thetaw and r_w must be given together")

    @property
    def has_si(self) -> bool:
        return self.r_w is not None

    def without_si(self) -> "ModelParams":
        return ModelParams(self.sigma_x2, self.rho_xtheta, self.r_theta)

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        return ModelParams(**d)

    def cov(self) -> np.ndarray:
        return validate_model(self)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelParams":
        unknown = set(d) - set(_ALL_KEYS)
        if unknown:
            raise DomainError(f"unknown model keys: {sorted(unknown)}")
        missing = {"sigma_x2", "rho_xtheta", "r_theta"} - set(d)
        if missing:
            raise DomainError(f"missing model keys: {sorted(missing)}")
        return cls(**{k: float(v) for k, v in d.items() if v is not None})


@dataclass(frozen=True)
class DistortionPair:
    """Transmitter cost ``d_e = E(X + theta - Xhat)^2`` and receiver cost
    ``d_d = E(X - Xhat)^2``."""

    d_e: float
    d_d: float

    def scaled(self, k: float) -> "DistortionPair":
        return DistortionPair(self.d_e * k, self.d_d * k)

    def to_dict(self) -> dict:
        return {"d_e": self.d_e, "d_d": self.d_d}


def _finite(name, value):
    if value is None or not math.isfinite(value):
        raise DomainError(f"{name} must be a finite number, got {value!r}")


def checked_cholesky(m: np.ndarray, exc=NotPositiveDefinite, what="matrix") -> np.ndarray:
    """Lower Cholesky factor of ``m``; raises ``exc`` unless ``m`` is safely PD."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return m.reshape(0, 0)
    try:
        low = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise exc(f"{what} is not positive definite") from None
    pivots = np.diag(low) ** 2
    scale = max(float(np.max(np.diag(m))), 0.0)
    if not np.all(np.isfinite(pivots)) or pivots.min() <= PIVOT_RTOL * scale:
        raise exc(f"{what} is numerically singular (min pivot {pivots.min():.3g})")
    return low


def validate_model(params: ModelParams) -> np.ndarray:
    """Check ``params`` and return its covariance matrix in source units.

    Returns the 2x2 matrix of ``(X, theta)`` or, with side information, the
    3x3 matrix of ``(X, theta, W)``.
    """
    p = params
    for name in ("sigma_x2", "rho_xtheta", "r_theta"):
        _finite(name, getattr(p, name))
    if p.sigma_x2 <= 0:
        raise NonpositiveVariance(f"sigma_x2 must be positive, got {p.sigma_x2}")
    if p.r_theta <= 0:
        raise NonpositiveVariance(f"r_theta must be positive, got {p.r_theta}")
    if p.r_theta <= p.rho_xtheta**2:
        raise DegeneratePrivateInfo(
            f"need r_theta > rho_xtheta**2, got r_theta={p.r_theta}, "
            f"rho_xtheta**2={p.rho_xtheta**2}"
        )
    if p.has_si:
        for name in _SI_KEYS:
            _finite(name, getattr(p, name))
        if p.r_w <= 0:
            raise NonpositiveVariance(f"r_w must be positive, got {p.r_w}")
        norm = np.array(
            [
                [1.0, p.rho_xtheta, p.rho_xw],
                [p.rho_xtheta, p.r_theta, p.rho_thetaw],
                [p.rho_xw, p.rho_thetaw, p.r_w],
            ]
        )
    else:
        norm = np.array([[1.0, p.rho_xtheta], [p.rho_xtheta, p.r_theta]])
    cov = p.sigma_x2 * norm
    checked_cholesky(cov, what="model covariance")
    return cov


def _as_cov(cov) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DimensionMismatch(f"covariance must be square, got shape {cov.shape}")
    return cov


def _indices(idx: Iterable[int], n: int) -> list[int]:
    out = [int(i) for i in idx]
    for i in out:
        if not 0 <= i < n:
            raise DimensionMismatch(f"index {i} out of range for dimension {n}")
    if len(set(out)) != len(out):
        raise DomainError(f"repeated index in {out}")
    return out


def augment(cov, *noise_variances: float) -> np.ndarray:
    """Append independent zero-mean variables with the given variances."""
    cov = _as_cov(cov)
    n, k = cov.shape[0], len(noise_variances)
    out = np.zeros((n + k, n + k))
    out[:n, :n] = cov
    for j, v in enumerate(noise_variances):
        if not v >= 0:
            raise NonpositiveVariance(f"noise variance must be >= 0, got {v}")
        out[n + j, n + j] = v
    return out


def conditional(cov, target: int, given: Sequence[int]) -> tuple[np.ndarray, float]:
    """MMSE coefficients and residual variance of one variable given others.

    ``E[target | given] = coef @ given`` and the residual variance is the
    Schur complement ``var(target) - coef @ cov[given, target]``.
    """
    cov = _as_cov(cov)
    n = cov.shape[0]
    (t,) = _indices([target], n)
    g = _indices(given, n)
    var_t = float(cov[t, t])
    if not g:
        return np.zeros(0), var_t
    if t in g:
        return np.array([1.0 if i == t else 0.0 for i in g]), 0.0
    block = cov[np.ix_(g, g)]
    cross = cov[g, t]
    low = checked_cholesky(block, SingularConditioningBlock, "conditioning block")
    coef = np.linalg.solve(low.T, np.linalg.solve(low, cross))
    resid = var_t - float(coef @ cross)
    if resid < 0:
        if resid < -PIVOT_RTOL * max(var_t, 1.0):
            raise InternalInconsistency(f"negative residual variance {resid:.3g}")
        resid = 0.0
    return coef, resid


def _logdet_pd(m: np.ndarray) -> float:
    low = checked_cholesky(m, SingularConditioningBlock, "covariance block")
    return 2.0 * float(np.sum(np.log(np.diag(low))))


def mutual_information(cov, set_a: Sequence[int], set_b: Sequence[int]) -> float:
    """``I(A; B)`` in bits between two disjoint groups of jointly Gaussian variables.

    Computed as half the log-ratio of ``det cov[A]`` to the determinant of the
    Schur complement of ``cov[B]``, which is exactly zero when the cross block
    is zero.
    """
    cov = _as_cov(cov)
    n = cov.shape[0]
    a, b = _indices(set_a, n), _indices(set_b, n)
    if set(a) & set(b):
        raise OverlappingSets(f"index sets overlap: {sorted(set(a) & set(b))}")
    if not a or not b:
        return 0.0
    caa = cov[np.ix_(a, a)]
    cab = cov[np.ix_(a, b)]
    cbb = cov[np.ix_(b, b)]
    low_b = checked_cholesky(cbb, SingularConditioningBlock, "covariance block")
    half = np.linalg.solve(low_b, cab.T)
    schur = caa - half.T @ half
    nats = 0.5 * (_logdet_pd(caa) - _logdet_pd(schur))
    return max(nats, 0.0) / math.log(2.0)


def lincomb_cov(cov, vectors: Sequence[Sequence[float]]) -> np.ndarray:
    """Covariance matrix of the linear combinations ``v_i @ Z``."""
    cov = _as_cov(cov)
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    if v.shape[1] != cov.shape[0]:
        raise DimensionMismatch(
            f"coefficient vectors have length {v.shape[1]}, covariance has dimension {cov.shape[0]}"
        )
    out = v @ cov @ v.T
    return 0.5 * (out + out.T)


def unit(n: int, *indices: int) -> np.ndarray:
    """Coefficient vector of length ``n`` selecting the sum of ``indices``."""
    v = np.zeros(n)
    for i in indices:
        v[i] += 1.0
    return v


def mmse_distortions(cov, observations: Sequence[Sequence[float]]) -> tuple[np.ndarray, DistortionPair]:
    """Follower best response to the given observations and both agents' costs.

    ``observations`` are coefficient vectors over the variables of ``cov``
    (which must have ``X`` at index 0 and ``theta`` at index 1). The decoder
    outputs ``Xhat = coef @ observations``, the conditional mean of ``X``.
    """
    cov = _as_cov(cov)
    n = cov.shape[0]
    obs = np.atleast_2d(np.asarray(observations, dtype=float)) if len(observations) else np.zeros((0, n))
    x_vec = unit(n, X)
    t_vec = unit(n, X, THETA)
    joint = lincomb_cov(cov, np.vstack([obs, x_vec]))
    k = obs.shape[0]
    coef, d_d = conditional(joint, k, range(k))
    err_t = t_vec - coef @ obs
    d_e = float(err_t @ cov @ err_t)
    return coef, DistortionPair(max(d_e, 0.0), d_d)
