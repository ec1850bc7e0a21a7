"""Noiseless Stackelberg equilibrium of the quadratic-Gaussian game.

The transmitter (leader) commits to ``Y = X + a*theta`` and the receiver
(follower) answers with the conditional mean of ``X`` given what it sees.
Without side information the equilibrium coefficient has a closed form;
with receiver side information ``W`` it is found numerically. Scaling ``Y``
is undone by the follower, so the X-coefficient is fixed to 1 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InternalInconsistency
from .gaussian_core import (
    THETA,
    W,
    X,
    DistortionPair,
    ModelParams,
    mmse_distortions,
    unit,
    validate_model,
)
from .reports import AuditReport
from .solver import default_bracket, minimize_with_expansion

CONSISTENCY_RTOL = 1e-9


@dataclass(frozen=True)
class EquilibriumReport:
    alpha: float
    decoder_y: float
    decoder_w: float
    distortions: DistortionPair
    a_value: float | None
    method: str

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "decoder_y": self.decoder_y,
            "decoder_w": self.decoder_w,
            "d_e": self.distortions.d_e,
            "d_d": self.distortions.d_d,
            "a_value": self.a_value,
            "method": self.method,
        }


def _close(a: float, b: float, rtol: float, scale: float = 0.0) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b), scale)


def closed_form_alpha(r: float, rho: float) -> float:
    """Leader's equilibrium coefficient ``(A - 1) / (2 (r + rho))``, ``A = sqrt(1 + 4 (r + rho))``."""
    s = r + rho
    if s == 0:
        raise DomainError("closed form needs r + rho != 0")
    a_val = math.sqrt(1.0 + 4.0 * s)
    return (a_val - 1.0) / (2.0 * s)


def closed_form_equilibrium(r: float, rho: float, sigma_x2: float = 1.0) -> EquilibriumReport:
    """Closed-form equilibrium without side information, checked against the oracle.

    Raises
    ------
    DomainError
        If ``r <= rho**2``, ``sigma_x2 <= 0`` or ``r + rho == 0``.
    InternalInconsistency
        If the printed distortions disagree with exact conditioning.
    """
    params = ModelParams(sigma_x2, rho, r)
    cov = validate_model(params)
    s = r + rho
    if s == 0:
        raise DomainError("closed form needs r + rho != 0")
    a_val = math.sqrt(1.0 + 4.0 * s)
    alpha = (a_val - 1.0) / (2.0 * s)
    kappa = (1.0 + alpha * rho) / (1.0 + alpha**2 * r + 2.0 * alpha * rho)
    d_e = sigma_x2 * (1.0 + (a_val - 3.0) * s / (a_val - 1.0))
    d_d = sigma_x2 * ((r - rho**2) * (a_val - 1.0) / (a_val * (2.0 * r + a_val * rho + rho)))

    coef, oracle = mmse_distortions(cov, [unit(2, X) + alpha * unit(2, THETA)])
    # The printed forms divide by A - 1 and by 2r + A rho + rho, both of which
    # vanish as r + rho -> 0; allow for the rounding that amplifies.
    eps = np.finfo(float).eps
    den = 2.0 * r + a_val * rho + rho
    floor_e = 8 * eps * sigma_x2 * (1.0 + abs((a_val - 3.0) * s) / (a_val - 1.0) ** 2)
    floor_d = 8 * eps * sigma_x2 * (r - rho**2) * (1.0 + abs(r) + abs(rho)) / (a_val * den**2)
    checks = {
        "kappa": (kappa, float(coef[0]), 0.0),
        "d_e": (d_e, oracle.d_e, floor_e),
        "d_d": (d_d, oracle.d_d, floor_d),
    }
    for name, (printed, exact, floor) in checks.items():
        if not _close(printed, exact, CONSISTENCY_RTOL, 1e-12 * sigma_x2) and abs(printed - exact) > floor:
            raise InternalInconsistency(f"{name}: closed form {printed!r} vs oracle {exact!r}")
    # Report the exact conditioning values: the printed forms lose all digits
    # as r + rho -> 0 and can even go negative there.
    return EquilibriumReport(alpha, kappa, 0.0, oracle, a_val, "closed_form")


def _encoder_vectors(n: int, a: float, b: float) -> np.ndarray:
    v = unit(n, X) + a * unit(n, THETA)
    if b:
        v = v + b * unit(n, W)
    return v


def best_response(params: ModelParams, a: float, use_si: bool, b: float = 0.0, cov=None):
    """Follower's conditional-mean decoder for ``Y = X + a theta + b W``.

    Returns ``(coef, DistortionPair)`` where ``coef`` holds the decoder's
    coefficient on ``Y`` and, with ``use_si``, on ``W``.
    """
    if (use_si or b) and not params.has_si:
        raise DomainError("side information requested but the model has no W")
    if cov is None:
        cov = validate_model(params)
    n = cov.shape[0]
    obs = [_encoder_vectors(n, a, b)]
    if use_si:
        obs.append(unit(n, W))
    return mmse_distortions(cov, obs)


def encoder_objective(params: ModelParams, a: float, use_si: bool = False) -> DistortionPair:
    """Both costs when the leader plays ``Y = X + a theta`` and the follower best-responds."""
    return best_response(params, a, use_si)[1]


def _reference_alpha(params: ModelParams) -> float:
    try:
        return closed_form_alpha(params.r_theta, params.rho_xtheta)
    except DomainError:
        return 1.0


_COMPLEX_STEP = 1e-20


def _leader_cost_complex(cov: np.ndarray, a: complex, b: float, use_si: bool) -> complex:
    """Transmitter cost in complex arithmetic, for complex-step derivatives."""
    n = cov.shape[0]
    y = unit(n, X) + a * unit(n, THETA) + b * (unit(n, W) if n > 2 else 0.0)
    obs = np.array([y, unit(n, W)] if use_si else [y], dtype=complex)
    coef = np.linalg.solve(obs @ cov @ obs.T, obs @ cov[:, X])
    err = unit(n, X, THETA) - coef @ obs
    return err @ cov @ err


def _leader_argmin(params: ModelParams, use_si: bool, b: float = 0.0, tol: float = 1e-9):
    cov = validate_model(params)
    bracket = default_bracket(_reference_alpha(params))

    def slope(a):
        return _leader_cost_complex(cov, complex(a, _COMPLEX_STEP), b, use_si).imag / _COMPLEX_STEP

    return minimize_with_expansion(
        lambda a: best_response(params, a, use_si, b, cov)[1].d_e, bracket, tol=tol, fprime=slope
    )


def solve_stackelberg(params: ModelParams, use_si: bool = False, tol: float = 1e-9) -> EquilibriumReport:
    """Numerical Stackelberg equilibrium over linear encoders ``Y = X + a theta``.

    The leader's coefficient minimises its own cost under the follower's best
    response; the decoder coefficients are that best response. Uniqueness is
    not certified: the argmin is global over the final search grid only.
    """
    if use_si and not params.has_si:
        raise DomainError("use_si requires side-information fields")
    res = _leader_argmin(params, use_si, tol=tol)
    coef, dist = best_response(params, res.argmin, use_si)
    a_val = None
    if not use_si and params.r_theta + params.rho_xtheta != 0:
        a_val = math.sqrt(1.0 + 4.0 * (params.r_theta + params.rho_xtheta))
    dec_w = float(coef[1]) if use_si else 0.0
    return EquilibriumReport(res.argmin, float(coef[0]), dec_w, dist, a_val, "numeric")


def _rel_dev(value: float, base: float) -> float:
    return abs(value - base) / max(abs(base), 1e-300)


def transmitter_si_audit(
    params: ModelParams,
    b_grid: Sequence[float] = (-3.0, -1.0, 1.0, 3.0),
    a_grid: Sequence[float] | None = None,
    tol: float = 1e-10,
    argmin_tol: float = 1e-6,
    solve: bool = True,
) -> AuditReport:
    """Check that letting the encoder mix in ``W`` changes nothing.

    For each ``b`` and each ``a`` the encoder ``Y = X + a theta + b W`` is
    scored with a decoder that conditions on ``(Y, W)`` and compared with
    ``b = 0``. With ``solve`` the leader's argmin is also recomputed for every
    ``b`` and compared with the ``b = 0`` argmin.
    """
    if not params.has_si:
        raise DomainError("transmitter SI audit needs side-information fields")
    cov = validate_model(params)
    if a_grid is None:
        a_grid = list(np.linspace(-3.0, 3.0, 24))
    worst = 0.0
    rows = []
    for a in a_grid:
        _, base = best_response(params, a, True, 0.0, cov)
        for b in b_grid:
            _, d = best_response(params, a, True, b, cov)
            dev = max(_rel_dev(d.d_e, base.d_e), _rel_dev(d.d_d, base.d_d))
            worst = max(worst, dev)
    passed = worst < tol
    details = {"b_grid": list(map(float, b_grid)), "n_a": len(a_grid), "distortion_tolerance": tol}
    if solve:
        a0 = _leader_argmin(params, True).argmin
        for b in b_grid:
            ab = _leader_argmin(params, True, b).argmin
            rows.append({"b": float(b), "alpha": ab, "deviation": abs(ab - a0)})
        argmin_dev = max((row["deviation"] for row in rows), default=0.0)
        details.update(alpha_b0=a0, argmins=rows, max_argmin_deviation=argmin_dev, argmin_tolerance=argmin_tol)
        passed = passed and argmin_dev < argmin_tol
    return AuditReport("tx-si", passed, worst, tol, details)
