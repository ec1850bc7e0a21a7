"""Single-letter linear schemes over the scalar additive Gaussian channel.

The transmitter sends ``U = gamma * (X + a*theta)`` at full power ``P_T``
through ``Y = U + N``; the receiver answers with the conditional mean of
``X`` given ``Y`` (and ``W`` if it has side information). This module
scores such schemes exactly and compares them with the strategic
rate-distortion oracle evaluated at channel capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .equilibrium import closed_form_alpha
from .errors import DomainError, FixedPointNotConfirmed, InternalInconsistency
from .gaussian_core import (
    THETA,
    W,
    X,
    DistortionPair,
    ModelParams,
    augment,
    lincomb_cov,
    mmse_distortions,
    unit,
    validate_model,
)
from .reports import AuditReport
from .solver import default_bracket, minimize_with_expansion
from .strategic_rd import beta_star

LN2 = math.log(2.0)
POWER_RTOL = 1e-12
OPTA_TOL = 1e-12
MATCH_TOL = 1e-9
FIXED_POINT_TOL = 1e-4
GAP_RTOL = 1e-6


@dataclass(frozen=True)
class ChannelParams:
    p_t: float
    sigma_n2: float

    def __post_init__(self):
        for name in ("p_t", "sigma_n2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")

    def to_dict(self) -> dict:
        return {"p_t": self.p_t, "sigma_n2": self.sigma_n2}

    @classmethod
    def from_dict(cls, d) -> "ChannelParams":
        unknown = set(d) - {"p_t", "sigma_n2"}
        if unknown:
            raise DomainError(f"unknown channel keys: {sorted(unknown)}")
        try:
            return cls(float(d["p_t"]), float(d["sigma_n2"]))
        except KeyError as e:
            raise DomainError(f"missing channel key {e}") from None


@dataclass(frozen=True)
class LinearStrategyPair:
    """``U = enc_scale * (X + enc_alpha*theta + enc_w*W)``, ``Xhat = dec_y*Y + dec_w*W``."""

    enc_scale: float
    enc_alpha: float
    enc_w: float
    dec_y: float
    dec_w: float

    def to_dict(self) -> dict:
        return {
            "enc_scale": self.enc_scale,
            "enc_alpha": self.enc_alpha,
            "enc_w": self.enc_w,
            "dec_y": self.dec_y,
            "dec_w": self.dec_w,
        }


@dataclass(frozen=True)
class LinearSolution:
    strategies: LinearStrategyPair
    distortions: DistortionPair
    # Same scheme with the leader fixed at the noiseless no-SI coefficient.
    literal_strategies: LinearStrategyPair | None = None
    literal_distortions: DistortionPair | None = None

    def to_dict(self) -> dict:
        out = {"strategies": self.strategies.to_dict(), "distortions": self.distortions.to_dict()}
        if self.literal_strategies is not None:
            out["literal_strategies"] = self.literal_strategies.to_dict()
            out["literal_distortions"] = self.literal_distortions.to_dict()
        return out


def capacity(channel: ChannelParams) -> float:
    """``0.5 * log2(1 + P_T / sigma_n2)`` bits per channel use."""
    return 0.5 * math.log1p(channel.p_t / channel.sigma_n2) / LN2


def power_scale(params: ModelParams, a: float, p_t: float, b: float = 0.0) -> float:
    """Gain that puts ``X + a theta + b W`` at power ``p_t``."""
    cov = validate_model(params)
    v = unit(cov.shape[0], X) + a * unit(cov.shape[0], THETA)
    if b:
        v = v + b * unit(cov.shape[0], W)
    var = float(lincomb_cov(cov, [v])[0, 0])
    if var <= 0:
        raise DomainError(f"encoder input has zero variance at a={a}")
    return math.sqrt(p_t / var)


def noisy_response(params: ModelParams, channel: ChannelParams, a: float, use_si: bool, cov=None):
    """Full-power linear encoder at coefficient ``a`` with the follower's best response.

    Returns ``(LinearStrategyPair, DistortionPair, transmit_power)``.
    """
    if use_si and not params.has_si:
        raise DomainError("use_si requires side-information fields")
    if cov is None:
        cov = validate_model(params)
    n = cov.shape[0]
    gamma = power_scale(params, a, channel.p_t)
    aug = augment(cov, channel.sigma_n2)
    u_vec = gamma * (unit(n + 1, X) + a * unit(n + 1, THETA))
    obs = [u_vec + unit(n + 1, n)]
    if use_si:
        obs.append(unit(n + 1, W))
    coef, dist = mmse_distortions(aug, obs)
    power = float(lincomb_cov(aug, [u_vec])[0, 0])
    if abs(power - channel.p_t) > POWER_RTOL * channel.p_t:
        raise InternalInconsistency(f"transmit power {power!r} != P_T {channel.p_t!r}")
    pair = LinearStrategyPair(gamma, a, 0.0, float(coef[0]), float(coef[1]) if use_si else 0.0)
    return pair, dist, power


def goblick_mappings(sigma_x2: float, channel: ChannelParams) -> LinearSolution:
    """Uncoded scaling encoder and linear decoder for a Gaussian source.

    Also checks that the distortion meets the rate-distortion bound at
    capacity, ``0.5 * log2(sigma_x2 / D) == C``.
    """
    if not sigma_x2 > 0:
        raise DomainError(f"sigma_x2 must be positive, got {sigma_x2}")
    p_t, n2 = channel.p_t, channel.sigma_n2
    gamma = math.sqrt(p_t / sigma_x2)
    dec = sigma_x2 * gamma / (p_t + n2)
    d_d = sigma_x2 * n2 / (p_t + n2)
    opta = 0.5 * math.log(sigma_x2 / d_d) / LN2
    if abs(opta - capacity(channel)) > OPTA_TOL * max(1.0, opta):
        raise InternalInconsistency(f"OPTA {opta!r} != capacity {capacity(channel)!r}")
    # No private information: the transmitter's cost is the receiver's.
    pair = LinearStrategyPair(gamma, 0.0, 0.0, dec, 0.0)
    return LinearSolution(pair, DistortionPair(d_d, d_d))


def strategic_uncoded_no_si(r: float, rho: float, sigma_x2: float, channel: ChannelParams) -> LinearSolution:
    """Uncoded strategic scheme without side information.

    The leader keeps the noiseless equilibrium coefficient for every channel
    and spends full power; the decoder is the conditional mean given ``Y``.
    """
    params = ModelParams(sigma_x2, rho, r)
    alpha = closed_form_alpha(r, rho)
    pair, dist, _ = noisy_response(params, channel, alpha, False)
    return LinearSolution(pair, dist)


def _linear_si_argmin(params: ModelParams, channel: ChannelParams, tol: float = 1e-9) -> float:
    cov = validate_model(params)
    bracket = default_bracket(closed_form_alpha(params.r_theta, params.rho_xtheta))
    res = minimize_with_expansion(
        lambda a: noisy_response(params, channel, a, True, cov)[1].d_e, bracket, tol=tol
    )
    return res.argmin


def linear_si_strategies(params: ModelParams, channel: ChannelParams, tol: float = 1e-9) -> LinearSolution:
    """Leader-optimal full-power linear encoder when the receiver also sees ``W``.

    The canonical answer is the numerical argmin over ``a``. The scheme with
    ``a`` fixed at the noiseless no-side-information coefficient is returned
    alongside as ``literal_*``.
    """
    if not params.has_si:
        raise DomainError("linear_si_strategies needs side-information fields")
    cov = validate_model(params)
    a_opt = _linear_si_argmin(params, channel, tol)
    pair, dist, _ = noisy_response(params, channel, a_opt, True, cov)
    alpha = closed_form_alpha(params.r_theta, params.rho_xtheta)
    lit_pair, lit_dist, _ = noisy_response(params, channel, alpha, True, cov)
    return LinearSolution(pair, dist, lit_pair, lit_dist)


@dataclass(frozen=True)
class MatchResult:
    holds: bool
    residual: float
    beta_at_capacity: float
    capacity: float
    i_yw: float

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "residual": self.residual,
            "beta_at_capacity": self.beta_at_capacity,
            "capacity": self.capacity,
            "i_yw": self.i_yw,
        }


def matching_condition(params: ModelParams, channel: ChannelParams) -> MatchResult:
    """Whether ``rho_xw + rho_thetaw * beta(C) == 0`` at the channel's capacity.

    When it holds, the test channel at capacity must leave ``Y`` and ``W``
    independent; a violation raises :class:`InternalInconsistency`.
    """
    if not params.has_si:
        raise DomainError("matching condition needs side-information fields")
    c = capacity(channel)
    pt = beta_star(params, c)
    residual = abs(params.rho_xw + params.rho_thetaw * pt.beta)
    holds = residual < MATCH_TOL
    if holds and pt.i_yw >= MATCH_TOL:
        raise InternalInconsistency(f"matching holds but I(Y;W) = {pt.i_yw!r} bits")
    return MatchResult(holds, residual, pt.beta, c, pt.i_yw)


def construct_matched_params(
    r_theta: float,
    rho_xtheta: float,
    rho_thetaw: float,
    r_w: float,
    sigma_x2: float,
    channel: ChannelParams,
) -> ModelParams:
    """Side-information statistics that satisfy the matching condition.

    Sets ``rho_xw = -rho_thetaw * alpha`` with ``alpha`` the noiseless
    closed-form coefficient, then confirms that the leader-optimal test
    channel at capacity uses ``beta = alpha`` and leaves ``Y`` independent
    of ``W``.

    Raises
    ------
    NotPositiveDefinite
        If the requested ``rho_thetaw`` and ``r_w`` admit no valid covariance.
    FixedPointNotConfirmed
        If the numerical check of the fixed point fails.
    """
    if not r_w > 0:
        raise DomainError(f"r_w must be positive, got {r_w}")
    alpha = closed_form_alpha(r_theta, rho_xtheta)
    params = ModelParams(sigma_x2, rho_xtheta, r_theta, -rho_thetaw * alpha, rho_thetaw, r_w)
    validate_model(params)
    pt = beta_star(params, capacity(channel))
    if abs(pt.beta - alpha) >= FIXED_POINT_TOL or pt.i_yw >= MATCH_TOL:
        raise FixedPointNotConfirmed(
            f"beta(C) = {pt.beta!r} vs alpha = {alpha!r}, I(Y;W) = {pt.i_yw!r} bits"
        )
    return params


def pd_threshold_rho_thetaw(r_theta: float, rho_xtheta: float, r_w: float) -> float:
    """Largest ``|rho_thetaw|`` for which the matched covariance stays positive definite.

    With ``rho_xw = -t*alpha`` the determinant of the normalised 3x3 matrix is
    ``(r - rho^2) r_w - t^2 (1 + 2 alpha rho + alpha^2 r)``; it vanishes at
    the returned ``t``.
    """
    alpha = closed_form_alpha(r_theta, rho_xtheta)
    q = 1.0 + 2.0 * alpha * rho_xtheta + alpha**2 * r_theta
    return math.sqrt((r_theta - rho_xtheta**2) * r_w / q)


def optimality_audit(params: ModelParams, channel: ChannelParams, rtol: float = GAP_RTOL) -> AuditReport:
    """Compare the best single-letter linear scheme with the R-D oracle at capacity.

    Both relative gaps below ``rtol`` means the uncoded scheme meets the
    outer bound; a mismatch in either distortion is reported as a gap.
    """
    if not params.has_si:
        raise DomainError("optimality audit needs side-information fields")
    lin = linear_si_strategies(params, channel)
    c = capacity(channel)
    rd = beta_star(params, c)
    gap_e = abs(lin.distortions.d_e - rd.distortions.d_e) / rd.distortions.d_e
    gap_d = abs(lin.distortions.d_d - rd.distortions.d_d) / rd.distortions.d_d
    details = {
        "capacity": c,
        "linear": lin.to_dict(),
        "rd_at_capacity": rd.to_dict(),
        "gap_d_e": gap_e,
        "gap_d_d": gap_d,
        # Signed: positive means the uncoded scheme costs the party more.
        "signed_gap_d_e": (lin.distortions.d_e - rd.distortions.d_e) / rd.distortions.d_e,
        "signed_gap_d_d": (lin.distortions.d_d - rd.distortions.d_d) / rd.distortions.d_d,
        "matching": matching_condition(params, channel).to_dict(),
    }
    worst = max(gap_e, gap_d)
    return AuditReport("optimality", worst < rtol, worst, rtol, details)

