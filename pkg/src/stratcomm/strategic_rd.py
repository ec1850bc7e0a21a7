"""Strategic rate-distortion curves for Gaussian test channels.

The encoder describes ``X + beta*theta`` through a Gaussian test channel
``Y = X + beta*theta + S``; the decoder forms the conditional mean of ``X``
given ``Y`` (and ``W`` when it has side information). The noise variance
``sigma_s2`` is pinned by the rate, and with side information the leader
re-optimises ``beta`` at every rate.

Canonical distortions always come from exact conditioning on the explicit
test channel. The printed closed forms for the same quantities are carried
alongside as ``*_paper`` fields and are never substituted for the oracle.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .equilibrium import closed_form_equilibrium, closed_form_alpha
from .errors import DomainError, InternalInconsistency
from .gaussian_core import (
    THETA,
    W,
    X,
    DistortionPair,
    ModelParams,
    augment,
    conditional,
    lincomb_cov,
    mmse_distortions,
    mutual_information,
    unit,
    validate_model,
)
from .reports import AuditReport
from .solver import minimize_with_expansion

LN2 = math.log(2.0)
BETA_BRACKET = (-10.0, 10.0)
RATE_RTOL = 1e-10

_COMPLEX_STEP = 1e-20


@dataclass(frozen=True)
class RDPoint:
    rate: float
    beta: float
    sigma_s2: float
    distortions: DistortionPair
    d_e_paper: float | None = None
    d_d_paper: float | None = None
    i_yw: float = 0.0

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "beta": self.beta,
            "sigma_s2": self.sigma_s2,
            "d_e": self.distortions.d_e,
            "d_d": self.distortions.d_d,
            "d_e_paper": self.d_e_paper,
            "d_d_paper": self.d_d_paper,
            "i_yw": self.i_yw,
        }


def _two_pow_2r_minus_1(rate: float) -> float:
    return math.expm1(2.0 * rate * LN2)


def _check_rate(rate: float, allow_zero: bool = True):
    if rate is None or math.isnan(rate) or rate < 0 or (rate == 0 and not allow_zero):
        raise DomainError(f"rate must be {'>=' if allow_zero else '>'} 0, got {rate!r}")


def printed_dd_no_si(r: float, rho: float, sigma_x2: float, rate: float) -> float:
    """Printed receiver-cost curve for the no-side-information case, verbatim."""
    a_val = math.sqrt(1.0 + 4.0 * (r + rho))
    t = 0.0 if math.isinf(rate) else 2.0 ** (-2.0 * rate)
    return sigma_x2 * t * (1.0 + (t - 1.0) * ((r - rho**2) * (a_val - 1.0) / (a_val * (2.0 * r + a_val * rho + rho))))


def printed_de_no_si(r: float, rho: float, sigma_x2: float, rate: float) -> float:
    """Printed transmitter-cost curve for the no-side-information case, verbatim."""
    a_val = math.sqrt(1.0 + 4.0 * (r + rho))
    t = 0.0 if math.isinf(rate) else 2.0 ** (-2.0 * rate)
    return sigma_x2 * (1.0 + 2.0 * rho + r - (1.0 - t) * (a_val * (r + rho) + rho) / (a_val - 1.0))


def printed_de_wz(params: ModelParams, beta: float, sigma_s2: float) -> float:
    """Printed transmitter cost for the Wyner-Ziv test channel, verbatim.

    Contains no side-information statistics at all.
    """
    p = params
    r, rho = p.r_theta, p.rho_xtheta
    q = beta**2 * r + 2.0 * beta * rho
    return p.sigma_x2 * (1.0 + 2.0 * rho + r - (1.0 + beta * rho) * q / (1.0 + q + sigma_s2 / p.sigma_x2))


def rd_point_no_si(r: float, rho: float, sigma_x2: float, rate: float) -> RDPoint:
    """Point on the strategic R-D curve without side information.

    ``beta`` is the noiseless equilibrium coefficient at every rate. ``rate``
    may be ``0`` (nothing conveyed) or ``math.inf`` (noiseless conditioning).
    """
    _check_rate(rate)
    params = ModelParams(sigma_x2, rho, r)
    cov = validate_model(params)
    alpha = closed_form_alpha(r, rho)
    q = 1.0 + alpha**2 * r + 2.0 * alpha * rho
    if rate == 0:
        sigma_s2 = math.inf
        dist = DistortionPair(sigma_x2 * (1.0 + 2.0 * rho + r), sigma_x2)
    else:
        sigma_s2 = 0.0 if math.isinf(rate) else sigma_x2 * q / _two_pow_2r_minus_1(rate)
        aug = augment(cov, sigma_s2)
        _, dist = mmse_distortions(aug, [unit(3, X) + alpha * unit(3, THETA) + unit(3, 2)])
    return RDPoint(
        rate,
        alpha,
        sigma_s2,
        dist,
        d_e_paper=printed_de_no_si(r, rho, sigma_x2, rate),
        d_d_paper=printed_dd_no_si(r, rho, sigma_x2, rate),
    )


def _require_si(params: ModelParams):
    if not params.has_si:
        raise DomainError("this operation needs side-information fields (rho_xw, rho_thetaw, r_w)")


def _wz_factor(params: ModelParams, beta):
    """``var(X + beta theta | W) / sigma_x2``. Works for complex ``beta``."""
    p = params
    return 1.0 + beta**2 * p.r_theta + 2.0 * beta * p.rho_xtheta - (p.rho_xw + beta * p.rho_thetaw) ** 2 / p.r_w


def _wz_system(params: ModelParams, beta: float, sigma_s2: float, cov=None):
    """Covariance of ``(X, theta, W, S)`` and the vector for ``Y = X + beta theta + S``."""
    if cov is None:
        cov = validate_model(params)
    aug = augment(cov, sigma_s2)
    y_vec = unit(4, X) + beta * unit(4, THETA) + unit(4, 3)
    return aug, y_vec


def wz_rate(params: ModelParams, beta: float, sigma_s2: float) -> float:
    """Wyner-Ziv rate in bits for ``Y = X + beta theta + S``, ``var(S) = sigma_s2``.

    Evaluates the closed form and checks it against ``I(X,theta;Y) - I(Y;W)``
    on the explicit covariance.
    """
    _require_si(params)
    if not sigma_s2 > 0:
        raise DomainError(f"sigma_s2 must be positive, got {sigma_s2}")
    cov = validate_model(params)
    if math.isinf(sigma_s2):
        return 0.0
    rate = 0.5 * math.log1p(params.sigma_x2 / sigma_s2 * _wz_factor(params, beta)) / LN2

    aug, y_vec = _wz_system(params, beta, sigma_s2, cov)
    joint = lincomb_cov(aug, [unit(4, X), unit(4, THETA), unit(4, W), y_vec])
    check = mutual_information(joint, [0, 1], [3]) - mutual_information(joint, [3], [2])
    if abs(rate - check) > RATE_RTOL * max(1.0, abs(rate)):
        raise InternalInconsistency(f"closed-form rate {rate!r} vs mutual-information rate {check!r}")
    return rate


def wz_sigma_s2(params: ModelParams, beta, rate: float):
    """Test-channel noise variance that makes ``wz_rate`` equal ``rate``.

    ``rate = math.inf`` gives 0. Accepts complex ``beta`` (used for
    complex-step derivatives), in which case no sign check is made.
    """
    _require_si(params)
    _check_rate(rate, allow_zero=False)
    factor = _wz_factor(params, beta)
    if not isinstance(factor, complex) and factor <= 0:
        raise DomainError(f"var(X + beta theta | W) must be positive, got {factor * params.sigma_x2}")
    if math.isinf(rate):
        return 0.0 * factor
    return params.sigma_x2 * factor / _two_pow_2r_minus_1(rate)


def _wz_oracle(params: ModelParams, beta: float, sigma_s2: float, cov=None):
    """Decoder coefficients, distortions and ``I(Y;W)`` for the Wyner-Ziv test channel."""
    if cov is None:
        cov = validate_model(params)
    if math.isinf(sigma_s2):
        coef_w, dist = mmse_distortions(cov, [unit(3, W)])
        return np.array([0.0, coef_w[0]]), dist, 0.0
    aug, y_vec = _wz_system(params, beta, sigma_s2, cov)
    coef, dist = mmse_distortions(aug, [y_vec, unit(4, W)])
    joint = lincomb_cov(aug, [y_vec, unit(4, W)])
    i_yw = mutual_information(joint, [0], [1])
    return coef, dist, i_yw


def wz_distortions(params: ModelParams, beta: float, sigma_s2: float) -> tuple[DistortionPair, float]:
    """Oracle distortions for the Wyner-Ziv test channel and the printed transmitter cost.

    ``sigma_s2 = math.inf`` means ``Y`` is useless and the decoder relies on
    ``W`` alone.
    """
    _require_si(params)
    if not sigma_s2 >= 0:
        raise DomainError(f"sigma_s2 must be >= 0, got {sigma_s2}")
    _, dist, _ = _wz_oracle(params, beta, sigma_s2)
    return dist, printed_de_wz(params, beta, sigma_s2)


def _wz_de_complex(cov: np.ndarray, params: ModelParams, beta: complex, rate: float) -> complex:
    """Transmitter cost at ``beta`` with the rate held fixed, in complex arithmetic.

    Mirrors :func:`_wz_oracle` without validation so that the complex step
    ``Im f(beta + ih) / h`` gives the derivative to machine precision.
    """
    s2 = wz_sigma_s2(params, beta, rate)
    c4 = np.zeros((4, 4), dtype=complex)
    c4[:3, :3] = cov
    c4[3, 3] = s2
    obs = np.array([[1.0, beta, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0]], dtype=complex)
    s_vv = obs @ c4 @ obs.T
    s_vx = obs @ c4[:, 0]
    coef = np.linalg.solve(s_vv, s_vx)
    err = np.array([1.0, 1.0, 0.0, 0.0]) - coef @ obs
    return err @ c4 @ err


def wz_point(params: ModelParams, beta: float, rate: float, cov=None) -> RDPoint:
    """Full R-D record for a given ``beta`` at a given rate (side information present)."""
    _require_si(params)
    _check_rate(rate)
    if cov is None:
        cov = validate_model(params)
    sigma_s2 = math.inf if rate == 0 else wz_sigma_s2(params, beta, rate)
    _, dist, i_yw = _wz_oracle(params, beta, sigma_s2, cov)
    printed = None if rate == 0 else printed_de_wz(params, beta, sigma_s2)
    return RDPoint(rate, beta, sigma_s2, dist, d_e_paper=printed, i_yw=i_yw)


def beta_star(params: ModelParams, rate: float, tol: float = 1e-9) -> RDPoint:
    """Leader-optimal test-channel coefficient at a given Wyner-Ziv rate.

    Minimises the oracle transmitter cost over ``beta`` with ``sigma_s2``
    tied to ``rate``. The argmin is polished to a root of the exact
    (complex-step) derivative.
    """
    _require_si(params)
    _check_rate(rate, allow_zero=False)
    cov = validate_model(params)

    def objective(beta):
        return _wz_oracle(params, beta, wz_sigma_s2(params, beta, rate), cov)[1].d_e

    def slope(beta):
        return _wz_de_complex(cov, params, complex(beta, _COMPLEX_STEP), rate).imag / _COMPLEX_STEP

    res = minimize_with_expansion(objective, BETA_BRACKET, tol=tol, fprime=slope)
    return wz_point(params, res.argmin, rate, cov)


def wz_zero_rate_point(params: ModelParams) -> RDPoint:
    """Zero-rate endpoint: ``Y`` carries nothing, the decoder uses ``W`` only.

    ``beta`` is undefined there and reported as NaN.
    """
    return wz_point(params, math.nan, 0.0)


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def wz_curve(params: ModelParams, rates: Sequence[float], threads: int | None = None) -> list[RDPoint]:
    """Leader-optimal Wyner-Ziv points at each rate, in input order.

    Rates must be sorted; a zero rate gives :func:`wz_zero_rate_point`. The
    receiver cost must not increase along the curve.
    """
    _require_si(params)
    rates = [float(x) for x in rates]
    if any(b < a for a, b in zip(rates, rates[1:])):
        raise DomainError("rates must be sorted in increasing order")
    for rate in rates:
        _check_rate(rate)
    validate_model(params)
    points = _map(lambda rate: wz_zero_rate_point(params) if rate == 0 else beta_star(params, rate), rates, threads)
    slack = 1e-12 * params.sigma_x2
    for prev, cur in zip(points, points[1:]):
        if cur.distortions.d_d > prev.distortions.d_d + slack:
            raise InternalInconsistency(
                f"receiver cost increased from {prev.distortions.d_d!r} at R={prev.rate} "
                f"to {cur.distortions.d_d!r} at R={cur.rate}"
            )
    return points


def no_si_curve(r: float, rho: float, sigma_x2: float, rates: Sequence[float]) -> list[RDPoint]:
    return [rd_point_no_si(r, rho, sigma_x2, float(rate)) for rate in rates]


def conditional_rate(cov_aug: np.ndarray, y_vec: np.ndarray) -> tuple[float, float]:
    """``I(X,theta;Y|W)`` in bits, by the chain rule and by the Schur-complement form.

    ``cov_aug`` is the covariance of ``(X, theta, W, S)``.
    """
    joint = lincomb_cov(cov_aug, [unit(4, X), unit(4, THETA), unit(4, W), y_vec])
    chain = mutual_information(joint, [0, 1, 2], [3]) - mutual_information(joint, [2], [3])
    _, var_y_w = conditional(joint, 3, [2])
    _, var_y_all = conditional(joint, 3, [0, 1, 2])
    schur = 0.5 * math.log(var_y_w / var_y_all) / LN2
    return chain, schur


def rate_loss_audit(
    params: ModelParams,
    rate: float,
    b_grid: Sequence[float] = (-3.0, -1.0, 1.0, 3.0),
    a_values: Sequence[float] | None = None,
    tol: float = 1e-10,
) -> AuditReport:
    """Check that an encoder which also sees ``W`` gains nothing.

    For each ``a`` (with ``sigma_s2`` fixed by ``rate`` at ``b = 0``) the
    encoder ``Y = X + a theta + b W + S`` is compared with ``b = 0``: the
    conditional rate ``I(X,theta;Y|W)`` and both distortions (decoder on
    ``(Y, W)``) must not move. The two evaluations of the conditional rate
    must also agree with each other, and at ``b = 0`` with the Wyner-Ziv rate.
    """
    _require_si(params)
    _check_rate(rate, allow_zero=False)
    if math.isinf(rate):
        raise DomainError("rate-loss audit needs a finite rate")
    cov = validate_model(params)
    if a_values is None:
        a_values = [beta_star(params, rate).beta, -1.0, 0.5, 2.0]
    worst = 0.0
    rows = []
    for a in a_values:
        sigma_s2 = wz_sigma_s2(params, a, rate)
        aug = augment(cov, sigma_s2)
        base_vec = unit(4, X) + a * unit(4, THETA) + unit(4, 3)
        chain0, schur0 = conditional_rate(aug, base_vec)
        _, base = mmse_distortions(aug, [base_vec, unit(4, W)])
        wz = wz_rate(params, a, sigma_s2)
        dev_a = max(abs(chain0 - schur0), abs(chain0 - wz)) / max(abs(chain0), 1e-300)
        for b in b_grid:
            y_vec = base_vec + b * unit(4, W)
            chain, schur = conditional_rate(aug, y_vec)
            _, d = mmse_distortions(aug, [y_vec, unit(4, W)])
            devs = [
                abs(chain - chain0) / max(abs(chain0), 1e-300),
                abs(chain - schur) / max(abs(chain0), 1e-300),
                abs(d.d_e - base.d_e) / max(base.d_e, 1e-300),
                abs(d.d_d - base.d_d) / max(base.d_d, 1e-300),
            ]
            dev_a = max(dev_a, *devs)
        worst = max(worst, dev_a)
        rows.append({"a": float(a), "sigma_s2": sigma_s2, "rate_given_w": chain0, "max_deviation": dev_a})
    details = {"rate": rate, "b_grid": list(map(float, b_grid)), "rows": rows}
    return AuditReport("rate-loss", worst < tol, worst, tol, details)


def _rel_gap(printed: float, oracle: float) -> float:
    return abs(printed - oracle) / max(abs(oracle), 1e-300)


def printed_formula_audit(
    param_sets: Sequence[ModelParams],
    rates: Sequence[float],
    flag_rtol: float = 1e-6,
) -> AuditReport:
    """Tabulate printed closed forms next to oracle values and flag disagreements.

    For each parameter set and rate: the no-side-information curve formulas
    (receiver and transmitter cost) against the oracle at the equilibrium
    coefficient, and, when side information is present, the printed
    Wyner-Ziv transmitter cost against the oracle at the leader-optimal
    ``beta``. The large-rate limits of the no-side-information formulas are
    compared with the noiseless closed-form equilibrium.

    The audit reports; it does not judge. ``passed`` only means it ran.
    """
    rows, flags, limits = [], [], []
    for k, params in enumerate(param_sets):
        r, rho, sx2 = params.r_theta, params.rho_xtheta, params.sigma_x2
        for rate in rates:
            pt = rd_point_no_si(r, rho, sx2, rate)
            row = {
                "set": k,
                "rate": rate,
                "d_d_oracle": pt.distortions.d_d,
                "d_d_paper": pt.d_d_paper,
                "d_e_oracle": pt.distortions.d_e,
                "d_e_paper": pt.d_e_paper,
            }
            for name in ("d_d", "d_e"):
                gap = _rel_gap(row[f"{name}_paper"], row[f"{name}_oracle"])
                if gap > flag_rtol:
                    flags.append({"set": k, "rate": rate, "quantity": f"{name} (no SI)", "rel_gap": gap})
            if params.has_si and rate > 0:
                wz = beta_star(params, rate)
                row.update(beta_wz=wz.beta, d_e_wz_oracle=wz.distortions.d_e, d_e_wz_paper=wz.d_e_paper)
                gap = _rel_gap(wz.d_e_paper, wz.distortions.d_e)
                if gap > flag_rtol:
                    flags.append({"set": k, "rate": rate, "quantity": "d_e (Wyner-Ziv)", "rel_gap": gap})
            rows.append(row)

        eq = closed_form_equilibrium(r, rho, sx2)
        inf_pt = rd_point_no_si(r, rho, sx2, math.inf)
        lim = {
            "set": k,
            "d_d_equilibrium": eq.distortions.d_d,
            "d_d_oracle_limit": inf_pt.distortions.d_d,
            "d_d_paper_limit": inf_pt.d_d_paper,
            "d_e_equilibrium": eq.distortions.d_e,
            "d_e_oracle_limit": inf_pt.distortions.d_e,
            "d_e_paper_limit": inf_pt.d_e_paper,
        }
        lim["d_d_limit_flagged"] = _rel_gap(lim["d_d_paper_limit"], lim["d_d_equilibrium"]) > flag_rtol
        lim["d_e_limit_flagged"] = _rel_gap(lim["d_e_paper_limit"], lim["d_e_equilibrium"]) > flag_rtol
        limits.append(lim)

    worst = max((f["rel_gap"] for f in flags), default=0.0)
    details = {"rows": rows, "flags": flags, "large_rate_limits": limits, "flag_rtol": flag_rtol}
    return AuditReport("formulas", True, worst, flag_rtol, details)
