"""Seeded Monte Carlo simulation of the single-letter game.

Random numbers
--------------
Samples are produced in fixed-size shards. Shard ``i`` of a run with seed
``s`` draws from ``numpy.random.Philox`` keyed by ``(i, s)``, a counter-based
generator, and converts to normals with ``Generator.standard_normal``
(numpy's ziggurat). Shard statistics are merged in shard order, so results
are bit-identical for any number of worker threads. Changing the shard size,
the key layout or the normal sampler changes every fixture and is not done
lightly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .equilibrium import best_response
from .errors import DomainError, InconsistentStrategy
from .gaussian_core import THETA, W, X, DistortionPair, ModelParams, augment, lincomb_cov, unit, validate_model
from .noisy_jscc import ChannelParams, LinearStrategyPair, noisy_response
from .reports import AuditReport

SHARD_SIZE = 1 << 17
Z_THRESHOLD = 5.0


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr}


@dataclass(frozen=True)
class SimResult:
    n_samples: int
    d_e_hat: Estimate
    d_d_hat: Estimate
    power_hat: Estimate
    seed: int

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "d_e_hat": self.d_e_hat.to_dict(),
            "d_d_hat": self.d_d_hat.to_dict(),
            "power_hat": self.power_hat.to_dict(),
        }


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must be in [0, 2**64), got {seed}")
    return seed


def shard_generator(seed: int, shard: int) -> np.random.Generator:
    key = np.array([shard, _check_seed(seed)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _shard_sizes(n: int) -> list[int]:
    full, rest = divmod(n, SHARD_SIZE)
    return [SHARD_SIZE] * full + ([rest] if rest else [])


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _draw(factor: np.ndarray, seed: int, shard: int, size: int) -> np.ndarray:
    z = shard_generator(seed, shard).standard_normal((size, factor.shape[0]))
    return z @ factor.T


def sample_source(params: ModelParams, n: int, seed: int = 0) -> np.ndarray:
    """``n`` draws of ``(X, theta[, W])`` as an ``(n, 2|3)`` array."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    factor = np.linalg.cholesky(validate_model(params))
    parts = [_draw(factor, seed, i, m) for i, m in enumerate(_shard_sizes(n))]
    return np.concatenate(parts, axis=0)


def _system(params: ModelParams, channel: ChannelParams | None, strategies: LinearStrategyPair, dither_var: float):
    """Covariance of ``(X, theta[, W], N, D)`` and the vectors for ``U``, ``Xhat``."""
    if (strategies.enc_w or strategies.dec_w) and not params.has_si:
        raise InconsistentStrategy("strategy uses W but the model has no side information")
    if not dither_var >= 0:
        raise DomainError(f"dither variance must be >= 0, got {dither_var}")
    cov = validate_model(params)
    k = cov.shape[0]
    noise_var = channel.sigma_n2 if channel is not None else 0.0
    full = augment(cov, noise_var, dither_var)
    n = k + 2
    s = strategies
    u_vec = s.enc_scale * (unit(n, X) + s.enc_alpha * unit(n, THETA)) + unit(n, k + 1)
    if s.enc_w:
        u_vec = u_vec + s.enc_scale * s.enc_w * unit(n, W)
    y_vec = u_vec + unit(n, k)
    xhat = s.dec_y * y_vec
    if s.dec_w:
        xhat = xhat + s.dec_w * unit(n, W)
    return full, u_vec, xhat


def analytic_game(
    params: ModelParams,
    channel: ChannelParams | None,
    strategies: LinearStrategyPair,
    dither_var: float = 0.0,
) -> tuple[DistortionPair, float]:
    """Exact distortions and transmit power for any fixed linear strategy pair."""
    full, u_vec, xhat = _system(params, channel, strategies, dither_var)
    n = full.shape[0]
    err_d = unit(n, X) - xhat
    err_e = unit(n, X, THETA) - xhat
    c = lincomb_cov(full, [err_e, err_d, u_vec])
    return DistortionPair(float(c[0, 0]), float(c[1, 1])), float(c[2, 2])


def _shard_stats(values: np.ndarray):
    m = values.shape[0]
    mean = values.mean(axis=0)
    m2 = ((values - mean) ** 2).sum(axis=0)
    return m, mean, m2


def _merge(acc, part):
    """Chan et al. pairwise update of (count, mean, sum of squared deviations)."""
    if acc is None:
        return part
    n_a, mean_a, m2_a = acc
    n_b, mean_b, m2_b = part
    n = n_a + n_b
    delta = mean_b - mean_a
    mean = mean_a + delta * (n_b / n)
    m2 = m2_a + m2_b + delta**2 * (n_a * n_b / n)
    return n, mean, m2


def simulate_game(
    params: ModelParams,
    channel: ChannelParams | None,
    strategies: LinearStrategyPair,
    n: int,
    seed: int = 0,
    threads: int | None = None,
    dither_var: float = 0.0,
) -> SimResult:
    """Empirical costs and transmit power of a linear strategy pair.

    Without ``channel`` the receiver sees ``U`` directly. ``dither_var`` adds
    independent Gaussian noise to ``U`` (a randomised encoder); it is for
    exploration only.
    """
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    seed = _check_seed(seed)
    full, u_vec, xhat = _system(params, channel, strategies, dither_var)
    k = full.shape[0]
    err_e = unit(k, X, THETA) - xhat
    err_d = unit(k, X) - xhat
    proj = np.stack([err_e, err_d, u_vec], axis=1)
    # Zero-variance noise columns get a zero factor column, keeping the
    # variate layout (and hence the fixtures) identical across modes.
    factor = np.zeros_like(full)
    base = validate_model(params)
    factor[: base.shape[0], : base.shape[0]] = np.linalg.cholesky(base)
    for j in range(base.shape[0], k):
        factor[j, j] = math.sqrt(full[j, j])

    def run(job):
        i, m = job
        lin = _draw(factor, seed, i, m) @ proj
        return _shard_stats(lin**2)

    acc = None
    for part in _map(run, list(enumerate(_shard_sizes(n))), threads):
        acc = _merge(acc, part)
    count, mean, m2 = acc
    se = np.sqrt(m2 / (count - 1) / count)
    est = [Estimate(float(mean[j]), float(se[j])) for j in range(3)]
    return SimResult(n, est[0], est[1], est[2], seed)


def _responding_pair(params, channel, a, use_si):
    if channel is None:
        coef, _ = best_response(params, a, use_si)
        return LinearStrategyPair(1.0, a, 0.0, float(coef[0]), float(coef[1]) if use_si else 0.0)
    pair, _, _ = noisy_response(params, channel, a, use_si)
    return pair


def deviation_audit(
    params: ModelParams,
    channel: ChannelParams | None,
    equilibrium_alpha: float,
    grid: Sequence[float] = (-0.5, -0.2, -0.05, 0.0, 0.05, 0.2, 0.5),
    n: int = 1_000_000,
    seed: int = 0,
    use_si: bool | None = None,
    threads: int | None = None,
) -> AuditReport:
    """Simulated check that no leader deviation beats the reported equilibrium.

    Each offset ``delta`` moves the leader to ``equilibrium_alpha + delta``
    (power-renormalised on a noisy channel); the follower re-optimises for
    that encoder. The audit fails if some deviation lowers the simulated
    transmitter cost by more than five combined standard errors. All offsets
    share the seed, so they see the same source draws.
    """
    grid = [float(d) for d in grid]
    if 0.0 not in grid:
        raise DomainError("deviation grid must contain 0")
    if use_si is None:
        use_si = params.has_si
    rows = {}
    for delta in grid:
        a = equilibrium_alpha + delta
        pair = _responding_pair(params, channel, a, use_si)
        res = simulate_game(params, channel, pair, n, seed, threads)
        exact, _ = analytic_game(params, channel, pair)
        rows[delta] = {"delta": delta, "a": a, "d_e_hat": res.d_e_hat.mean, "stderr": res.d_e_hat.stderr, "d_e": exact.d_e}
    ref = rows[0.0]
    worst = -math.inf
    for row in rows.values():
        combined = math.hypot(ref["stderr"], row["stderr"])
        z = (ref["d_e_hat"] - row["d_e_hat"]) / combined if combined > 0 else 0.0
        row["improvement_z"] = z
        worst = max(worst, z)
    details = {"alpha": equilibrium_alpha, "n": n, "seed": seed, "use_si": use_si, "rows": list(rows.values())}
    return AuditReport("deviation", worst <= Z_THRESHOLD, worst, Z_THRESHOLD, details)
