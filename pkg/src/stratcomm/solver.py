"""Bracketed global scalar minimisation: grid scan, then golden-section search.

Equilibrium objectives here are smooth but can be very flat, and a local
method started in the wrong basin would report a wrong equilibrium without
complaint. A dense grid pass finds the best cell over the whole bracket;
golden-section search then narrows that cell's neighbourhood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import BracketExpansionExceeded, InvalidBracket, NonFiniteEvaluation

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

DEFAULT_TOL = 1e-9
DEFAULT_GRID = 1001


@dataclass(frozen=True)
class ScalarMinResult:
    argmin: float
    value: float
    evaluations: int
    bracket_used: tuple[float, float]


class _Counted:
    def __init__(self, f):
        self.f = f
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        y = float(self.f(x))
        if not math.isfinite(y):
            raise NonFiniteEvaluation(f"objective returned {y} at x={x!r}")
        return y


def golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Shrink ``[lo, hi]`` around a local minimum of ``f`` until narrower than ``tol``."""
    c = hi - INVPHI * (hi - lo)
    d = lo + INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - INVPHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INVPHI * (hi - lo)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def minimize_scalar(
    f: Callable[[float], float],
    bracket: tuple[float, float],
    tol: float = DEFAULT_TOL,
    grid_points: int = DEFAULT_GRID,
    fprime: Callable[[float], float] | None = None,
) -> ScalarMinResult:
    """Global minimum of ``f`` over a closed bracket.

    Parameters
    ----------
    f : callable
        Objective; must be finite everywhere on the bracket.
    bracket : (lo, hi)
        Search interval, ``lo < hi``.
    tol : float
        Final width of the golden-section interval.
    grid_points : int
        Size of the initial uniform scan. Ties go to the smaller argument.
    fprime : callable, optional
        Accurate derivative of ``f``. When given and it changes sign across
        the refined cell, the argmin is polished to a root of ``fprime``.
        Function values alone cannot resolve a smooth minimum much below
        ``sqrt(machine eps)`` in the argument; derivative roots can.

    Returns
    -------
    ScalarMinResult
    """
    lo, hi = (float(b) for b in bracket)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidBracket(f"need finite lo < hi, got ({lo}, {hi})")
    if not tol > 0:
        raise InvalidBracket(f"tol must be positive, got {tol}")
    if grid_points < 3:
        raise InvalidBracket("grid_points must be at least 3")

    fc = _Counted(f)
    step = (hi - lo) / (grid_points - 1)
    grid = [lo + i * step for i in range(grid_points - 1)] + [hi]
    values = [fc(x) for x in grid]
    best = min(range(grid_points), key=lambda i: (values[i], i))

    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, grid_points - 1)]
    x, fx = golden_section(fc, a, b, tol)
    if values[best] <= fx:
        x, fx = grid[best], values[best]

    if fprime is not None:
        ga, gb = fprime(a), fprime(b)
        if ga < 0 < gb:
            root = brentq(fprime, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            froot = fc(root)
            # Both points sit at the same minimum to within rounding; prefer the
            # root unless it is clearly worse.
            if froot <= fx + 1e-13 * max(abs(fx), 1.0):
                x, fx = root, froot

    return ScalarMinResult(x, fx, fc.calls, (lo, hi))


def default_bracket(reference: float) -> tuple[float, float]:
    half = 10.0 * max(1.0, abs(reference))
    return (-half, half)


def minimize_with_expansion(
    f: Callable[[float], float],
    bracket: tuple[float, float],
    tol: float = DEFAULT_TOL,
    max_expansions: int = 3,
    edge_fraction: float = 0.01,
    fprime: Callable[[float], float] | None = None,
) -> ScalarMinResult:
    """:func:`minimize_scalar` that doubles the bracket while the argmin hugs an edge.

    The bracket is widened about its centre at most ``max_expansions`` times;
    an argmin still within ``edge_fraction`` of an edge after that raises
    :class:`BracketExpansionExceeded`.
    """
    lo, hi = bracket
    evaluations = 0
    for attempt in range(max_expansions + 1):
        res = minimize_scalar(f, (lo, hi), tol=tol, fprime=fprime)
        evaluations += res.evaluations
        margin = edge_fraction * (hi - lo)
        if lo + margin < res.argmin < hi - margin:
            return ScalarMinResult(res.argmin, res.value, evaluations, (lo, hi))
        if attempt == max_expansions:
            break
        mid, half = 0.5 * (lo + hi), hi - lo
        lo, hi = mid - half, mid + half
    raise BracketExpansionExceeded(
        f"argmin {res.argmin} still at the edge of ({lo}, {hi}) after {max_expansions} expansions"
    )
