"""Relaxation restricted to three atoms: weight 1 - 2 beta at 0 and beta at +s and -s.

Such a measure has non-negative cosine modes exactly when beta <= theta(s),
where theta(s) = inf_k 1 / (2 (1 - cos(2 pi k s))).  Its energy is linear in
beta, so the restricted optimum is either beta = 0 or beta = theta(s).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ParameterDomainError
from .potential import SampledPotential

P_MAX = 64
K_MAX = 10_000
RATIONAL_TOL = 1e-12


def rational_fit(s: float, p_max: int = P_MAX, tol: float = RATIONAL_TOL):
    """(q, p) in lowest terms if s is within ``tol`` of q/p with p <= p_max, else None."""
    fr = Fraction(s).limit_denominator(p_max)
    if abs(s - fr.numerator / fr.denominator) <= tol:
        return fr.numerator, fr.denominator
    return None


def theta_rational(q: int, p: int) -> float:
    """theta(q/p) for coprime q, p: 1/4 for even p, 1/(2(1 + cos(pi/p))) for odd p."""
    if p % 2 == 0:
        return 0.25
    return 1.0 / (2.0 * (1.0 + math.cos(math.pi / p)))


def _check_s(s):
    if not 0.0 < s <= 0.5:
        raise ParameterDomainError(f"s must lie in (0, 1/2], got {s}")


@lru_cache(maxsize=4)
def _ks(k_max: int) -> np.ndarray:
    return np.arange(1, k_max + 1, dtype=float)


def theta(s: float, k_max: int = K_MAX, p_max: int = P_MAX) -> float:
    """Largest side weight beta keeping the three-atom measure in the cosine cone."""
    _check_s(s)
    if k_max < 1:
        raise ParameterDomainError("k_max must be at least 1")
    fit = rational_fit(s, p_max)
    if fit is not None and fit[1] <= k_max:
        return theta_rational(*fit)
    c = np.cos(2 * np.pi * _ks(k_max) * s)
    return float(1.0 / (2.0 * (1.0 - np.min(c))))


def _value_at(W: SampledPotential, s: float) -> float:
    if W.has_closed_form:
        return float(W.evaluate(np.array(s)))
    grid = W.grid
    if grid.dim != 1:
        raise ParameterDomainError("three-atom analysis is one-dimensional")
    j = s * grid.n
    if abs(j - round(j)) <= 1e-9:
        return float(W.values[int(round(j)) % grid.n])
    return float(_spline(W)(s % 1.0))


_SPLINES: dict = {}


def _spline(W: SampledPotential):
    from scipy.interpolate import CubicSpline

    key = id(W)
    sp = _SPLINES.get(key)
    if sp is None or sp[0] is not W:
        x = np.append(W.grid.axis(), 1.0)
        y = np.append(W.values, W.values[0])
        sp = (W, CubicSpline(x, y, bc_type="periodic"))
        _SPLINES.clear()
        _SPLINES[key] = sp
    return sp[1]


def restricted_energy(s: float, W: SampledPotential, k_max: int = K_MAX) -> float:
    """E(s) = 1/2 W(0) + min(0, theta(s) (W(s) - W(0)))."""
    _check_s(s)
    if W.grid.dim != 1:
        raise ParameterDomainError("three-atom analysis is one-dimensional")
    w0 = float(W.values[0])
    ws = _value_at(W, s)
    if ws >= w0:
        return 0.5 * w0
    return 0.5 * w0 + theta(s, k_max) * (ws - w0)


@dataclass
class ThreeDeltaResult:
    s_star: float | None
    beta_star: float
    E_star: float
    rational_fit: tuple | None
    fit_error: float | None
    degenerate: bool  # W(0) is the minimum: every s ties at 1/2 W(0)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def candidate_points(s_grid=None, p_max: int = P_MAX) -> np.ndarray:
    pts = set()
    for p in range(2, p_max + 1):
        for q in range(1, p // 2 + 1):
            if math.gcd(q, p) == 1:
                pts.add(q / p)
    if s_grid is not None:
        for s in np.atleast_1d(s_grid):
            _check_s(float(s))
            pts.add(float(s))
    return np.array(sorted(pts))


def minimize_three_delta(W: SampledPotential, s_grid=None, p_max: int = P_MAX, k_max: int = K_MAX) -> ThreeDeltaResult:
    """Minimize E(s) over ``s_grid`` plus all rationals q/p with p <= p_max.

    Ties (within roundoff) go to the smaller denominator, so the simplest
    rational is reported.
    """
    pts = candidate_points(s_grid, p_max)
    E = np.array([restricted_energy(float(s), W, k_max) for s in pts])
    w0 = float(W.values[0])
    tie = 1e-13 * max(W.scale, 1e-300)
    if np.all(E >= 0.5 * w0 - tie):
        return ThreeDeltaResult(None, 0.0, 0.5 * w0, None, None, True)
    best = float(E.min())
    winners = pts[E <= best + tie]

    def denom(s):
        fit = rational_fit(float(s), p_max)
        return (fit[1] if fit else p_max + 1, float(s))

    s_star = float(min(winners, key=denom))
    fit = rational_fit(s_star, p_max)
    err = abs(s_star - fit[0] / fit[1]) if fit else None
    return ThreeDeltaResult(s_star, theta(s_star, k_max, p_max), restricted_energy(s_star, W, k_max), fit, err, False)


def write_csv(W: SampledPotential, s_values, path, k_max: int = K_MAX):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "theta", "E"])
        for s in s_values:
            s = float(s)
            w.writerow([repr(s), repr(theta(s, k_max)), repr(restricted_energy(s, W, k_max))])
