"""Interaction potentials sampled on a periodic grid.

Every family is evaluated in closed form at arbitrary points (used by the
particle simulator and the three-delta analysis) and sampled at grid points
for the relaxation.  Samples are shifted by their discrete mean so the
constant density has discrete energy exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .errors import ParameterDomainError, ShapeError
from .grid import Grid

FAMILIES = ("morse1d", "local", "powerlaw", "multiscale", "morse2d", "tabulated")

_ALIASES = {
    "periodicmorse1d": "morse1d",
    "morse": "morse1d",
    "regularizedpowerlaw": "powerlaw",
    "power": "powerlaw",
    "multi": "multiscale",
}

_DEFAULTS = {
    "morse1d": {"sigma": 0.1, "L": 1.2, "G": 0.9},
    "local": {"lc": 0.1},
    "powerlaw": {"eps": 0.01, "coef": 3.5},
    "multiscale": {"width": 0.1, "amplitude": 0.5},
    "morse2d": {"L": 1.5, "G": 0.9},
    "tabulated": {},
}

_DIMS = {"morse1d": 1, "local": 1, "powerlaw": 1, "multiscale": 1, "morse2d": 2}


@dataclass(frozen=True)
class PotentialSpec:
    """Family name plus its real parameters (missing ones take defaults)."""

    family: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        fam = _ALIASES.get(self.family.lower(), self.family.lower())
        if fam not in FAMILIES:
            raise ParameterDomainError(f"unknown potential family {self.family!r}")
        merged = dict(_DEFAULTS[fam])
        merged.update({k: float(v) for k, v in dict(self.params).items()})
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", merged)
        _validate(fam, merged)

    @property
    def dim(self) -> int | None:
        return _DIMS.get(self.family)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}


def _validate(family: str, p: dict):
    if family in ("morse1d", "morse2d"):
        if not (p["G"] > 0 and p["L"] > 0):
            raise ParameterDomainError(f"{family} requires G > 0 and L > 0, got G={p['G']}, L={p['L']}")
        if family == "morse1d" and not p["sigma"] > 0:
            raise ParameterDomainError(f"morse1d requires sigma > 0, got {p['sigma']}")
    elif family == "local":
        if not 0 < p["lc"] <= 1:
            raise ParameterDomainError(f"local potential requires 0 < lc <= 1, got {p['lc']}")
    elif family == "powerlaw":
        if not p["eps"] > 0:
            raise ParameterDomainError(f"power law requires eps > 0 for a finite W(0), got {p['eps']}")
    elif family == "multiscale":
        if not 0 < p["width"] <= 0.5:
            raise ParameterDomainError(f"triangle width must lie in (0, 1/2], got {p['width']}")


# -- closed forms -----------------------------------------------------------
# Each takes coordinates already reduced to [0, 1) and returns (value, gradient).
# Gradients at kinks use the average of the one-sided slopes.


def _morse1d(r, sigma, L, G):
    a = 1.0 / (L * sigma)
    b = 1.0 / sigma
    A = G * L / -math.expm1(-a)
    B = 1.0 / -math.expm1(-b)
    ea, ea1 = np.exp(-a * r), np.exp(-a * (1.0 - r))
    eb, eb1 = np.exp(-b * r), np.exp(-b * (1.0 - r))
    val = -A * (ea + ea1) + B * (eb + eb1)
    grad = -A * a * (ea1 - ea) + B * b * (eb1 - eb)
    grad = np.where(r == 0.0, 0.0, grad)
    return val, grad


_PSI_KNOTS = np.array([0.0, 0.5, 0.6, 0.9, 1.0])
_PSI_VALUES = np.array([0.1, 0.1, 1.0, 1.0, 0.0])
_PSI_SLOPES = np.array([0.0, 9.0, 0.0, -10.0, 0.0])


def _psi(u):
    """Piecewise-linear local kernel and its derivative, even in u."""
    au = np.abs(u)
    val = np.interp(au, _PSI_KNOTS, _PSI_VALUES, right=0.0)
    seg = np.searchsorted(_PSI_KNOTS, au, side="right") - 1
    seg = np.clip(seg, 0, len(_PSI_SLOPES) - 1)
    slope = np.where(au >= 1.0, 0.0, _PSI_SLOPES[seg])
    # average left/right slopes at interior knots
    at_knot = np.isin(au, _PSI_KNOTS[1:])
    left = _PSI_SLOPES[np.clip(seg - 1, 0, None)]
    slope = np.where(at_knot, 0.5 * (left + slope), slope)
    return val, np.sign(u) * slope


def _local(r, lc):
    m = int(math.ceil(lc)) + 1
    val = np.zeros_like(r)
    grad = np.zeros_like(r)
    for shift in range(-m, m + 1):
        v, g = _psi((r + shift) / lc)
        val = val + v
        grad = grad + g / lc
    return val, grad


def _power_branch(y, coef):
    return y**-0.4 - coef * y**-0.2, -0.4 * y**-1.4 + 0.2 * coef * y**-1.2


def _powerlaw(r, eps, coef):
    v1, g1 = _power_branch(r + eps, coef)
    v2, g2 = _power_branch(1.0 - r + eps, coef)
    grad = np.where(r == 0.0, 0.0, g1 - g2)
    return v1 + v2, grad


def _multiscale(r, width, amplitude):
    t1 = np.maximum(1.0 - r / width, 0.0)
    t2 = np.maximum(1.0 - (1.0 - r) / width, 0.0)
    g = np.where(r < width, -1.0 / width, 0.0) + np.where(r > 1.0 - width, 1.0 / width, 0.0)
    g = np.where(r == 0.0, 0.0, g)
    g = np.where(np.isclose(r, width, rtol=0, atol=1e-15), -0.5 / width, g)
    g = np.where(np.isclose(r, 1.0 - width, rtol=0, atol=1e-15), 0.5 / width, g)
    val = t1 + t2 - amplitude * np.cos(4 * np.pi * r)
    grad = g + amplitude * 4 * np.pi * np.sin(4 * np.pi * r)
    return val, grad


def _morse2d(rx, ry, L, G):
    sx, sy = np.sin(np.pi * rx), np.sin(np.pi * ry)
    u = np.abs(sx) + np.abs(sy)
    ea, eb = np.exp(-u / L), np.exp(-u)
    val = -G * L * ea + eb
    dW_du = G * ea - eb
    dux = np.pi * np.cos(np.pi * rx) * np.sign(sx)
    duy = np.pi * np.cos(np.pi * ry) * np.sign(sy)
    return val, np.stack([dW_du * dux, dW_du * duy], axis=-1)


def closed_form(spec: PotentialSpec) -> Callable:
    """Return ``f(points) -> (values, gradients)`` for a non-tabulated family.

    ``points`` has shape (..., dim) (or (...) in 1D) with arbitrary real
    coordinates; they are wrapped into [0, 1) first.
    """
    p = spec.params
    fam = spec.family
    if fam == "tabulated":
        raise ParameterDomainError("tabulated potentials have no closed form")

    def f(points):
        pts = np.mod(np.asarray(points, dtype=float), 1.0)
        if fam == "morse2d":
            return _morse2d(pts[..., 0], pts[..., 1], p["L"], p["G"])
        if fam == "morse1d":
            return _morse1d(pts, p["sigma"], p["L"], p["G"])
        if fam == "local":
            return _local(pts, p["lc"])
        if fam == "powerlaw":
            return _powerlaw(pts, p["eps"], p["coef"])
        return _multiscale(pts, p["width"], p["amplitude"])

    return f


# -- sampled potentials -----------------------------------------------------


@dataclass(frozen=True)
class SampledPotential:
    """Grid samples of W with normalization flags.

    ``offset`` is the constant that has been subtracted from the raw family
    values, so ``evaluate`` stays consistent with ``values`` off the grid.
    """

    grid: Grid
    values: np.ndarray
    mean_zero: bool
    mirror_symmetric: bool
    spec: PotentialSpec
    offset: float = 0.0

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @property
    def has_closed_form(self) -> bool:
        return self.spec.family != "tabulated"

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def evaluate(self, points) -> np.ndarray:
        """W at arbitrary points (closed form when available, else interpolated)."""
        return self.evaluate_with_gradient(points)[0]

    def gradient(self, points) -> np.ndarray:
        return self.evaluate_with_gradient(points)[1]

    def evaluate_with_gradient(self, points):
        if self.has_closed_form:
            val, grad = closed_form(self.spec)(points)
            return val - self.offset, grad
        return _interpolate(self.grid, self.values, points)


def _interpolate(grid: Grid, values: np.ndarray, points):
    """Periodic (multi)linear interpolation with node-centred gradients."""
    pts = np.mod(np.asarray(points, dtype=float), 1.0)
    n = grid.n
    if grid.dim == 1:
        s = pts * n
        i0 = np.floor(s).astype(int) % n
        t = s - np.floor(s)
        i1 = (i0 + 1) % n
        v0, v1 = values[i0], values[i1]
        val = (1 - t) * v0 + t * v1
        slope = (v1 - v0) * n
        central = 0.5 * (values[i1] - values[(i0 - 1) % n]) * n
        grad = np.where(t == 0.0, central, slope)
        return val, grad
    s = pts * n
    fl = np.floor(s)
    t = s - fl
    i0 = fl.astype(int) % n
    i1 = (i0 + 1) % n
    tx, ty = t[..., 0], t[..., 1]
    v00 = values[i0[..., 0], i0[..., 1]]
    v10 = values[i1[..., 0], i0[..., 1]]
    v01 = values[i0[..., 0], i1[..., 1]]
    v11 = values[i1[..., 0], i1[..., 1]]
    val = (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11
    gx = ((1 - ty) * (v10 - v00) + ty * (v11 - v01)) * n
    gy = ((1 - tx) * (v01 - v00) + tx * (v11 - v10)) * n
    return val, np.stack([gx, gy], axis=-1)


def build_potential(spec: PotentialSpec, grid: Grid) -> SampledPotential:
    """Sample a closed-form family on ``grid`` and shift it to discrete mean zero."""
    if spec.family == "tabulated":
        raise ParameterDomainError("use tabulated_potential() or load_tabulated() for tabulated data")
    if spec.dim != grid.dim:
        raise ShapeError(f"family {spec.family} is {spec.dim}-dimensional, grid is {grid.dim}-dimensional")
    coords = grid.coordinates()
    pts = coords[0] if grid.dim == 1 else np.stack(coords, axis=-1)
    raw, _ = closed_form(spec)(pts)
    raw = np.asarray(raw, dtype=float)
    # Samples at j and -j come from the same even formula but may differ in
    # the last bit; copy one onto the other so symmetry is exact.
    raw = _force_mirror(grid, raw)
    mean = float(np.mean(raw))
    return SampledPotential(grid, raw - mean, True, True, spec, offset=mean)


def _force_mirror(grid: Grid, values: np.ndarray) -> np.ndarray:
    label, reps = grid.orbits
    flat = values.ravel()
    return flat[reps][label].reshape(grid.shape)


def tabulated_potential(values, grid: Grid | None = None, symmetrize_input=True, normalize=True) -> SampledPotential:
    arr = np.asarray(values, dtype=float)
    if grid is None:
        dim = arr.ndim
        grid = Grid(dim, arr.shape[0])
    arr = grid.check(arr).copy()
    W = SampledPotential(grid, arr, False, _is_mirror(grid, arr), PotentialSpec("tabulated"))
    if symmetrize_input:
        W = symmetrize(W)
    if normalize:
        W = normalize_mean_zero(W)
    return W


def _is_mirror(grid: Grid, values: np.ndarray) -> bool:
    return bool(np.array_equal(values, grid.reflect(values)))


def symmetrize(W: SampledPotential) -> SampledPotential:
    """Even part 1/2 (W(x) + W(-x)); the odd part never contributes to the energy."""
    even = 0.5 * (W.values + W.grid.reflect(W.values))
    even = _force_mirror(W.grid, even)
    # reflection is a permutation, so the discrete mean is unchanged
    return replace(W, values=even, mirror_symmetric=True)


def normalize_mean_zero(W: SampledPotential) -> SampledPotential:
    mean = float(np.mean(W.values))
    return replace(W, values=W.values - mean, mean_zero=True, offset=W.offset + mean)


def load_tabulated(path, symmetrize_input=True, normalize=True) -> SampledPotential:
    """Read ``dim n`` followed by n**dim reals in row-major order."""
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise ShapeError(f"{path}: expected header 'dim n'")
    try:
        dim, n = int(tokens[0]), int(tokens[1])
        data = np.array([float(t) for t in tokens[2:]])
    except ValueError as exc:
        raise ShapeError(f"{path}: non-numeric entry ({exc})") from exc
    grid = Grid(dim, n)
    if data.size != grid.size:
        raise ShapeError(f"{path}: header promises {grid.size} values, found {data.size}")
    return tabulated_potential(data.reshape(grid.shape), grid, symmetrize_input, normalize)


def save_tabulated(W: SampledPotential, path):
    lines = [f"{W.grid.dim} {W.grid.n}"]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in np.atleast_2d(W.values))
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class PropertyReport:
    mirror_symmetric: bool
    max_asymmetry: float
    mean_zero: bool
    mean_residual: float
    continuity_jump: float
    continuous: bool

    @property
    def ok(self) -> bool:
        return self.mirror_symmetric and self.mean_zero and self.continuous


def check_potential_properties(W: SampledPotential, jump_tol=0.5) -> PropertyReport:
    """Mirror symmetry, discrete mean zero and a max-jump continuity proxy.

    The continuity proxy is the largest difference between neighbouring
    samples along any axis, relative to max|W|.
    """
    vals = W.values
    scale = max(W.scale, 1e-300)
    asym = float(np.max(np.abs(vals - W.grid.reflect(vals))))
    mean_res = abs(W.grid.integrate(vals))
    jumps = [np.max(np.abs(np.roll(vals, -1, axis=ax) - vals)) for ax in range(W.grid.dim)]
    jump = float(max(jumps)) / scale
    return PropertyReport(
        mirror_symmetric=asym == 0.0,
        max_asymmetry=asym,
        mean_zero=mean_res <= 1e-12 * scale,
        mean_residual=mean_res,
        continuity_jump=jump,
        continuous=jump <= jump_tol,
    )
