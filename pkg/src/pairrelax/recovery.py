"""Recover a density whose autocorrelation matches a target, by Schulz-Snyder iteration.

The iteration is multiplicative: rho <- rho * (rho correlated with F_R / F_rho).
It preserves positivity and mass and never increases the Kullback-Leibler
divergence between the target F_R and the current autocorrelation F_rho.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergentRatio, InternalError
from .grid import Grid
from .spectral import Correlogram, Density, autocorrelation, cross_correlation

log = logging.getLogger(__name__)

RATIO_FLOOR = 1e-30
MONOTONE_SLACK = 1e-12


def _values(F, grid=None):
    if isinstance(F, (Correlogram, Density)):
        return F.grid, np.asarray(F.values, dtype=float)
    return grid, grid.check(F)


def kl_divergence(F_R, F_rho, grid: Grid | None = None) -> float:
    """h^dim sum F_R log(F_R / F_rho), with 0 log(0/a) = 0 and a log(a/0) = inf."""
    grid, a = _values(F_R, grid)
    _, b = _values(F_rho, grid)
    pos = a > 0
    if np.any(b[pos] <= 0):
        return float("inf")
    return float(grid.cell_volume * np.sum(a[pos] * np.log(a[pos] / b[pos])))


def symmetry_residual(values: np.ndarray, grid: Grid) -> float:
    """Smallest max-difference between rho and any of its point reflections x -> a - x.

    Every grid reflection centre (on or halfway between grid points) is tried.
    A residual of zero means rho lies in one of the iteration's invariant sets.
    """
    v = grid.check(values)
    mirrored = grid.reflect(v)  # index j -> -j
    best = np.inf
    for shift in np.ndindex(*grid.shape):
        # rho_{m - j} for reflection centre m / 2
        cand = np.roll(mirrored, shift, axis=tuple(range(grid.dim)))
        best = min(best, float(np.max(np.abs(v - cand))))
    return best


def init_density(grid: Grid, seed: int, min_residual: float = 1e-3, max_draws: int = 100) -> Density:
    """Strictly positive start 1 + U(0, 1/2) per cell, normalized, with no symmetry plane."""
    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        v = 1.0 + 0.5 * rng.random(grid.shape)
        v /= grid.integrate(v)
        if symmetry_residual(v, grid) >= min_residual:
            return Density(grid, v)
    raise InternalError(f"could not draw an asymmetric start in {max_draws} attempts")


def _ratio(F_R: np.ndarray, F_rho: np.ndarray) -> np.ndarray:
    r = np.zeros_like(F_R)
    live = F_R >= RATIO_FLOOR
    if np.any(F_rho[live] < RATIO_FLOOR):
        bad = int(np.count_nonzero(F_rho[live] < RATIO_FLOOR))
        raise DivergentRatio(f"autocorrelation vanishes on {bad} cells where the target is positive")
    r[live] = F_R[live] / F_rho[live]
    return r


def _step(rho: np.ndarray, F_R: np.ndarray, grid: Grid, F_rho: np.ndarray | None = None):
    if F_rho is None:
        F_rho = autocorrelation(rho, grid).values
    r = _ratio(F_R, F_rho)
    return rho * cross_correlation(rho, r, grid)


def schulz_snyder_step(rho_n, F_R) -> Density:
    """One multiplicative update rho_{n+1} = rho_n * (rho_n correlated with F_R / F_rho_n)."""
    grid, rho = _values(rho_n)
    _, target = _values(F_R, grid)
    new = _step(rho, target, grid)
    return Density(grid, np.clip(new, 0.0, None))


@dataclass
class RecoveryResult:
    rho: Density
    kl_final: float
    kl_trace: list = field(default_factory=list)
    step_deltas: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    seed: int | None = None
    per_seed: dict = field(default_factory=dict)
    fixed_point_residual: float = float("nan")

    def autocorrelation_l1_error(self, F_R) -> float:
        grid, target = _values(F_R, self.rho.grid)
        F = autocorrelation(self.rho).values
        return grid.integrate(np.abs(F - target))

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "kl", "l1_delta"])
            for i, (kl, d) in enumerate(zip(self.kl_trace, self.step_deltas), start=1):
                w.writerow([i, repr(kl), repr(d)])


def recover_single(F_R, seed: int = 0, tol1: float = 1e-10, tol2: float = 1e-8, max_iters: int = 100_000,
                   rho0=None, check_monotone: bool = True) -> RecoveryResult:
    grid, target = _values(F_R)
    rho = init_density(grid, seed).values if rho0 is None else _values(rho0, grid)[1].copy()
    F_rho = autocorrelation(rho, grid).values
    kl_prev = kl_divergence(target, F_rho, grid)
    kls, deltas = [], []
    converged = False
    it = 0
    fp_res = float("nan")
    for it in range(1, max_iters + 1):
        new = np.clip(_step(rho, target, grid, F_rho), 0.0, None)
        F_rho = autocorrelation(new, grid).values
        kl_new = kl_divergence(target, F_rho, grid)
        if check_monotone and kl_new > kl_prev + MONOTONE_SLACK:
            raise InternalError(f"KL increased from {kl_prev!r} to {kl_new!r} at iteration {it}")
        delta = grid.integrate(np.abs(new - rho))
        fp_res = float(np.max(np.abs(new - rho)))
        kls.append(kl_new)
        deltas.append(delta)
        dF = kl_prev - kl_new
        rho, kl_prev = new, kl_new
        if dF < tol1 and delta < tol2:
            converged = True
            break
    log.debug("recovery seed %s: %d iterations, KL %.3e, converged=%s", seed, it, kl_prev, converged)
    return RecoveryResult(
        rho=Density(grid, rho),
        kl_final=kl_prev,
        kl_trace=kls,
        step_deltas=deltas,
        iterations=it,
        converged=converged,
        seed=seed,
        fixed_point_residual=fp_res,
    )


def recover(F_R, seeds=(0, 1, 2), tol1: float = 1e-10, tol2: float = 1e-8, max_iters: int = 100_000,
            check_monotone: bool = True) -> RecoveryResult:
    """Multi-start recovery; keeps the run with the smallest final KL."""
    if isinstance(seeds, int):
        seeds = (seeds,)
    best = None
    per_seed = {}
    for s in seeds:
        res = recover_single(F_R, s, tol1, tol2, max_iters, check_monotone=check_monotone)
        per_seed[int(s)] = res.kl_final
        if best is None or res.kl_final < best.kl_final:
            best = res
    best.per_seed = per_seed
    return best


def clean_target(F: Correlogram, rel_floor: float = 1e-7) -> Correlogram:
    """Remove interior-point noise from a relaxed solution before recovery.

    Negative entries are clipped, entries below ``rel_floor * max F`` are set
    to zero (the solver leaves O(tol) mass on cells outside the support), the
    result is made exactly even and renormalized to unit mass.
    """
    v = np.clip(np.asarray(F.values, dtype=float), 0.0, None)
    v[v < rel_floor * v.max()] = 0.0
    v = 0.5 * (v + F.grid.reflect(v))
    v /= F.grid.integrate(v)
    return Correlogram(F.grid, v)
