"""Solve the relaxation for a potential, validate its certificate and label the minimizer."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NotAtomic, SolverError
from .grid import Grid
from .lp_core import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    DualDecomposition,
    assemble_relaxation,
    extract_dual_decomposition,
    solve_lp,
)
from .potential import SampledPotential
from .spectral import Correlogram, autocorrelation, correlogram_energy, full_cosine_coefficients

KINDS = ("SingleDelta", "DiracLattice", "AtomicNonLattice", "Continuous", "Constant")


@dataclass(frozen=True)
class Thresholds:
    const: float = 1e-4  # max |F - 1| for Constant
    atom: float = 1e-3  # minimum mass of an atom
    mass: float = 1e-2  # mass allowed outside the atoms
    support: float = 1e-3  # cells above support * max F belong to a cluster
    atom_cells: int = 3  # widest cluster (per axis) still counted as one atom


@dataclass
class Atom:
    position: tuple  # fractional coordinates in [0, 1)
    mass: float
    cells: int


@dataclass
class SolutionKind:
    tag: str
    atoms: list = field(default_factory=list)
    spacing: list = field(default_factory=list)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def atomic(self) -> bool:
        return self.tag in ("SingleDelta", "DiracLattice", "AtomicNonLattice")

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "spacing": list(self.spacing),
            "atoms": [{"position": list(a.position), "mass": a.mass, "cells": a.cells} for a in self.atoms],
        }


@dataclass
class RelaxationSolution:
    W: SampledPotential
    F_R: Correlogram
    E_R: float
    decomp: DualDecomposition
    kind: SolutionKind
    stats: dict
    F_lp: Correlogram  # raw interior-point primal, before any exact-case snapping
    snapped: str | None = None  # "delta" / "constant" when the exact case was substituted

    @property
    def grid(self) -> Grid:
        return self.W.grid

    def to_dict(self) -> dict:
        g = self.grid
        return {
            "grid": {"dim": g.dim, "n": g.n},
            "potential": self.W.spec.to_dict(),
            "E_R": self.E_R,
            "E_D": self.decomp.E_D,
            "kind": self.kind.to_dict(),
            "snapped": self.snapped,
            "F_R": self.F_R.values.ravel().tolist(),
            "Wplus": self.decomp.Wplus.ravel().tolist(),
            "K_hat": self.decomp.K_hat.tolist(),
            "identity_residual": self.decomp.residual,
            # wall time is left out so repeated runs serialize identically
            "stats": {k: v for k, v in self.stats.items() if k != "wall_time"},
        }

    def save_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def _delta_values(grid: Grid) -> np.ndarray:
    v = np.zeros(grid.shape)
    v[(0,) * grid.dim] = 1.0 / grid.cell_volume
    return v


def solve_relaxation(W: SampledPotential, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                     thresholds: Thresholds | None = None, snap_exact: bool = True) -> RelaxationSolution:
    """Assemble and solve the relaxation, then validate and classify.

    When one of the closed-form exactness tests holds (W(0) is the minimum of
    W, or every cosine mode of W is non-negative) the optimal face may be
    degenerate; with ``snap_exact`` the known optimum (a single atom or the
    constant) replaces the interior-point representative.
    """
    from .certify import exact_case_constant, exact_case_delta

    thresholds = thresholds or Thresholds()
    t0 = time.perf_counter()
    lp = assemble_relaxation(W)
    sol = solve_lp(lp, tol=tol, max_iter=max_iter)
    if not sol.optimal:
        raise SolverError(
            f"interior point stopped with status {sol.status.value} after {sol.iterations} iterations "
            f"(residuals {sol.residuals})",
            sol.status,
            sol.iterations,
        )
    decomp = extract_dual_decomposition(lp, sol, W, tol)
    F_lp = Correlogram(W.grid, lp.vars_to_density(sol.x))
    F_R, snapped = F_lp, None
    if snap_exact:
        if exact_case_constant(W):
            F_R, snapped = Correlogram(W.grid, np.ones(W.grid.shape)), "constant"
        elif exact_case_delta(W):
            F_R, snapped = Correlogram(W.grid, _delta_values(W.grid)), "delta"
    kind = classify_solution(F_R, thresholds)
    stats = {
        "status": sol.status.value,
        "iterations": sol.iterations,
        "residuals": sol.residuals,
        "tol": tol,
        "n_vars": lp.n_vars,
        "n_modes": lp.n_modes,
        "degenerate": bool(W.scale == 0.0),
        "wall_time": time.perf_counter() - t0,
    }
    return RelaxationSolution(W, F_R, sol.objective, decomp, kind, stats, F_lp, snapped)


# -- classification ---------------------------------------------------------


def _clusters(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Connected components of a boolean grid mask with periodic wrap-around."""
    from scipy import ndimage

    lab, num = ndimage.label(mask)
    if num == 0:
        return lab, 0
    # merge labels that touch across the periodic seams
    parent = list(range(num + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for ax in range(mask.ndim):
        first = np.take(lab, 0, axis=ax)
        last = np.take(lab, -1, axis=ax)
        for a, b in zip(first.ravel(), last.ravel()):
            if a and b:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(num + 1)])
    lab = roots[lab]
    uniq = np.unique(lab[lab > 0])
    remap = np.zeros(num + 1, dtype=int)
    remap[uniq] = np.arange(1, uniq.size + 1)
    return remap[lab], uniq.size


def _circular_centroid(idx: np.ndarray, weights: np.ndarray, n: int) -> float:
    """Mass-weighted mean of grid indices on a ring, returned as a fraction of 1."""
    ang = 2 * np.pi * idx / n
    z = np.sum(weights * np.exp(1j * ang))
    return float(np.angle(z) / (2 * np.pi)) % 1.0


def find_clusters(F: Correlogram, thresholds: Thresholds) -> list[Atom]:
    """Connected pieces of the support, with mass, centroid and extent."""
    grid = F.grid
    masses = np.clip(F.cell_masses, 0.0, None)
    if masses.max() <= 0:
        return []
    mask = masses > thresholds.support * masses.max()
    lab, num = _clusters(mask)
    out = []
    for c in range(1, num + 1):
        where = np.nonzero(lab == c)
        w = masses[where]
        pos = tuple(_circular_centroid(where[ax], w, grid.n) for ax in range(grid.dim))
        extent = max(np.unique(where[ax]).size for ax in range(grid.dim))
        out.append(Atom(pos, float(w.sum()), int(extent)))
    return out


def _ring_gaps(pos: np.ndarray) -> np.ndarray:
    p = np.sort(np.asarray(pos) % 1.0)
    return np.diff(np.concatenate([p, [p[0] + 1.0]]))


def _is_equispaced(pos, h) -> tuple[bool, float]:
    pos = np.unique(np.round(np.asarray(pos) % 1.0, 12))
    if pos.size == 1:
        return True, 1.0
    gaps = _ring_gaps(pos)
    med = float(np.median(gaps))
    ok = bool(np.all(np.abs(gaps - med) <= h + 1e-12) and abs(pos.size * med - 1.0) <= pos.size * h)
    return ok, 1.0 / pos.size


def classify_solution(F_R: Correlogram, thresholds: Thresholds | None = None) -> SolutionKind:
    th = thresholds or Thresholds()
    grid = F_R.grid
    if np.max(np.abs(F_R.values - 1.0)) <= th.const:
        return SolutionKind("Constant")
    clusters = find_clusters(F_R, th)
    atoms = [c for c in clusters if c.cells <= th.atom_cells and c.mass >= th.atom]
    atom_mass = sum(a.mass for a in atoms)
    if not atoms or atom_mass < 1.0 - th.mass:
        return SolutionKind("Continuous")
    atoms.sort(key=lambda a: a.position)
    if max(a.mass for a in atoms) >= 1.0 - th.mass and len(atoms) == 1:
        return SolutionKind("SingleDelta", atoms, [1.0] * grid.dim)
    pos = np.array([a.position for a in atoms])
    if grid.dim == 1:
        ok, spacing = _is_equispaced(pos[:, 0], grid.h)
        if ok:
            return SolutionKind("DiracLattice", atoms, [spacing])
        return SolutionKind("AtomicNonLattice", atoms)
    # 2D: rectangular lattices aligned with the axes = product of two 1D lattices
    ok_x, sx = _is_equispaced(pos[:, 0], grid.h)
    ok_y, sy = _is_equispaced(pos[:, 1], grid.h)
    nx, ny = round(1 / sx), round(1 / sy)
    if ok_x and ok_y and nx * ny == len(atoms):
        xs = np.round(pos[:, 0] * nx) % nx
        ys = np.round(pos[:, 1] * ny) % ny
        if len(set(zip(xs.tolist(), ys.tolist()))) == len(atoms):
            return SolutionKind("DiracLattice", atoms, [sx, sy])
    return SolutionKind("AtomicNonLattice", atoms)


def regrid_for_lattice(F_R: Correlogram, grid: Grid | None = None, thresholds: Thresholds | None = None) -> Grid:
    """Nearest grid size (per axis) making the detected lattice spacing land on grid points."""
    grid = grid or F_R.grid
    kind = classify_solution(F_R, thresholds)
    if kind.tag not in ("SingleDelta", "DiracLattice"):
        raise NotAtomic(f"no lattice structure to regrid for (classified {kind.tag})")
    counts = [max(1, round(1.0 / s)) for s in kind.spacing]
    period = math.lcm(*counts)
    n_new = max(period, period * round(grid.n / period))
    return Grid(grid.dim, n_new)


def lattice_self_correlation_error(F_R: Correlogram) -> float:
    """Max cell-mass difference between F_R o F_R and F_R (zero for exact lattices)."""
    FF = autocorrelation(np.clip(F_R.values, 0.0, None), F_R.grid)
    return float(np.max(np.abs(FF.cell_masses - F_R.cell_masses)))


# -- complementarity -------------------------------------------------------


@dataclass
class ComplementarityReport:
    r1: float  # h^d sum W+ F_R
    r2: float  # sum over all k of K_hat(k) F_hat_R(k)
    max_product_space: float
    max_product_modes: float
    scale: float
    threshold: float

    @property
    def passed(self) -> bool:
        return abs(self.r1) <= self.threshold and abs(self.r2) <= self.threshold

    def to_dict(self) -> dict:
        return {**self.__dict__, "passed": self.passed}


def complementarity_report(F_R: Correlogram, decomp: DualDecomposition, scale: float = 1.0,
                           tol: float = DEFAULT_TOL) -> ComplementarityReport:
    grid = F_R.grid
    prod = decomp.Wplus * F_R.values
    r1 = grid.cell_volume * float(np.sum(prod))
    Khat_full = full_cosine_coefficients(decomp.K, grid)
    Fhat_full = full_cosine_coefficients(F_R.values, grid)
    modes = Khat_full * Fhat_full
    r2 = float(np.sum(modes))
    return ComplementarityReport(
        r1=r1,
        r2=r2,
        max_product_space=float(np.max(np.abs(prod))) * grid.cell_volume,
        max_product_modes=float(np.max(np.abs(modes))),
        scale=scale,
        threshold=10.0 * tol * scale,
    )


def relaxation_energy(F: Correlogram, W: SampledPotential) -> float:
    return correlogram_energy(F, W)
