"""Periodic transforms, autocorrelations and energy quadrature.

All integrals use the midpoint rule with weight h**dim.  Measures that are
atomic are stored on the grid as cells holding mass / h**dim; the explicit
``atoms_to_grid`` / ``grid_to_atoms`` helpers convert between the two forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridMismatchError, ParameterDomainError
from .grid import Grid
from .potential import SampledPotential


@lru_cache(maxsize=32)
def wavenumbers(grid: Grid) -> np.ndarray:
    """Reduced wavenumber set: one representative of each pair {k, -k} mod n.

    Returns an int array of shape (m, dim), sorted, starting with k = 0.  In
    1D this is 0 <= k <= n // 2.
    """
    n = grid.n
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    neg = (-idx) % n
    keep = []
    for a, b in zip(idx, neg):
        if tuple(a) <= tuple(b):
            keep.append(a)
    out = np.array(keep, dtype=int)
    out.setflags(write=False)
    return out


def self_conjugate(grid: Grid) -> np.ndarray:
    """Boolean mask over ``wavenumbers(grid)``: True where k == -k mod n."""
    ks = wavenumbers(grid)
    return np.all((2 * ks) % grid.n == 0, axis=1)


def _fft(grid: Grid, f) -> np.ndarray:
    return np.fft.fftn(grid.check(f)) * grid.cell_volume


def _at_wavenumbers(grid: Grid, full: np.ndarray) -> np.ndarray:
    ks = wavenumbers(grid)
    return full[tuple(ks.T)]


def cosine_coefficients(f, grid: Grid) -> np.ndarray:
    """h**dim * sum_j f_j cos(2 pi k . x_j) over the reduced wavenumber set."""
    return _at_wavenumbers(grid, _fft(grid, f).real)


def sine_coefficients(f, grid: Grid) -> np.ndarray:
    """h**dim * sum_j f_j sin(2 pi k . x_j) over the reduced wavenumber set."""
    return _at_wavenumbers(grid, -_fft(grid, f).imag)


def full_cosine_coefficients(f, grid: Grid) -> np.ndarray:
    """Cosine coefficients for every wavenumber on the grid (shape grid.shape)."""
    return _fft(grid, f).real


def synthesize_cosine(coeffs, grid: Grid) -> np.ndarray:
    """Grid function sum_{k in Z^d mod n} c(k) cos(2 pi k.x) from reduced coefficients.

    ``coeffs`` is aligned with ``wavenumbers(grid)``; the value at -k is
    implied by symmetry.  This inverts ``cosine_coefficients`` on even data.
    """
    ks = wavenumbers(grid)
    c = np.asarray(coeffs, dtype=float)
    spec = np.zeros(grid.shape)
    spec[tuple(ks.T)] = c
    spec[tuple(((-ks) % grid.n).T)] = c
    return np.real(np.fft.ifftn(spec)) * grid.size


@dataclass(frozen=True)
class Density:
    """Non-negative grid function with unit quadrature mass."""

    grid: Grid
    values: np.ndarray

    @property
    def mass(self) -> float:
        return self.grid.integrate(self.values)

    @property
    def cell_masses(self) -> np.ndarray:
        return self.values * self.grid.cell_volume

    def check(self, tol=1e-10):
        if np.min(self.values) < 0:
            raise ParameterDomainError(f"density has negative value {np.min(self.values):.3g}")
        if abs(self.mass - 1.0) > tol:
            raise ParameterDomainError(f"density mass {self.mass!r} differs from 1")
        return self

    @classmethod
    def uniform(cls, grid: Grid) -> "Density":
        return cls(grid, np.ones(grid.shape))

    @classmethod
    def from_atoms(cls, grid: Grid, atoms) -> "Density":
        return cls(grid, atoms_to_grid(grid, atoms))

    def atoms(self, min_mass=0.0):
        return grid_to_atoms(self.grid, self.values, min_mass)


@dataclass(frozen=True)
class Correlogram:
    """Autocorrelation-like grid function (candidate element of the relaxed cone)."""

    grid: Grid
    values: np.ndarray

    @property
    def mass(self) -> float:
        return self.grid.integrate(self.values)

    @property
    def cell_masses(self) -> np.ndarray:
        return self.values * self.grid.cell_volume

    @property
    def cosine_coeffs(self) -> np.ndarray:
        return cosine_coefficients(self.values, self.grid)

    def as_density(self) -> Density:
        return Density(self.grid, np.clip(self.values, 0.0, None))

    def atoms(self, min_mass=0.0):
        return grid_to_atoms(self.grid, self.values, min_mass)

    def cone_residuals(self) -> dict:
        """Worst violations of non-negativity, symmetry, cosine signs and mass."""
        vals = self.values
        scale = max(float(np.max(np.abs(vals))), 1e-300)
        cc = self.cosine_coeffs
        return {
            "min_value": float(np.min(vals)) / scale,
            "asymmetry": float(np.max(np.abs(vals - self.grid.reflect(vals)))) / scale,
            "min_cosine": float(np.min(cc[1:])) if cc.size > 1 else 0.0,
            "mass_error": abs(self.mass - 1.0),
        }

    def in_cone(self, value_tol=1e-10, sym_tol=1e-10, cos_tol=1e-8, mass_tol=1e-8) -> bool:
        r = self.cone_residuals()
        return (
            r["min_value"] >= -value_tol
            and r["asymmetry"] <= sym_tol
            and r["min_cosine"] >= -cos_tol
            and r["mass_error"] <= mass_tol
        )


def atoms_to_grid(grid: Grid, atoms) -> np.ndarray:
    """Atoms given as (index, mass) pairs -> grid values mass / h**dim."""
    vals = np.zeros(grid.shape)
    for index, mass in atoms:
        idx = tuple(np.atleast_1d(index) % grid.n)
        vals[idx] += mass / grid.cell_volume
    return vals


def grid_to_atoms(grid: Grid, values, min_mass=0.0):
    """Cells with mass above ``min_mass`` as a list of (index tuple, mass)."""
    masses = np.asarray(values) * grid.cell_volume
    out = []
    for idx in zip(*np.nonzero(masses > min_mass)):
        out.append((tuple(int(i) for i in idx), float(masses[idx])))
    return out


def autocorrelation(rho, grid: Grid | None = None) -> Correlogram:
    """F(s_i) = h**dim * sum_j rho_j rho_{j+i}, via the power spectrum."""
    if isinstance(rho, Density):
        grid, vals = rho.grid, rho.values
    else:
        vals = grid.check(rho)
    spec = np.fft.fftn(vals)
    F = np.real(np.fft.ifftn(spec.conj() * spec)) * grid.cell_volume
    # F is even by construction; kill the roundoff-level odd part
    F = 0.5 * (F + grid.reflect(F))
    return Correlogram(grid, F)


def cross_correlation(a, b, grid: Grid) -> np.ndarray:
    """c_j = h**dim * sum_i a_{j+i} b_i (periodic)."""
    A = np.fft.fftn(grid.check(a))
    B = np.fft.fftn(grid.check(b))
    return np.real(np.fft.ifftn(A * B.conj())) * grid.cell_volume


def convolve(a, b, grid: Grid) -> np.ndarray:
    """c_j = h**dim * sum_i a_{j-i} b_i (periodic)."""
    A = np.fft.fftn(grid.check(a))
    B = np.fft.fftn(grid.check(b))
    return np.real(np.fft.ifftn(A * B)) * grid.cell_volume


def _same_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def pairwise_energy(rho, W: SampledPotential) -> float:
    """1/2 <rho o rho, W> with midpoint quadrature."""
    if isinstance(rho, Density):
        _same_grid(rho.grid, W.grid)
        vals = rho.values
    else:
        vals = W.grid.check(rho)
    F = autocorrelation(vals, W.grid).values
    return correlogram_energy(F, W)


def correlogram_energy(F, W: SampledPotential) -> float:
    """1/2 <F, W> for any grid function F."""
    vals = F.values if isinstance(F, Correlogram) else W.grid.check(F)
    return 0.5 * W.grid.cell_volume * float(np.sum(vals * W.values))


def discrete_energy_of_atoms(positions, W: SampledPotential) -> float:
    """(1 / 2N^2) sum_i sum_j W(x_i - x_j) with periodic differences."""
    x = np.asarray(positions, dtype=float)
    if W.grid.dim == 1:
        x = x.reshape(-1)
        diff = x[:, None] - x[None, :]
    else:
        x = x.reshape(-1, W.grid.dim)
        diff = x[:, None, :] - x[None, :, :]
    N = x.shape[0]
    return float(np.sum(W.evaluate(diff))) / (2.0 * N * N)
