"""N-particle gradient flow of the discrete energy, used to cross-check recovered densities."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from .potential import SampledPotential
from .spectral import Density


@dataclass
class ParticleState:
    positions: np.ndarray  # (N,) in 1D, (N, 2) in 2D, wrapped into [0, 1)
    time: float = 0.0

    @property
    def N(self) -> int:
        return self.positions.shape[0]


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    max_force: float = float("nan")
    steps: int = 0
    rejected: int = 0
    dt_final: float = float("nan")

    @property
    def final(self) -> ParticleState:
        return self.snapshots[-1]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for s in self.snapshots:
                w.writerow([repr(s.time)] + [repr(float(v)) for v in np.ravel(s.positions)])


def _differences(x: np.ndarray) -> np.ndarray:
    d = x[:, None, ...] - x[None, :, ...]
    return d - np.round(d)


def _energy_and_force(x: np.ndarray, W: SampledPotential):
    N = x.shape[0]
    val, grad = W.evaluate_with_gradient(_differences(x))
    energy = float(np.sum(val)) / (2.0 * N * N)
    # self-interaction contributes W'(0) = 0 under the averaged-slope convention,
    # but it is excluded explicitly for tabulated data
    idx = np.arange(N)
    grad = np.array(grad, copy=True)
    grad[idx, idx] = 0.0
    force = -np.sum(grad, axis=1) / (N * N)
    return energy, force


def energy(state_or_positions, W: SampledPotential) -> float:
    x = state_or_positions.positions if isinstance(state_or_positions, ParticleState) else np.asarray(state_or_positions)
    return _energy_and_force(np.asarray(x, dtype=float), W)[0]


def gradient(state_or_positions, W: SampledPotential) -> np.ndarray:
    """Forces -grad_{x_j} E_N = -(1/N^2) sum_{i != j} W'(x_j - x_i)."""
    x = state_or_positions.positions if isinstance(state_or_positions, ParticleState) else np.asarray(state_or_positions)
    return _energy_and_force(np.asarray(x, dtype=float), W)[1]


def _rk4(x, dt, W):
    k1 = _energy_and_force(x, W)[1]
    k2 = _energy_and_force(x + 0.5 * dt * k1, W)[1]
    k3 = _energy_and_force(x + 0.5 * dt * k2, W)[1]
    k4 = _energy_and_force(x + dt * k3, W)[1]
    return np.mod(x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 1.0)


def initial_positions(N: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random(N) if dim == 1 else rng.random((N, dim))


def simulate(W: SampledPotential, N: int, seed: int = 0, dt: float = 1e-2, t_end: float = 1e3,
             snapshot_every: int = 100, x0=None, energy_tol: float = 1e-8, force_tol: float = 0.0) -> Trajectory:
    """Fixed-step RK4 with an energy-decrease guard.

    A step that raises E_N by more than ``energy_tol * |E_N|`` is rejected and
    retried with half the step.  Integration stops at ``t_end`` or once the
    largest force drops below ``force_tol``.
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    x = initial_positions(N, W.grid.dim, seed) if x0 is None else np.mod(np.array(x0, dtype=float), 1.0)
    t = 0.0
    E, F = _energy_and_force(x, W)
    traj = Trajectory(snapshots=[ParticleState(x.copy(), t)], energies=[E])
    step = 0
    h = dt
    while t < t_end - 1e-12 * t_end:
        h_try = min(h, t_end - t)
        x_new = _rk4(x, h_try, W)
        E_new, F_new = _energy_and_force(x_new, W)
        if E_new > E + energy_tol * abs(E) and h_try > 1e-12 * dt:
            h *= 0.5
            traj.rejected += 1
            continue
        x, E, F = x_new, E_new, F_new
        t += h_try
        step += 1
        if step % snapshot_every == 0:
            traj.snapshots.append(ParticleState(x.copy(), t))
            traj.energies.append(E)
        if force_tol > 0 and np.max(np.abs(F)) < force_tol:
            break
    if traj.snapshots[-1].time != t:
        traj.snapshots.append(ParticleState(x.copy(), t))
        traj.energies.append(E)
    traj.max_force = float(np.max(np.abs(F))) if N else 0.0
    traj.steps = step
    traj.dt_final = h
    return traj


def histogram(state, bins: int = 50) -> Density:
    """Normalized particle histogram on a grid of ``bins`` cells per axis."""
    if bins < 1:
        raise ValueError("need at least one bin")
    x = state.positions if isinstance(state, ParticleState) else np.asarray(state)
    dim = 1 if x.ndim == 1 else x.shape[1]
    grid = Grid(dim, bins)
    idx = np.floor(np.mod(x, 1.0) * bins).astype(int) % bins
    counts = np.zeros(grid.shape)
    if dim == 1:
        np.add.at(counts, idx, 1.0)
    else:
        np.add.at(counts, (idx[:, 0], idx[:, 1]), 1.0)
    return Density(grid, counts / (counts.sum() * grid.cell_volume))


def clusters_1d(positions, gap: float = 0.02) -> list[np.ndarray]:
    """Split particles on the unit circle wherever consecutive ones are more than ``gap`` apart."""
    x = np.sort(np.mod(np.asarray(positions, dtype=float), 1.0))
    if x.size == 0:
        return []
    gaps = np.diff(np.concatenate([x, [x[0] + 1.0]]))
    cuts = np.nonzero(gaps > gap)[0]
    if cuts.size == 0:
        return [x]
    # rotate so the first cluster starts right after a cut
    start = (cuts[-1] + 1) % x.size
    xr = np.roll(x, -start)
    xr = np.where(np.arange(x.size) >= x.size - start, xr + 1.0, xr) if start else xr
    g = np.diff(xr)
    pieces = np.split(xr, np.nonzero(g > gap)[0] + 1)
    return pieces


def cluster_width(positions, gap: float = 0.02) -> float:
    """max - min of the most populated cluster, after unwrapping across the seam."""
    pieces = clusters_1d(positions, gap)
    if not pieces:
        return 0.0
    big = max(pieces, key=len)
    return float(big.max() - big.min())


def write_histogram_csv(density: Density, path):
    grid = density.grid
    centers = (np.arange(grid.n) + 0.5) * grid.h
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if grid.dim == 1:
            w.writerow(["center", "density"])
            for c, v in zip(centers, density.values):
                w.writerow([repr(float(c)), repr(float(v))])
        else:
            w.writerow(["center_x", "center_y", "density"])
            for i, cx in enumerate(centers):
                for j, cy in enumerate(centers):
                    w.writerow([repr(float(cx)), repr(float(cy)), repr(float(density.values[i, j]))])
