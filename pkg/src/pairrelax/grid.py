"""Equispaced periodic grids on the unit box."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterDomainError, ShapeError


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` points per axis on the periodic box [0, 1)^dim.

    The spacing is always derived from ``n``; it is never stored separately.
    """

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ParameterDomainError(f"grid dimension must be 1 or 2, got {self.dim}")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterDomainError(f"points per axis must be a positive integer, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def cell_volume(self) -> float:
        """Quadrature weight h**dim of the midpoint rule."""
        return self.h**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    def axis(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape ``self.shape`` (``indexing='ij'``)."""
        return tuple(np.meshgrid(*([self.axis()] * self.dim), indexing="ij"))

    def check(self, values, name="values") -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.shape != self.shape:
            if arr.size == self.size:
                return arr.reshape(self.shape)
            raise ShapeError(f"{name} has shape {arr.shape}, grid expects {self.shape}")
        return arr

    def reflect(self, values: np.ndarray) -> np.ndarray:
        """Return v(-x): index j -> (n - j) mod n on every axis simultaneously."""
        out = np.asarray(values)
        for ax in range(self.dim):
            out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
        return out

    def integrate(self, values) -> float:
        return float(self.cell_volume * np.sum(values))

    def periodic_distance(self, index) -> np.ndarray:
        """Signed representative of grid offsets in (-n/2, n/2] times h."""
        idx = np.asarray(index) % self.n
        signed = np.where(idx > self.n / 2, idx - self.n, idx)
        return signed * self.h

    @cached_property
    def orbits(self) -> tuple[np.ndarray, np.ndarray]:
        """Mirror orbits {j, -j} of the flat grid indices.

        Returns ``(label, representative)``: ``label[j]`` is the orbit number of
        flat index ``j`` and ``representative[o]`` the smallest flat index in
        orbit ``o``.  Orbits are numbered in increasing order of representative.
        """
        flat = np.arange(self.size)
        mirror = self.reflect(flat.reshape(self.shape)).ravel()
        rep = np.minimum(flat, mirror)
        reps, label = np.unique(rep, return_inverse=True)
        return label, reps
