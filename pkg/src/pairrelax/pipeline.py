"""Solve, recover and certify in one call."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certify import CertificateReport, convex_support_check, first_order_report, guarantee_alpha
from .lp_core import DEFAULT_MAX_ITER, DEFAULT_TOL
from .potential import SampledPotential
from .recovery import RecoveryResult, clean_target, kl_divergence, recover
from .relaxation import (
    RelaxationSolution,
    Thresholds,
    complementarity_report,
    lattice_self_correlation_error,
    solve_relaxation,
)
from .spectral import Correlogram, Density, autocorrelation, pairwise_energy

LATTICE_TOL = 1e-6


@dataclass
class PipelineOptions:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    seeds: tuple = (0, 1, 2)
    tol1: float = 1e-10
    tol2: float = 1e-8
    max_iters: int = 100_000
    clean_floor: float = 1e-7
    support_threshold: float = 1e-3
    tau_leak: float = 1e-3
    thresholds: Thresholds = field(default_factory=Thresholds)


@dataclass
class PipelineResult:
    relax: RelaxationSolution
    rho: Density
    recovery: RecoveryResult | None
    E_candidate: float
    alpha: float
    kl: float
    certificate: CertificateReport
    target: Correlogram  # cleaned F_R used for recovery and KL

    def summary(self) -> dict:
        return {
            "kind": self.relax.kind.tag,
            "n_atoms": self.relax.kind.n_atoms,
            "E_R": self.relax.E_R,
            "E_candidate": self.E_candidate,
            "alpha": self.alpha,
            "kl": self.kl,
            "exactness": self.certificate.exactness,
        }


def ideal_lattice(relax: RelaxationSolution) -> Density | None:
    """Equal atoms on the grid lattice matching the detected spacing, if the grid admits it.

    Needs every axis count to divide n and every detected atom to sit within
    one cell of a lattice point.  Such a lattice is its own autocorrelation.
    """
    grid = relax.grid
    counts = [max(1, round(1.0 / s)) for s in relax.kind.spacing]
    if any(grid.n % c for c in counts):
        return None
    for atom in relax.kind.atoms:
        for x, c in zip(atom.position, counts):
            off = (x * c) % 1.0
            if min(off, 1.0 - off) / c > grid.h + 1e-12:
                return None
    mass = 1.0 / float(np.prod(counts))
    v = np.zeros(grid.shape)
    idx = np.ix_(*[np.arange(c) * (grid.n // c) for c in counts])
    v[idx] = mass / grid.cell_volume
    return Density(grid, v)


def exact_candidate(relax: RelaxationSolution) -> tuple[Density, str] | None:
    """rho* read off directly when F_R is a delta, the constant or a self-correlating lattice."""
    grid = relax.grid
    tag = relax.kind.tag
    if tag == "Constant":
        return Density.uniform(grid), "ConstantExact"
    if tag == "SingleDelta":
        v = np.zeros(grid.shape)
        v[(0,) * grid.dim] = 1.0 / grid.cell_volume
        return Density(grid, v), "DeltaExact"
    if tag == "DiracLattice":
        ideal = ideal_lattice(relax)
        if ideal is not None:
            return ideal, "LatticeExact"
        target = clean_target(relax.F_R)
        if lattice_self_correlation_error(target) <= LATTICE_TOL:
            return Density(grid, target.values), "LatticeExact"
    return None


def certify_candidate(W: SampledPotential, relax: RelaxationSolution, rho: Density, kl: float,
                      exactness: str, opts: PipelineOptions) -> tuple[float, float, CertificateReport]:
    E = pairwise_energy(rho, W)
    atol = 10.0 * opts.tol * max(W.scale, 1e-300)
    alpha = guarantee_alpha(E, relax.E_R, atol)
    fo = first_order_report(rho, W, opts.support_threshold)
    verdict = convex_support_check(rho, relax.F_R, relax.decomp.Wplus, opts.support_threshold, opts.tau_leak)
    comp = complementarity_report(relax.F_lp, relax.decomp, W.scale, opts.tol)
    report = CertificateReport(
        alpha=alpha,
        energy_candidate=E,
        E_R=relax.E_R,
        kl=kl,
        lambda_min_off_support=fo.off_support_slack,
        lambda_residual_on_support=fo.on_support_residual,
        prop_supp_verdict=verdict.label,
        support=verdict.to_dict(),
        complementarity=comp.to_dict(),
        exactness=exactness,
    )
    return E, alpha, report


def run_pipeline(W: SampledPotential, opts: PipelineOptions | None = None,
                 relax: RelaxationSolution | None = None) -> PipelineResult:
    opts = opts or PipelineOptions()
    if relax is None:
        relax = solve_relaxation(W, opts.tol, opts.max_iter, opts.thresholds)
    target = clean_target(relax.F_R, opts.clean_floor)
    exact = exact_candidate(relax)
    rec = None
    if exact is not None:
        rho, exactness = exact
        kl = kl_divergence(target, autocorrelation(rho))
    else:
        rec = recover(target, opts.seeds, opts.tol1, opts.tol2, opts.max_iters)
        rho, kl, exactness = rec.rho, rec.kl_final, "None"
    E, alpha, report = certify_candidate(W, relax, rho, kl, exactness, opts)
    return PipelineResult(relax, rho, rec, E, alpha, kl, report, target)
