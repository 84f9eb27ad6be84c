"""Optimality guarantees, first-order residuals and exactness tests."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import CertificateInconsistent
from .potential import SampledPotential
from .spectral import Correlogram, Density, autocorrelation, convolve, cosine_coefficients, pairwise_energy

ALPHA_SLACK = 1e-6
EXACT_TOL = 1e-12


def guarantee_alpha(E_candidate: float, E_R: float, atol: float = 1e-9) -> float:
    """alpha = E(rho*) / E_R with nu = 0, clamped to [0, 1].

    ``atol`` is the absolute energy resolution (solver tolerance times the
    potential scale).  A lower bound that is zero to within ``atol`` certifies
    alpha = 1 when the candidate also has zero energy.
    """
    if E_candidate < E_R - atol:
        ratio = E_candidate / E_R if E_R < 0 else float("inf")
        if E_R >= 0 or ratio > 1.0 + ALPHA_SLACK:
            raise CertificateInconsistent(
                f"candidate energy {E_candidate!r} lies below the lower bound {E_R!r}", E_R - E_candidate
            )
    if abs(E_R) <= atol:
        return 1.0 if abs(E_candidate - E_R) <= atol else 0.0
    if E_R > 0:
        raise CertificateInconsistent(f"lower bound {E_R!r} is positive; the constant density has energy 0", E_R)
    alpha = E_candidate / E_R
    if alpha > 1.0 + ALPHA_SLACK:
        raise CertificateInconsistent(f"alpha {alpha!r} exceeds 1", alpha - 1.0)
    return float(min(max(alpha, 0.0), 1.0))


@dataclass
class FirstOrderReport:
    mu: float
    on_support_residual: float  # max over supp(rho) of |Lambda - 2 mu|
    off_support_slack: float  # min outside supp(rho) of Lambda - 2 mu (should be >= 0)
    support_cells: int
    Lambda: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("Lambda")
        return d


def first_order_report(rho, W: SampledPotential, support_threshold: float = 1e-3) -> FirstOrderReport:
    """Lambda = W * rho compared against 2 mu with mu = E(rho)."""
    vals = rho.values if isinstance(rho, Density) else W.grid.check(rho)
    Lam = convolve(W.values, vals, W.grid)
    mu = pairwise_energy(vals, W)
    supp = vals > support_threshold * np.max(vals)
    on = float(np.max(np.abs(Lam[supp] - 2 * mu))) if np.any(supp) else 0.0
    off = float(np.min(Lam[~supp] - 2 * mu)) if np.any(~supp) else 0.0
    return FirstOrderReport(mu, on, off, int(supp.sum()), Lam)


@dataclass
class SupportVerdict:
    holds: bool
    leak_mass: float  # mass of F_rho outside supp(F_R)
    wplus_overlap: float  # h^d sum W+ F_rho
    support_match: float  # fraction of supp(F_rho) cells inside supp(F_R)
    mass_match: float  # fraction of F_rho mass inside supp(F_R)

    @property
    def label(self) -> str:
        return "Holds" if self.holds else f"Fails({self.leak_mass:.3g})"

    def to_dict(self) -> dict:
        return {**asdict(self), "label": self.label}


def convex_support_check(rho, F_R: Correlogram, Wplus, tau_supp: float = 1e-3, tau_leak: float = 1e-3) -> SupportVerdict:
    """Is supp(rho o rho) inside supp(F_R)?  Then E is convex on the relevant set."""
    grid = F_R.grid
    vals = rho.values if isinstance(rho, Density) else grid.check(rho)
    F_rho = autocorrelation(vals, grid).values
    in_R = F_R.values > tau_supp * np.max(F_R.values)
    in_rho = F_rho > tau_supp * np.max(F_rho)
    leak = grid.integrate(np.clip(F_rho[~in_R], 0.0, None))
    overlap = grid.integrate(np.asarray(Wplus) * F_rho)
    match = float(np.count_nonzero(in_rho & in_R)) / max(int(np.count_nonzero(in_rho)), 1)
    mass_match = grid.integrate(F_rho[in_R]) / max(grid.integrate(F_rho), 1e-300)
    return SupportVerdict(bool(leak <= tau_leak), float(leak), float(overlap), match, float(mass_match))


def exact_case_delta(W: SampledPotential) -> bool:
    """A single atom is optimal iff W(0) <= W everywhere."""
    w0 = W.values[(0,) * W.grid.dim]
    return bool(np.all(w0 <= W.values + EXACT_TOL * W.scale))


def exact_case_constant(W: SampledPotential) -> bool:
    """The constant density is optimal iff every non-zero cosine mode of W is >= 0."""
    c = cosine_coefficients(W.values, W.grid)[1:]
    return bool(np.all(c >= -EXACT_TOL * W.scale))


@dataclass
class CertificateReport:
    alpha: float
    energy_candidate: float
    E_R: float
    kl: float
    lambda_min_off_support: float
    lambda_residual_on_support: float
    prop_supp_verdict: str
    support: dict
    complementarity: dict
    exactness: str  # DeltaExact / ConstantExact / LatticeExact / None

    def to_dict(self) -> dict:
        return asdict(self)

    def save_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))
