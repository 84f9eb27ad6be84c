"""Discrete relaxation as a linear program, and a dense interior-point solver.

Variables are the masses carried by mirror orbits {j, -j} of grid cells, so a
feasible point is automatically mirror symmetric and the sine constraints
vanish identically.  With p_o the mass of orbit o the problem reads

    minimize    1/2 sum_o W_o p_o
    subject to  p >= 0,
                sum_o cos(2 pi k . x_o) p_o >= 0    for reduced k != 0,
                sum_o p_o = 1.

Stationarity of the Lagrangian, 1/2 W_o = z_o + sum_k y_k cos(2 pi k.x_o) + mu,
is exactly the dual decomposition W = W+ + K + 2 E_D with W+ = 2 z,
K = 2 sum_k y_k cos(2 pi k.x) and E_D = mu.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import CertificateInconsistent, ParameterDomainError, SolverError
from .grid import Grid
from .potential import SampledPotential
from .spectral import self_conjugate, synthesize_cosine, wavenumbers

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200


class Status(str, Enum):
    OPTIMAL = "Optimal"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class ConicLP:
    grid: Grid
    c: np.ndarray  # objective per orbit, 1/2 W_o
    A_cos: np.ndarray  # (n_modes, n_orbits) cos(2 pi k . x_o)
    mass_row: np.ndarray  # ones
    modes: np.ndarray  # (n_modes, dim) reduced wavenumbers, k != 0
    modes_self_conjugate: np.ndarray
    orbit_label: np.ndarray  # flat grid index -> orbit
    orbit_rep: np.ndarray  # orbit -> representative flat index
    multiplicity: np.ndarray  # cells per orbit (1 or 2)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_modes(self) -> int:
        return self.A_cos.shape[0]

    def cell_weights(self) -> np.ndarray:
        """Quadrature weight h**dim * multiplicity of each orbit variable."""
        return self.multiplicity * self.grid.cell_volume

    def density_to_vars(self, f) -> np.ndarray:
        """Grid density values -> orbit masses (assumes mirror symmetry)."""
        flat = self.grid.check(f).ravel()
        return flat[self.orbit_rep] * self.cell_weights()

    def vars_to_density(self, p) -> np.ndarray:
        """Orbit masses -> grid density values (mass / cell volume)."""
        dens = np.asarray(p) / self.cell_weights()
        return dens[self.orbit_label].reshape(self.grid.shape)

    def vars_to_grid(self, v) -> np.ndarray:
        """Spread a per-orbit quantity to every cell of its orbit."""
        return np.asarray(v)[self.orbit_label].reshape(self.grid.shape)

    def objective(self, p) -> float:
        return float(self.c @ p)


@dataclass
class LPSolution:
    x: np.ndarray  # orbit masses
    objective: float
    dual_nonneg: np.ndarray
    dual_cosine: np.ndarray
    dual_mass: float
    status: Status
    iterations: int
    residuals: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL

    @property
    def dual_objective(self) -> float:
        return self.dual_mass


@dataclass
class DualDecomposition:
    """W = Wplus + K + 2 E_D on the grid."""

    Wplus: np.ndarray
    K: np.ndarray
    K_hat: np.ndarray  # aligned with wavenumbers(grid); entry 0 is k = 0
    E_D: float
    residual: float


def assemble_relaxation(W: SampledPotential, grid: Grid | None = None) -> ConicLP:
    grid = grid or W.grid
    if grid != W.grid:
        raise ParameterDomainError(f"potential lives on {W.grid}, asked to assemble on {grid}")
    if not W.mirror_symmetric:
        raise ParameterDomainError("relaxation needs a mirror-symmetric potential; call symmetrize() first")
    if not W.mean_zero:
        raise ParameterDomainError("relaxation needs a mean-zero potential; call normalize_mean_zero() first")
    label, reps = grid.orbits
    mult = np.bincount(label).astype(float)
    # coordinates of orbit representatives
    rep_idx = np.array(np.unravel_index(reps, grid.shape)).T  # (n_orbits, dim)
    ks = wavenumbers(grid)
    sc = self_conjugate(grid)
    modes, modes_sc = ks[1:], sc[1:]
    phase = 2 * np.pi * (modes @ rep_idx.T % grid.n) / grid.n
    A = np.cos(phase)
    c = 0.5 * W.flat()[reps]
    return ConicLP(
        grid=grid,
        c=c,
        A_cos=A,
        mass_row=np.ones(reps.size),
        modes=modes,
        modes_self_conjugate=modes_sc,
        orbit_label=label,
        orbit_rep=reps,
        multiplicity=mult,
    )


# -- interior point ---------------------------------------------------------


def _factor(M):
    """Cholesky of the normal matrix with escalating diagonal regularization."""
    diag = np.diag(M)
    base = max(float(np.max(diag)), 1e-300)
    for reg in (0.0, 1e-14, 1e-12, 1e-10, 1e-8):
        try:
            return sla.cho_factor(M + reg * base * np.eye(M.shape[0]), check_finite=False)
        except (sla.LinAlgError, ValueError):
            continue
    return None


class _NormalSystem:
    """Normal equations for  A_bar = [[A, -I], [1^T, 0]]  with diagonal scaling D.

    The identity block is never formed; only the (m+1)x(m+1) Schur matrix is.
    """

    def __init__(self, A):
        self.A = A
        self.m, self.n = A.shape

    def apply(self, xp, xs):
        return np.concatenate([self.A @ xp - xs, [xp.sum()]])

    def apply_T(self, lam):
        y, mu = lam[:-1], lam[-1]
        return self.A.T @ y + mu, -y

    def factor(self, dp, ds):
        A = self.A
        AD = A * dp
        M = np.empty((self.m + 1, self.m + 1))
        M[:-1, :-1] = AD @ A.T
        M[:-1, :-1][np.diag_indices(self.m)] += ds
        col = AD.sum(axis=1)
        M[:-1, -1] = col
        M[-1, :-1] = col
        M[-1, -1] = dp.sum()
        return _factor(M)


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def solve_lp(lp: ConicLP, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> LPSolution:
    """Mehrotra predictor-corrector on the standard form of the relaxation.

    Standard form variables are (p, s) with s = A p the cosine slacks; the
    returned duals are in the units of the original objective.
    """
    if tol <= 0:
        raise ParameterDomainError(f"tolerance must be positive, got {tol}")
    A = lp.A_cos
    m, n = A.shape
    if not np.any(lp.c):
        # every feasible point is optimal; the uniform density with zero duals is exact
        return LPSolution(
            x=lp.cell_weights().copy(),
            objective=0.0,
            dual_nonneg=np.zeros(n),
            dual_cosine=np.zeros(m),
            dual_mass=0.0,
            status=Status.OPTIMAL,
            iterations=0,
            residuals={"primal": 0.0, "dual": 0.0, "gap": 0.0, "complementarity": 0.0},
        )
    cscale = float(np.max(np.abs(lp.c)))
    cp = lp.c / cscale
    cs = np.zeros(m)
    b = np.zeros(m + 1)
    b[-1] = 1.0
    sys = _NormalSystem(A)

    # Mehrotra starting point
    fac = sys.factor(np.ones(n), np.ones(m))
    if fac is None:
        raise SolverError("normal matrix singular at start", Status.NUMERICAL_FAILURE, 0)
    lam = sla.cho_solve(fac, b)
    xp, xs = sys.apply_T(lam)
    lam = sla.cho_solve(fac, sys.apply(cp, cs))
    atp, ats = sys.apply_T(lam)
    zp, zs = cp - atp, cs - ats
    dx = max(-1.5 * min(xp.min(), xs.min()), 0.0)
    dz = max(-1.5 * min(zp.min(), zs.min()), 0.0)
    xp, xs, zp, zs = xp + dx, xs + dx, zp + dz, zs + dz
    xz = xp @ zp + xs @ zs
    sx, sz = xp.sum() + xs.sum(), zp.sum() + zs.sum()
    if sz > 0 and sx > 0:
        xp, xs = xp + 0.5 * xz / sz, xs + 0.5 * xz / sz
        zp, zs = zp + 0.5 * xz / sx, zs + 0.5 * xz / sx
    if not (np.all(xp > 0) and np.all(zp > 0) and np.all(xs > 0) and np.all(zs > 0)):
        xp, xs, zp, zs = np.ones(n) / n, np.ones(m), np.ones(n), np.ones(m)
        lam = np.zeros(m + 1)

    N = n + m
    status = Status.MAX_ITERATIONS
    it = 0
    res = {}
    for it in range(1, max_iter + 1):
        rp = b - sys.apply(xp, xs)
        atp, ats = sys.apply_T(lam)
        rdp, rds = cp - atp - zp, cs - ats - zs
        gap = xp @ zp + xs @ zs
        mu = gap / N
        pobj, dobj = cp @ xp, lam[-1]
        res = {
            "primal": float(np.max(np.abs(rp)) / (1.0 + 1.0)),
            "dual": float(max(np.max(np.abs(rdp)), np.max(np.abs(rds), initial=0.0)) / (1.0 + 1.0)),
            "gap": float(abs(pobj - dobj) / (1.0 + abs(pobj))),
            "complementarity": float(gap / (1.0 + abs(pobj))),
        }
        if max(res.values()) <= tol:
            status = Status.OPTIMAL
            break

        dp, ds = xp / zp, xs / zs
        fac = sys.factor(dp, ds)
        if fac is None:
            status = Status.NUMERICAL_FAILURE
            break

        def direction(rcp, rcs):
            # solve  A_bar dx = rp,  A_bar^T dlam + dz = rd,  Z dx + X dz = rc
            tp = dp * (rdp - rcp / xp)
            ts = ds * (rds - rcs / xs)
            dlam = sla.cho_solve(fac, rp + sys.apply(tp, ts))
            gp, gs = sys.apply_T(dlam)
            dxp = dp * (gp + rcp / xp - rdp)
            dxs = ds * (gs + rcs / xs - rds)
            dzp = (rcp - zp * dxp) / xp
            dzs = (rcs - zs * dxs) / xs
            return dxp, dxs, dlam, dzp, dzs

        # predictor
        dxp, dxs, dlam, dzp, dzs = direction(-xp * zp, -xs * zs)
        ap = min(1.0, _max_step(xp, dxp), _max_step(xs, dxs))
        ad = min(1.0, _max_step(zp, dzp), _max_step(zs, dzs))
        mu_aff = ((xp + ap * dxp) @ (zp + ad * dzp) + (xs + ap * dxs) @ (zs + ad * dzs)) / N
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        rcp = -xp * zp - dxp * dzp + sigma * mu
        rcs = -xs * zs - dxs * dzs + sigma * mu
        dxp, dxs, dlam, dzp, dzs = direction(rcp, rcs)
        if not all(np.all(np.isfinite(v)) for v in (dxp, dxs, dlam, dzp, dzs)):
            status = Status.NUMERICAL_FAILURE
            break
        eta = max(0.9, 1.0 - 10.0 * mu)
        ap = min(1.0, eta * _max_step(xp, dxp), eta * _max_step(xs, dxs))
        ad = min(1.0, eta * _max_step(zp, dzp), eta * _max_step(zs, dzs))
        xp, xs = xp + ap * dxp, xs + ap * dxs
        zp, zs = zp + ad * dzp, zs + ad * dzs
        lam = lam + ad * dlam

    log.debug("IPM finished: %s after %d iterations, residuals %s", status.value, it, res)
    return LPSolution(
        x=xp,
        objective=float(lp.c @ xp),
        dual_nonneg=zp * cscale,
        dual_cosine=zs * cscale,
        dual_mass=float(lam[-1] * cscale),
        status=status,
        iterations=it,
        residuals=res,
    )


def extract_dual_decomposition(lp: ConicLP, sol: LPSolution, W: SampledPotential,
                               tol: float = DEFAULT_TOL) -> DualDecomposition:
    """Grid functions W+ >= 0 and K (non-negative cosine modes) plus E_D."""
    if not sol.optimal:
        raise SolverError(f"cannot extract a certificate from a {sol.status.value} solve", sol.status, sol.iterations)
    grid = lp.grid
    Wplus = lp.vars_to_grid(2.0 * sol.dual_nonneg)
    n_full = wavenumbers(grid).shape[0]
    K_hat = np.zeros(n_full)
    K_hat[1:] = sol.dual_cosine * np.where(lp.modes_self_conjugate, 2.0, 1.0)
    K = synthesize_cosine(K_hat, grid)
    E_D = sol.dual_mass
    resid = float(np.max(np.abs(W.values - Wplus - K - 2.0 * E_D)))
    if resid > 10.0 * tol * max(W.scale, 1e-300):
        raise CertificateInconsistent(
            f"dual decomposition identity residual {resid:.3e} exceeds {10 * tol:.1e} * max|W|", resid
        )
    return DualDecomposition(Wplus=Wplus, K=K, K_hat=K_hat, E_D=E_D, residual=resid)


def dump_lp(lp: ConicLP, path):
    """Write the assembled LP as plain text for cross-checking elsewhere.

    Layout: a header ``rows cols``, the objective as ``c j value`` lines,
    constraint triplets ``a i j value`` (rows 0..m-1 are ``>= 0`` cosine rows,
    row m is the ``= 1`` mass row), and ``bound j 0 inf`` for every column.
    """
    m, n = lp.A_cos.shape
    lines = [f"rows {m + 1}", f"cols {n}"]
    lines += [f"c {j} {float(v)!r}" for j, v in enumerate(lp.c)]
    for i in range(m):
        for j in range(n):
            v = lp.A_cos[i, j]
            if v != 0.0:
                lines.append(f"a {i} {j} {float(v)!r}")
    lines += [f"a {m} {j} 1.0" for j in range(n)]
    lines += [f"sense {i} >=" for i in range(m)] + [f"sense {m} ="]
    lines += [f"rhs {i} 0.0" for i in range(m)] + [f"rhs {m} 1.0"]
    lines += [f"bound {j} 0 inf" for j in range(n)]
    Path(path).write_text("\n".join(lines) + "\n")
