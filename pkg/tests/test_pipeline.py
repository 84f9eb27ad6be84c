from types import SimpleNamespace

import numpy as np
import pytest

from conftest import cosine_potential
from pairrelax.grid import Grid
from pairrelax.pipeline import PipelineOptions, exact_candidate, ideal_lattice, run_pipeline
from pairrelax.potential import PotentialSpec, build_potential
from pairrelax.relaxation import Atom, SolutionKind, solve_relaxation
from pairrelax.spectral import autocorrelation


def test_ideal_lattice_is_self_correlating():
    W = build_potential(PotentialSpec("local", {"lc": 0.1}), Grid(1, 120))
    relax = solve_relaxation(W)
    rho = ideal_lattice(relax)
    assert rho is not None and rho.mass == pytest.approx(1.0)
    np.testing.assert_allclose(autocorrelation(rho).cell_masses, rho.cell_masses, atol=1e-15)
    res = run_pipeline(W, relax=relax)
    assert res.certificate.exactness == "LatticeExact" and res.recovery is None
    assert res.alpha == pytest.approx(1.0, abs=1e-6)


def test_lattice_off_the_grid_has_no_ideal_candidate():
    atoms = [Atom((i / 3,), 1 / 3, 1) for i in range(3)]
    kind = SolutionKind("DiracLattice", atoms, [1 / 3])
    # three atoms do not fit on 100 points
    assert ideal_lattice(SimpleNamespace(grid=Grid(1, 100), kind=kind)) is None
    on_grid = ideal_lattice(SimpleNamespace(grid=Grid(1, 99), kind=kind))
    assert np.count_nonzero(on_grid.values) == 3


@pytest.mark.parametrize("coeffs,label", [([1.0], "ConstantExact"), ([-1.0], "DeltaExact")])
def test_exact_candidates(coeffs, label):
    res = run_pipeline(cosine_potential(16, coeffs))
    assert res.certificate.exactness == label
    assert res.alpha == 1.0 and res.kl == pytest.approx(0.0, abs=1e-12)


def test_recovery_path_reports_certificate(tmp_path):
    W = build_potential(PotentialSpec("morse1d"), Grid(1, 100))
    res = run_pipeline(W, PipelineOptions(seeds=(0, 1), max_iters=2000))
    assert res.recovery is not None and set(res.recovery.per_seed) == {0, 1}
    assert 0.0 <= res.alpha <= 1.0
    s = res.summary()
    assert s["exactness"] == "None" and s["kind"] == res.relax.kind.tag
    res.certificate.save_json(tmp_path / "c.json")
    assert exact_candidate(res.relax) is None
