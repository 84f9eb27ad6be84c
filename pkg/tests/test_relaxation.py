import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cosine_potential, random_symmetric_potential
from pairrelax.errors import NotAtomic, SolverError
from pairrelax.grid import Grid
from pairrelax.potential import PotentialSpec, build_potential, tabulated_potential
from pairrelax.relaxation import (
    Thresholds,
    classify_solution,
    complementarity_report,
    lattice_self_correlation_error,
    regrid_for_lattice,
    solve_relaxation,
)
from pairrelax.spectral import Correlogram, atoms_to_grid, autocorrelation, pairwise_energy


def lattice(n, count, dim=1):
    idx = [round(n * i / count) for i in range(count)]
    if dim == 1:
        return Correlogram(Grid(1, n), atoms_to_grid(Grid(1, n), [(i, 1.0 / count) for i in idx]))
    g = Grid(2, n)
    return Correlogram(g, atoms_to_grid(g, [((a, b), 1.0 / count**2) for a in idx for b in idx]))


def test_classify_constant_and_delta():
    g = Grid(1, 40)
    assert classify_solution(Correlogram(g, np.ones(40))).tag == "Constant"
    kind = classify_solution(lattice(40, 1))
    assert kind.tag == "SingleDelta" and kind.n_atoms == 1


@pytest.mark.parametrize("n,count", [(360, 10), (364, 10), (200, 3), (97, 4)])
def test_classify_1d_lattices(n, count):
    kind = classify_solution(lattice(n, count))
    assert kind.tag == "DiracLattice"
    assert kind.n_atoms == count
    assert kind.spacing[0] == pytest.approx(1 / count)


def test_classify_2d_lattice():
    kind = classify_solution(lattice(20, 3, dim=2))
    assert kind.tag == "DiracLattice" and kind.n_atoms == 9


def test_classify_non_lattice_and_continuous():
    g = Grid(1, 100)
    F = atoms_to_grid(g, [(0, 0.5), (10, 0.25), (90, 0.25)])
    assert classify_solution(Correlogram(g, F)).tag == "AtomicNonLattice"
    bump = np.zeros(100)
    bump[:15] = 1.0
    bump[-14:] = 1.0
    bump /= g.integrate(bump)
    assert classify_solution(Correlogram(g, bump)).tag == "Continuous"


def test_smeared_atoms_still_count():
    g = Grid(1, 120)
    F = np.zeros(120)
    for c in range(0, 120, 30):
        F[c] += 0.6
        F[(c + 1) % 120] += 0.2
        F[(c - 1) % 120] += 0.2
    F /= g.integrate(F)
    assert classify_solution(Correlogram(g, F)).tag == "DiracLattice"
    # a four-cell smear exceeds the atom width
    assert classify_solution(Correlogram(g, F), Thresholds(atom_cells=2)).tag == "Continuous"


def test_regrid_examples():
    assert regrid_for_lattice(lattice(364, 10)).n == 360
    assert regrid_for_lattice(lattice(64, 4)).n == 64
    assert regrid_for_lattice(lattice(20, 3, dim=2)).n == 21
    with pytest.raises(NotAtomic):
        regrid_for_lattice(Correlogram(Grid(1, 10), np.ones(10)))


def test_lattice_self_correlation():
    assert lattice_self_correlation_error(lattice(360, 10)) < 1e-14
    assert lattice_self_correlation_error(lattice(364, 10)) > 1e-3


def test_local_potential_gives_ten_atom_lattice():
    W = build_potential(PotentialSpec("local", {"lc": 0.1}), Grid(1, 360))
    sol = solve_relaxation(W)
    assert sol.kind.tag == "DiracLattice" and sol.kind.n_atoms == 10
    np.testing.assert_allclose([a.mass for a in sol.kind.atoms], 0.1, atol=1e-6)
    assert sol.E_R == pytest.approx(0.5 * sum(0.1 * W.values[36 * i] for i in range(10)), abs=1e-8)


def test_exact_cases_are_snapped():
    plus = solve_relaxation(cosine_potential(8, [1.0]))
    assert plus.snapped == "constant" and plus.kind.tag == "Constant"
    assert plus.E_R == pytest.approx(0.0, abs=1e-9)
    minus = solve_relaxation(cosine_potential(8, [-1.0]))
    assert minus.snapped == "delta" and minus.kind.tag == "SingleDelta"
    raw = solve_relaxation(cosine_potential(8, [1.0]), snap_exact=False)
    assert raw.snapped is None


def test_zero_potential_is_degenerate_but_solves():
    sol = solve_relaxation(tabulated_potential(np.zeros(6)))
    assert sol.stats["degenerate"] and sol.E_R == 0.0 and sol.kind.tag == "Constant"


def test_solver_failure_is_raised():
    W = build_potential(PotentialSpec("morse1d"), Grid(1, 100))
    with pytest.raises(SolverError):
        solve_relaxation(W, max_iter=2)


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 30), st.integers(0, 2**32 - 1))
def test_relaxation_is_a_lower_bound(n, seed):
    rng = np.random.default_rng(seed)
    W = random_symmetric_potential(rng, n)
    sol = solve_relaxation(W)
    for _ in range(5):
        rho = rng.random(n) ** 3
        rho /= W.grid.integrate(rho)
        assert pairwise_energy(rho, W) >= sol.E_R - 1e-8 * W.scale
    assert sol.E_R <= 1e-8 * W.scale  # the constant is always feasible


@settings(max_examples=15, deadline=None)
@given(st.integers(4, 30), st.integers(0, 2**32 - 1))
def test_solution_lies_in_cone_and_complements_dual(n, seed):
    W = random_symmetric_potential(np.random.default_rng(seed), n)
    sol = solve_relaxation(W, snap_exact=False)
    assert sol.F_R.in_cone(value_tol=1e-8, cos_tol=1e-7, mass_tol=1e-7)
    rep = complementarity_report(sol.F_lp, sol.decomp, W.scale)
    assert rep.passed


def test_morse_energy_is_stable_under_refinement():
    spec = PotentialSpec("morse1d")
    E = [solve_relaxation(build_potential(spec, Grid(1, n))).E_R for n in (200, 400)]
    assert E[0] == pytest.approx(E[1], rel=2e-2)


def test_resolve_is_idempotent(tmp_path):
    W = build_potential(PotentialSpec("morse1d"), Grid(1, 100))
    a, b = solve_relaxation(W), solve_relaxation(W)
    a.save_json(tmp_path / "a.json")
    b.save_json(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    d = json.loads((tmp_path / "a.json").read_text())
    assert d["grid"] == {"dim": 1, "n": 100}
    assert "wall_time" not in d["stats"]


def test_autocorrelation_of_relaxed_lattice_is_itself():
    W = build_potential(PotentialSpec("local", {"lc": 0.1}), Grid(1, 360))
    F = solve_relaxation(W).F_R
    FF = autocorrelation(np.clip(F.values, 0, None), F.grid)
    assert np.max(np.abs(FF.cell_masses - F.cell_masses)) < 1e-6
