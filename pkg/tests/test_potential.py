import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairrelax.errors import ParameterDomainError, ShapeError
from pairrelax.grid import Grid
from pairrelax.potential import (
    PotentialSpec,
    build_potential,
    check_potential_properties,
    closed_form,
    load_tabulated,
    normalize_mean_zero,
    save_tabulated,
    symmetrize,
    tabulated_potential,
)

ALL_1D = [
    PotentialSpec("morse1d"),
    PotentialSpec("local", {"lc": 0.1}),
    PotentialSpec("powerlaw"),
    PotentialSpec("multiscale"),
]


def test_grid_spacing_derived_from_n():
    g = Grid(1, 800)
    assert g.h * g.n == 1.0
    assert g.axis()[-1] == pytest.approx(799 / 800)
    with pytest.raises(ParameterDomainError):
        Grid(3, 4)
    with pytest.raises(ParameterDomainError):
        Grid(1, 0)


def test_reflect_maps_j_to_minus_j():
    g = Grid(1, 5)
    assert g.reflect(np.arange(5)).tolist() == [0, 4, 3, 2, 1]
    g2 = Grid(2, 3)
    v = np.arange(9).reshape(3, 3)
    r = g2.reflect(v)
    for i in range(3):
        for j in range(3):
            assert r[i, j] == v[(-i) % 3, (-j) % 3]


def test_orbits_pair_mirror_points():
    label, reps = Grid(1, 4).orbits
    assert reps.tolist() == [0, 1, 2]
    assert label.tolist() == [0, 1, 2, 1]


@pytest.mark.parametrize("spec", ALL_1D + [PotentialSpec("morse2d")], ids=lambda s: s.family)
@pytest.mark.parametrize("n", [16, 37, 64])
def test_built_potentials_satisfy_invariants(spec, n):
    g = Grid(spec.dim, n if spec.dim == 1 else min(n, 24))
    W = build_potential(spec, g)
    assert W.mean_zero and W.mirror_symmetric
    assert abs(g.integrate(W.values)) <= 1e-12 * W.scale
    assert np.array_equal(W.values, g.reflect(W.values))


def test_morse_samples_are_resolution_independent():
    spec = PotentialSpec("morse1d")
    a = build_potential(spec, Grid(1, 400))
    b = build_potential(spec, Grid(1, 800))
    raw_a = a.values + a.offset
    raw_b = b.values + b.offset
    np.testing.assert_allclose(raw_a, raw_b[::2], rtol=0, atol=1e-12 * a.scale)


def test_morse_is_repulsive_at_short_range():
    # for G < 1 the potential falls off the origin: a local maximum at 0
    W = build_potential(PotentialSpec("morse1d", {"sigma": 0.1, "L": 1.2, "G": 0.9}), Grid(1, 800))
    assert W.values[1] < W.values[0]
    assert W.values[-1] < W.values[0]
    _, slope = closed_form(W.spec)(np.array([1e-9]))
    assert slope[0] == pytest.approx((0.9 - 1) / 0.1, rel=1e-6)


def test_local_vanishes_beyond_lc():
    W = build_potential(PotentialSpec("local", {"lc": 0.1}), Grid(1, 360))
    x = Grid(1, 360).axis()
    far = (x > 0.1 + 1e-12) & (x < 0.9 - 1e-12)
    np.testing.assert_allclose(W.values[far], -W.offset, atol=1e-15)
    # psi(0) = 0.1 at the origin, before the shift
    assert W.values[0] + W.offset == pytest.approx(0.1)


def test_local_continuity_proxy_bounded():
    g = Grid(1, 360)
    W = build_potential(PotentialSpec("local", {"lc": 0.1}), g)
    rep = check_potential_properties(W)
    assert rep.ok
    # steepest piece of psi has slope 10 per unit of x / lc
    assert rep.continuity_jump * W.scale <= 10 * g.h / 0.1 + 1e-12


def test_multiscale_triangle_part_has_nonnegative_modes():
    from pairrelax.certify import exact_case_constant

    W = build_potential(PotentialSpec("multiscale", {"amplitude": 0.0}), Grid(1, 1024))
    assert exact_case_constant(W)
    full = build_potential(PotentialSpec("multiscale"), Grid(1, 1024))
    assert not exact_case_constant(full)


def test_powerlaw_literal_form_is_purely_repulsive():
    from pairrelax.certify import exact_case_constant

    W = build_potential(PotentialSpec("powerlaw", {"coef": 1 / 3.5}), Grid(1, 1000))
    assert exact_case_constant(W)
    assert not exact_case_constant(build_potential(PotentialSpec("powerlaw"), Grid(1, 1000)))


@pytest.mark.parametrize(
    "family,params",
    [("morse1d", {"G": 0.0}), ("morse1d", {"L": -1}), ("morse2d", {"G": -0.5}), ("local", {"lc": 0}),
     ("local", {"lc": 1.5}), ("powerlaw", {"eps": 0}), ("nonsense", {})],
)
def test_invalid_parameters_rejected(family, params):
    with pytest.raises(ParameterDomainError):
        PotentialSpec(family, params)


def test_dimension_mismatch():
    with pytest.raises(ShapeError):
        build_potential(PotentialSpec("morse2d"), Grid(1, 16))
    with pytest.raises(ShapeError):
        build_potential(PotentialSpec("morse1d"), Grid(2, 16))


def test_zero_tabulated():
    W = tabulated_potential(np.zeros(8))
    assert W.mean_zero and np.all(W.values == 0)


def test_symmetrize_example():
    W = tabulated_potential([0.0, 1.0, 0.0, 3.0], symmetrize_input=False, normalize=False)
    assert not W.mirror_symmetric
    S = symmetrize(W)
    assert S.values.tolist() == [0.0, 2.0, 0.0, 2.0]
    assert S.mirror_symmetric
    assert symmetrize(S).values.tolist() == S.values.tolist()


def test_normalize_examples():
    W = tabulated_potential([1.0, 2.0, 3.0, 4.0], symmetrize_input=False)
    assert W.values.tolist() == [-1.5, -0.5, 0.5, 1.5]
    c = normalize_mean_zero(tabulated_potential(np.full(6, 2.5), normalize=False))
    assert np.all(c.values == 0)
    x = np.arange(32) / 32
    cosW = tabulated_potential(np.cos(2 * np.pi * x), normalize=False)
    np.testing.assert_allclose(normalize_mean_zero(cosW).values, cosW.values, atol=1e-12)


def test_asymmetric_input_detected():
    W = tabulated_potential([0.0, 1.0, 0.0, 3.0], symmetrize_input=False, normalize=False)
    rep = check_potential_properties(W)
    assert not rep.mirror_symmetric
    assert rep.max_asymmetry == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=40))
def test_symmetrize_is_a_mean_preserving_projection(vals):
    W = tabulated_potential(vals, symmetrize_input=False, normalize=False)
    S = symmetrize(W)
    np.testing.assert_allclose(symmetrize(S).values, S.values, rtol=0, atol=0)
    assert np.mean(S.values) == pytest.approx(np.mean(W.values), abs=1e-12)


def test_tabulated_roundtrip(tmp_path):
    W = build_potential(PotentialSpec("morse2d"), Grid(2, 8))
    path = tmp_path / "w.txt"
    save_tabulated(W, path)
    V = load_tabulated(path)
    np.testing.assert_allclose(V.values, W.values, atol=1e-15)
    path.write_text("1 4\n1 2 3\n")
    with pytest.raises(ShapeError):
        load_tabulated(path)
    path.write_text("1 2\n1 x\n")
    with pytest.raises(ShapeError):
        load_tabulated(path)


def test_closed_form_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    for spec in ALL_1D:
        f = closed_form(spec)
        x = rng.uniform(0.02, 0.98, 50)
        # stay away from the kinks of the piecewise families
        _, g = f(x)
        eps = 1e-7
        fd = (f(x + eps)[0] - f(x - eps)[0]) / (2 * eps)
        kink = np.zeros_like(x, dtype=bool)
        if spec.family == "local":
            knots = np.array([0.05, 0.06, 0.09, 0.1])
            kink = np.min(np.abs(np.minimum(x, 1 - x)[:, None] - knots[None, :]), axis=1) < 1e-5
        if spec.family == "multiscale":
            kink = np.abs(np.minimum(x, 1 - x) - 0.1) < 1e-5
        np.testing.assert_allclose(g[~kink], fd[~kink], rtol=1e-5, atol=1e-5)


def test_interpolated_potential_reproduces_samples():
    g = Grid(2, 6)
    rng = np.random.default_rng(0)
    W = tabulated_potential(rng.normal(size=(6, 6)), g)
    pts = np.stack(g.coordinates(), axis=-1)
    np.testing.assert_allclose(W.evaluate(pts), W.values, atol=1e-14)
