import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from rockrisk.sampling import (DensityKind, DensitySpec, ScenarioSet,
                               corrupt_by_scaling, density_eval, gauss_legendre,
                               inverse_cdf_truncexp, quadrature_scenarios,
                               sample_gaussian_scenarios, sobol_1d)

KINDS = [DensitySpec(DensityKind.TRUNC_EXP), DensitySpec(DensityKind.ALGEBRAIC),
         DensitySpec(DensityKind.MIXTURE)]


def test_density_values_at_zero():
    # high-precision references
    assert density_eval(KINDS[0], 0.0) == pytest.approx(0.2516959137265761, rel=1e-14)
    assert density_eval(KINDS[1], 0.0) == pytest.approx(0.12426698691192236, rel=1e-14)
    assert density_eval(KINDS[2], 0.0) == pytest.approx(
        0.5 * (0.2516959137265761 + 0.12426698691192236), rel=1e-14)


@pytest.mark.parametrize("spec", KINDS, ids=lambda s: s.kind.value)
def test_densities_normalized(spec):
    x, w = gauss_legendre(1000, 0.0, 20.0)
    assert abs(w @ density_eval(spec, x) - 1.0) <= 1e-8
    q, _ = integrate.quad(lambda t: density_eval(spec, t), 0, 20)
    assert q == pytest.approx(1.0, abs=1e-10)


def test_density_outside_support():
    with pytest.raises(ValueError):
        density_eval(KINDS[0], 20.5)
    with pytest.raises(ValueError):
        density_eval(KINDS[0], np.array([1.0, -0.1]))


def test_for_corruption_mapping():
    assert DensitySpec.for_corruption(0).kind is DensityKind.TRUNC_EXP
    assert DensitySpec.for_corruption(1).kind is DensityKind.ALGEBRAIC
    mix = DensitySpec.for_corruption(0.5)
    assert mix.kind is DensityKind.MIXTURE and mix.w == 0.5


def test_quadrature_scenarios():
    s = quadrature_scenarios(15, KINDS[0])
    assert len(s) == 15
    assert s.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert not s.corrupted_mask.any()
    nodes, w = gauss_legendre(15, 0.0, 20.0)
    np.testing.assert_allclose(s.base_measure, w)
    np.testing.assert_allclose(s.base_values, density_eval(KINDS[0], nodes), rtol=1e-6)
    assert quadrature_scenarios(15, KINDS[1]).corrupted_mask.all()


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(5, 0.0, 2.0)
    assert w @ x ** 9 == pytest.approx(2 ** 10 / 10, rel=1e-13)


def test_sobol_prefix():
    np.testing.assert_array_equal(sobol_1d(7), [0.5, 0.25, 0.75, 0.125, 0.625, 0.375, 0.875])


def test_sobol_is_stratified():
    u = np.sort(sobol_1d(2 ** 12 - 1))
    np.testing.assert_allclose(u, np.arange(1, 2 ** 12) / 2 ** 12)


def test_inverse_cdf_median_and_mean():
    assert inverse_cdf_truncexp(0.5) == pytest.approx(2.745727328283309, rel=1e-13)
    v = inverse_cdf_truncexp(sobol_1d(2 ** 14))
    assert v.mean() == pytest.approx(3.864326901873915, abs=2e-3)


@given(st.floats(0.0, 1.0))
def test_inverse_cdf_roundtrip(u):
    x = inverse_cdf_truncexp(u)
    assert 0.0 <= x <= 20.0 + 1e-12
    cdf, _ = integrate.quad(lambda t: density_eval(KINDS[0], t), 0, min(x, 20.0))
    assert cdf == pytest.approx(u, abs=1e-9)


def test_gaussian_scenarios_deterministic():
    a = sample_gaussian_scenarios(50, 4, seed=3)
    b = sample_gaussian_scenarios(50, 4, seed=3)
    c = sample_gaussian_scenarios(50, 4, seed=4)
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)
    assert a.points.shape == (50, 4) and a.weights.sum() == pytest.approx(1.0)


@settings(max_examples=30)
@given(st.integers(1, 80), st.floats(0.0, 1.0))
def test_corruption_counts(n, frac):
    s = sample_gaussian_scenarios(n, 2, seed=0)
    c = corrupt_by_scaling(s, frac)
    m = int(round(frac * n))
    assert c.corrupted_mask.sum() == m
    np.testing.assert_allclose(c.points[:m], 5.0 * s.points[:m])
    np.testing.assert_array_equal(c.points[m:], s.points[m:])
    np.testing.assert_array_equal(c.weights, s.weights)


def test_corruption_fraction_validated():
    with pytest.raises(ValueError):
        corrupt_by_scaling(sample_gaussian_scenarios(4, 1, 0), 1.5)


def test_scenario_validation():
    with pytest.raises(ValueError):
        ScenarioSet(np.zeros(3), [0.5, 0.5, 0.5], np.zeros(3, bool))
    with pytest.raises(ValueError):
        ScenarioSet(np.zeros(3), [0.5, 0.5], np.zeros(3, bool))


def test_csv_roundtrip(tmp_path):
    s = corrupt_by_scaling(sample_gaussian_scenarios(10, 3, seed=5), 0.3)
    s.to_csv(tmp_path / "s.csv")
    r = ScenarioSet.from_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(r.points, s.points)
    np.testing.assert_array_equal(r.weights, s.weights)
    np.testing.assert_array_equal(r.corrupted_mask, s.corrupted_mask)
    q = quadrature_scenarios(7, DensitySpec())
    q.to_csv(tmp_path / "q.csv")
    back = ScenarioSet.from_csv(tmp_path / "q.csv")
    np.testing.assert_array_equal(back.base_measure, q.base_measure)
    np.testing.assert_array_equal(back.points, q.points)


@pytest.mark.parametrize("n", [2, 5, 15])
def test_gauss_legendre_degree(n):
    x, w = gauss_legendre(n, 0.0, 20.0)
    for j in range(2 * n):
        exact = 20.0 ** (j + 1) / (j + 1)
        assert abs(w @ x ** j - exact) <= 1e-12 * exact


def test_corruption_count_is_stable():
    s = sample_gaussian_scenarios(37, 2, seed=1)
    once = corrupt_by_scaling(s, 0.2)
    twice = corrupt_by_scaling(once, 0.2)
    assert once.corrupted_mask.sum() == twice.corrupted_mask.sum() == 7


@pytest.mark.parametrize("level", [0.0, 0.25, 0.5, 1.0])
def test_generated_sets_are_valid(level):
    s = quadrature_scenarios(15, DensitySpec.for_corruption(level))
    assert np.all(s.weights >= 0) and abs(s.weights.sum() - 1) <= 1e-12
