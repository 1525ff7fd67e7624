"""Tests for the smooth rigidity diagnostics on toral maps."""

import math

import numpy as np
import pytest

from src.base import (OutsideConeBound, PerturbedToralMap, PlantedConjugateMap, RateTriple, ToralAutomorphism,
                      TrigPolynomial)
from src.config import config
from src.rigidity import (STABLE, UNSTABLE, LeafChart, bunching_check, convergence_scale, derivative_transfer,
                          foliation_holonomy, franks_manning, holonomy_derivative_check, metric_isometry_residual,
                          nonstationary_linearization, pushed_metric, rounding_depth, skew_product_map,
                          t4_skew_periodic_demo, translation_conjugates)

CAT = [[2, 1], [1, 1]]
GOLDEN = (3.0 + math.sqrt(5.0)) / 2.0


@pytest.fixture(autouse=True)
def clean_config():
    config.reset_overrides()
    yield
    config.reset_overrides()


@pytest.fixture
def cat():
    return ToralAutomorphism(CAT)


@pytest.fixture
def perturbed(cat):
    return PerturbedToralMap(cat, TrigPolynomial(2, [([1, 0], [0.01, 0], [0, 0])]))


@pytest.fixture
def planted(cat):
    terms = [([1, 0], [0.02, 0.01], [0, 0]), ([0, 1], [0, 0.015], [0, 0])]
    return PlantedConjugateMap(cat, TrigPolynomial(2, terms))


# =============================================================================
# Bunching
# =============================================================================

def test_bunched_rates():
    report = bunching_check(RateTriple(nu=0.2, gamma=0.9, gamma_hat=1.05), 0.5)
    assert report.holds
    assert report.first == pytest.approx(1.05 * 0.9 * 0.2 ** (1.0 / 3.0))
    assert report.second == pytest.approx(1.05 * 0.9 ** 1.5)
    assert all(margin > 0 for margin in report.margins)


def test_unbunched_rates():
    report = bunching_check(RateTriple(nu=0.2, gamma=0.9, gamma_hat=1.2), 0.5)
    assert not report.holds
    assert report.second > 1.0


@pytest.mark.parametrize("beta", [0.0, 1.5])
def test_bunching_exponent_range(beta):
    with pytest.raises(ValueError):
        bunching_check(RateTriple(nu=0.2, gamma=0.9, gamma_hat=1.05), beta)


# =============================================================================
# Franks-Manning conjugacy
# =============================================================================

def test_conjugacy_of_the_automorphism_is_the_identity(cat):
    h = franks_manning(cat, 8)
    assert h.residual < 1e-12
    X = np.random.default_rng(0).random((5, 2))
    assert np.allclose(h(X), X)


def test_conjugacy_of_a_perturbed_cat_map(perturbed):
    h = franks_manning(perturbed, 16, rng=np.random.default_rng(1))
    assert h.residual < 1e-9
    assert h.refined_residual < 1e-8
    assert np.allclose(h.normalization['normalized'], [0.0, 0.0], atol=1e-12)
    assert h.equivariance_residual(h.grid[:32], 3) < 1e-8


def test_planted_conjugacy_is_recovered(planted):
    h = franks_manning(planted, 16, rng=np.random.default_rng(2))
    assert h.sup_error(planted.conjugacy, h.grid) < 1e-6


def test_derivative_transfer_of_a_planted_conjugacy(planted):
    h = franks_manning(planted, 16, rng=np.random.default_rng(2))
    points = list(np.random.default_rng(4).random((3, 2)))
    report = derivative_transfer(h, points=points)
    assert report.residual < 1e-5
    assert len(report.jacobians) == 3
    assert len(report.ladder) == 3


def test_convergence_scale(cat):
    scale = convergence_scale(cat, TrigPolynomial(2, [([1, 0], [0.01, 0], [0, 0])]), [0.5, 1.0], grid=8)
    assert scale == 1.0


def test_translation_conjugates_of_the_identity_conjugacy(cat):
    h = franks_manning(cat, 8)
    samples = translation_conjugates(h, [0.3, 0.1], [np.array([0.2, 0.4])])
    x, image, derivative = samples[0]
    assert np.allclose(image, [0.5, 0.5])
    assert np.allclose(derivative, np.eye(2), atol=1e-8)
    assert metric_isometry_residual(samples, pushed_metric(h)) < 1e-6
    assert metric_isometry_residual([], pushed_metric(h)) == 0.0


# =============================================================================
# Linearization and foliation holonomy
# =============================================================================

def test_linearization_of_the_automorphism(cat):
    chart = nonstationary_linearization(cat, [0.21, 0.37], UNSTABLE, 0.05, depth=8)
    assert abs(chart.multiplier) == pytest.approx(GOLDEN, rel=1e-9)
    assert chart.residual < 1e-9
    assert chart.derivative_error < 1e-6


@pytest.mark.parametrize("leaf", [UNSTABLE, STABLE])
def test_linearization_of_a_perturbed_map(perturbed, leaf):
    chart = nonstationary_linearization(perturbed, [0.21, 0.37], leaf, 0.05)
    assert chart.residual < 1e-6
    assert chart.derivative_error < 1e-5
    assert chart.uniqueness <= chart.certificate


def test_leaf_chart_rejects_unknown_leaf(cat):
    with pytest.raises(ValueError):
        LeafChart(cat, [0.1, 0.2], 'center', 4)


def test_foliation_holonomy_on_the_same_leaf_is_trivial(perturbed):
    leaf_map = foliation_holonomy(perturbed, [0.21, 0.37], [0.21, 0.37], R=0.02, samples=5)
    assert np.array_equal(leaf_map.sources, leaf_map.targets)
    assert leaf_map.accuracy == 0.0


def test_foliation_holonomy_needs_a_surface():
    with pytest.raises(ValueError):
        foliation_holonomy(skew_product_map(0.05), np.zeros(4), np.full(4, 0.01))


# =============================================================================
# Skew product on T^4
# =============================================================================

def test_skew_product_without_perturbation_is_linear():
    f = skew_product_map(0.0)
    x = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.allclose(f.derivative(x), f.linear_part.matrix)


def test_skew_product_periodic_spectra():
    report = t4_skew_periodic_demo(0.05, 3, conjugators_per_period=1)
    assert report.eigenvalues_match
    assert report.max_relative_error < 1e-8
    assert not report.weakly_irreducible
    assert [row[1] for row in report.rows] == [2, 12, 50]
    assert report.points_checked == 64


def test_holonomy_derivative_ladder(perturbed):
    x = np.array([0.21, 0.37])
    y = perturbed.local_product(x, (x + [0.01, 0.004]) % 1.0)
    report = holonomy_derivative_check(perturbed, x, y)
    assert report.passed
    assert report.holonomy_depth <= rounding_depth(perturbed, perturbed.distance(x, y))
    assert report.deviations[-1] < 1e-6


# =============================================================================
# Cone bound
# =============================================================================

def test_large_perturbation_is_rejected(cat):
    with pytest.raises(OutsideConeBound):
        PerturbedToralMap(cat, TrigPolynomial(2, [([1, 0], [0.1, 0], [0, 0])]))


def test_large_perturbation_can_be_accepted_with_a_warning(cat):
    with pytest.warns(UserWarning, match="cone bound"):
        f = PerturbedToralMap(cat, TrigPolynomial(2, [([1, 0], [0.1, 0], [0, 0])]), strict=False)
    assert f.perturbation_size > f.anosov_bound
