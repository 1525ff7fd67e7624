"""Tests for Lyapunov exponents, dominated splittings and periodic approximation."""

import math

import numpy as np
import pytest

from src.base import PeriodicOrbit, SftBase, SymbolicPoint, enumerate_periodic_orbits, sample_points
from src.cocycle import CocycleSpec, ConstantGenerator, LocallyConstantGenerator
from src.config import config
from src.scenario import build_base, build_cocycle, load_scenario
from src.spectrum import (NoDomination, block_consistency_residual, dominated_splitting, group_exponents,
                          lyapunov_exponents, lyapunov_splitting, periodic_approximation_check,
                          periodic_exponents, restrict_cocycle)


@pytest.fixture(autouse=True)
def clean_config():
    config.reset_overrides()
    yield
    config.reset_overrides()


@pytest.fixture
def base():
    return SftBase([[1, 1], [1, 1]], 0.5)


@pytest.fixture
def diagonal(base):
    return CocycleSpec(base, ConstantGenerator(np.diag([4.0, 1.0, 0.25])))


def test_exponents_of_a_constant_cocycle(base, diagonal):
    x = sample_points(base, np.random.default_rng(2), 1)[0]
    spectrum = lyapunov_exponents(diagonal, x, 50)
    np.testing.assert_allclose(spectrum.exponents, [math.log(4.0), 0.0, -math.log(4.0)], atol=1e-12)
    assert spectrum.multiplicities == (1, 1, 1)


def test_group_exponents_merges_close_values():
    spectrum = group_exponents([0.5, 0.501, -1.0], tol=0.01)
    assert spectrum.distinct == pytest.approx((-1.0, 0.5005))
    assert spectrum.multiplicities == (1, 2)
    assert spectrum.moduli[0] == pytest.approx(math.exp(-1.0))


def test_periodic_exponents_of_a_locally_constant_cocycle(base):
    A = CocycleSpec(base, LocallyConstantGenerator({(0,): np.diag([2.0, 1.0]), (1,): np.diag([8.0, 0.5])}))
    orbit = PeriodicOrbit(SymbolicPoint((0, 1), (), (0, 1), 0), 2)
    assert periodic_exponents(A, orbit) == pytest.approx((math.log(16.0) / 2, math.log(0.5) / 2))


def test_dominated_splitting_of_a_diagonal_cocycle(base, diagonal):
    samples = sample_points(base, np.random.default_rng(3), 4)
    S = dominated_splitting(diagonal, 1, samples, 20)
    assert S.dimensions == (1, 2)
    assert S.tau == pytest.approx(0.25, rel=1e-3)
    assert S.invariance_residual < 1e-6
    fast, slow = S.frames(samples[0])
    assert abs(fast[0, 0]) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(slow[0], 0.0, atol=1e-9)


def test_domination_index_must_be_proper(base, diagonal):
    with pytest.raises(ValueError):
        dominated_splitting(diagonal, 3, sample_points(base, np.random.default_rng(0), 1), 10)


def test_rotation_has_no_dominated_splitting(base):
    angle = 0.7
    A = CocycleSpec(base, ConstantGenerator([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]))
    with pytest.raises(NoDomination):
        dominated_splitting(A, 1, sample_points(base, np.random.default_rng(0), 2), 12)


def test_lyapunov_splitting_and_block_restriction(base, diagonal):
    samples = sample_points(base, np.random.default_rng(4), 3)
    S = lyapunov_splitting(diagonal, samples, 20)
    assert S.dimensions == (1, 1, 1)
    for i in range(3):
        assert block_consistency_residual(diagonal, S, i, samples[0], 6) < 1e-8
    middle = restrict_cocycle(diagonal, S, 1)
    assert abs(middle.value(samples[1])[0, 0]) == pytest.approx(1.0, abs=1e-9)


def test_periodic_approximation_of_a_constant_cocycle(base, diagonal):
    x = sample_points(base, np.random.default_rng(5), 1)[0]
    orbits = enumerate_periodic_orbits(base, 3)
    report = periodic_approximation_check(diagonal, x, 40, orbits)
    assert report.gap == pytest.approx(0.0, abs=1e-12)
    assert not report.violated


def test_periodic_approximation_without_orbits(base, diagonal):
    x = sample_points(base, np.random.default_rng(5), 1)[0]
    report = periodic_approximation_check(diagonal, x, 20, [])
    assert report.gap == math.inf
    assert report.nearest == ()
    assert report.violated


def test_block_frames_follow_the_orbit(base, diagonal):
    samples = sample_points(base, np.random.default_rng(6), 2)
    S = lyapunov_splitting(diagonal, samples, 20)
    for i, value in enumerate([4.0, 1.0, 0.25]):
        assert restrict_cocycle(diagonal, S, i).value(samples[0])[0, 0] == pytest.approx(value, rel=1e-9)
    for frame, span in zip(S.frames(samples[1]), S.subspaces(samples[1])):
        np.testing.assert_allclose(span @ (span.T @ frame), frame, atol=1e-9)


def test_narrow_perturbed_cocycle_is_dominated_at_every_index():
    scenario = load_scenario("delta-narrow-splitting")
    base = build_base(scenario)
    A = build_cocycle(scenario, base)
    samples = sample_points(base, np.random.default_rng(5), 8)
    for k in (1, 2):
        S = dominated_splitting(A, k, samples, 20)
        assert S.tau <= 0.3
        assert S.invariance_residual <= config.invariance_tol
