"""Tests for cocycle generators, ordered products and periodic data."""

import math

import numpy as np
import pytest

from src.base import PeriodicOrbit, SftBase, SymbolicPoint, enumerate_periodic_orbits, sample_points
from src.cocycle import (CoboundaryGenerator, CocycleSpec, ConjugatedGenerator, ConstantGenerator, IllConditioned,
                         LocallyConstantGenerator, PeriodicDatum, Singular, TailGenerator, are_similar,
                         bunching_margin, delta_narrow_radius, gl_distance, inverse_cocycle,
                         match_periodic_conjugator, periodic_data, power_cocycle)
from src.config import config


def rotation(turns):
    angle = 2.0 * math.pi * turns
    return np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])


TABLE = {
    (0,): [[2.0, 1.0], [0.0, 0.5]],
    (1,): [[1.0, 0.0], [0.3, 1.0]],
}


@pytest.fixture(autouse=True)
def clean_config():
    config.reset_overrides()
    yield
    config.reset_overrides()


@pytest.fixture
def full_shift():
    return SftBase([[1, 1], [1, 1]], 0.5)


def test_iterate_is_an_ordered_product(full_shift):
    A = CocycleSpec(full_shift, LocallyConstantGenerator(TABLE))
    x = full_shift.cylinder_point((0, 1, 1, 0))
    expected = np.array(TABLE[(1,)]) @ np.array(TABLE[(1,)]) @ np.array(TABLE[(0,)])
    np.testing.assert_allclose(A.iterate(x, 3), expected, rtol=1e-14)
    product = A.iterate(full_shift.forward(x, 3), -3)
    np.testing.assert_allclose(product @ A.iterate(x, 3), np.eye(2), atol=1e-12)


def test_power_and_inverse_cocycles(full_shift):
    A = CocycleSpec(full_shift, LocallyConstantGenerator(TABLE))
    x = full_shift.cylinder_point((1, 0, 0, 1, 0, 1))
    np.testing.assert_allclose(power_cocycle(A, 2).iterate(x, 2), A.iterate(x, 4), rtol=1e-13)
    B = inverse_cocycle(A)
    np.testing.assert_allclose(B.iterate(x, 3) @ A.iterate(full_shift.forward(x, -3), 3), np.eye(2), atol=1e-12)


def test_generator_validation(full_shift):
    with pytest.raises(ValueError, match="misses admissible windows"):
        CocycleSpec(full_shift, LocallyConstantGenerator({(0,): np.eye(2)}))
    with pytest.raises(ValueError):
        TailGenerator({(0, 0): np.eye(2)}, kappa=1.0)
    with pytest.raises(ValueError):
        CocycleSpec(full_shift, ConstantGenerator(np.eye(2)), hoelder_exponent=1.5)


def test_condition_cap(full_shift):
    A = CocycleSpec(full_shift, ConstantGenerator(np.diag([10.0, 0.1])))
    x = SymbolicPoint((0,), (), (0,), 0)
    with pytest.raises(IllConditioned):
        A.iterate(x, 16)
    np.testing.assert_allclose(A.iterate(x, 16, condition_cap=None), np.diag([1e16, 1e-16]), rtol=1e-12)


def test_coboundary_and_conjugated_generators(full_shift):
    transfer = LocallyConstantGenerator({(0,): [[1.0, 0.2], [0.0, 1.0]], (1,): [[1.0, 0.0], [0.1, 1.2]]})
    B = rotation(0.1)
    A = CocycleSpec(full_shift, CoboundaryGenerator(ConstantGenerator(B), transfer))
    x = full_shift.cylinder_point((0, 1, 1, 0, 1))
    C = lambda y: transfer.matrix(y, full_shift)
    n = 4
    expected = C(full_shift.forward(x, n)) @ np.linalg.matrix_power(B, n) @ np.linalg.inv(C(x))
    np.testing.assert_allclose(A.iterate(x, n), expected, atol=1e-12)

    P = np.array([[1.0, 0.3], [0.0, 1.0]])
    shifted = CocycleSpec(full_shift, ConjugatedGenerator(A.generator, P))
    np.testing.assert_allclose(shifted.value(x), np.linalg.inv(P) @ A.value(x) @ P, atol=1e-14)


def test_similarity_decisions():
    assert are_similar(np.array([[2.0, 1.0], [0.0, 3.0]]), np.diag([3.0, 2.0]))
    assert not are_similar(np.array([[1.0, 1.0], [0.0, 1.0]]), np.eye(2))
    assert not are_similar(np.diag([1.0, 2.0]), np.diag([1.0, 2.5]))
    assert are_similar(np.array([[1.0, 5.0], [0.0, 1.0]]), np.array([[1.0, 0.0], [-2.0, 1.0]]))


def test_periodic_conjugator_conjugates(full_shift):
    A = CocycleSpec(full_shift, LocallyConstantGenerator(TABLE))
    orbit = PeriodicOrbit(SymbolicPoint((0, 1), (), (0, 1), 0), 2)
    datum = periodic_data(A, orbit)
    target = np.diag(sorted(np.linalg.eigvals(datum.return_matrix).real))
    conjugator = match_periodic_conjugator(datum, PeriodicDatum(orbit, target, np.linalg.eigvals(target)))
    assert conjugator is not None
    C = conjugator.matrix
    np.testing.assert_allclose(C @ target @ np.linalg.inv(C), datum.return_matrix, atol=1e-10)
    jordan = np.array([[1.0, 1.0], [0.0, 1.0]])
    assert match_periodic_conjugator(PeriodicDatum(orbit, np.eye(2), np.ones(2)),
                                     PeriodicDatum(orbit, jordan, np.ones(2))) is None


def test_gl_distance():
    assert gl_distance(np.eye(2), np.eye(2)) == 0.0
    assert gl_distance(np.eye(2), 2.0 * np.eye(2)) == pytest.approx(1.5)
    with pytest.raises(Singular):
        gl_distance(np.eye(2), np.zeros((2, 2)))


def test_delta_narrow_radius_of_a_constant_cocycle(full_shift):
    A = CocycleSpec(full_shift, ConstantGenerator(np.diag([2.0, 0.5])))
    orbits = enumerate_periodic_orbits(full_shift, 5)
    report = delta_narrow_radius(A, orbits, [math.log(0.5), math.log(2.0)])
    assert report.delta == pytest.approx(0.0, abs=1e-12)
    report = delta_narrow_radius(A, orbits, [0.6, -0.6])
    assert report.delta == pytest.approx(math.log(2.0) - 0.6, abs=1e-12)


def test_bunching_margin_of_an_isometric_cocycle(full_shift):
    A = CocycleSpec(full_shift, ConstantGenerator(rotation(0.2)))
    samples = sample_points(full_shift, np.random.default_rng(0), 3)
    certificate = bunching_margin(A, 1.0, 12, samples)
    assert certificate.theta == pytest.approx(0.5, rel=1e-9)
    assert certificate.constant == pytest.approx(1.0, rel=1e-9)
    assert certificate.valid
