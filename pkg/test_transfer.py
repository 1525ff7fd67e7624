"""Tests for transfer maps built from periodic data."""

import math

import numpy as np
import pytest

from src.base import PeriodicOrbit, SftBase, SymbolicPoint, sample_points
from src.cocycle import (CoboundaryGenerator, CocycleSpec, ConjugatedGenerator, ConstantGenerator,
                         LocallyConstantGenerator, bunching_margin)
from src.config import config
from src.transfer import (BadConjugator, CombineFailed, MissingSample, NoRecurrenceFound, NotCoprime,
                          NotDiagonalizable, PeriodicObstruction, TransferMap, UnipotentFamily,
                          agreement_with_samples, bezout, build_transfer_fixed_point, coboundary_divergence,
                          combine_coprime, conjugacy_from_periodic_data, homoclinic_consistency,
                          invariant_metric_from_transfer, isometrizing_inner_product, normalize_at_fixed_point,
                          recurrence_times, scalar_livsic, unipotent_periodic_criterion, verify_conjugacy)

TRANSFER = {
    (0, 0): [[1.0, 0.0], [0.0, 1.0]],
    (0, 1): [[1.1, 0.2], [0.0, 0.9]],
    (1, 0): [[1.0, 0.1], [-0.1, 1.05]],
    (1, 1): [[0.9, -0.1], [0.2, 1.1]],
}

ANCHOR = SymbolicPoint((0,), (), (0,), 0)


def rotation(turns):
    angle = 2.0 * math.pi * turns
    return np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])


@pytest.fixture(autouse=True)
def clean_config():
    config.reset_overrides()
    yield
    config.reset_overrides()


@pytest.fixture
def base():
    return SftBase([[1, 1], [1, 1]], 0.5)


@pytest.fixture
def transfer():
    return LocallyConstantGenerator(TRANSFER, (-1, 0))


@pytest.fixture
def planted(base, transfer):
    return lambda x: transfer.matrix(x, base)


def coboundary_over(base, transfer, target):
    return CocycleSpec(base, CoboundaryGenerator(ConstantGenerator(target), transfer), name="coboundary")


@pytest.fixture
def coboundary(base, transfer):
    return coboundary_over(base, transfer, rotation(0.1))


@pytest.fixture
def certificate(base, coboundary):
    return bunching_margin(coboundary, 1.0, 16, [ANCHOR] + sample_points(base, np.random.default_rng(0), 6))


@pytest.fixture
def samples(base):
    return sample_points(base, np.random.default_rng(3), 8)


# =============================================================================
# Isometrizing metrics and recurrence
# =============================================================================

def test_isometrizing_metric_of_a_conjugated_rotation():
    P = np.array([[1.0, 0.3], [0.0, 1.0]])
    B = np.linalg.inv(P) @ rotation(0.1) @ P
    metric = isometrizing_inner_product(B)
    assert metric.moduli == pytest.approx((1.0, 1.0))
    assert np.linalg.det(metric.gram) == pytest.approx(1.0)
    assert metric.operator_norm(B) == pytest.approx(1.0, abs=1e-9)
    assert metric.operator_norm(np.linalg.matrix_power(B, 7)) == pytest.approx(1.0, abs=1e-9)


def test_jordan_block_is_not_diagonalizable():
    with pytest.raises(NotDiagonalizable):
        isometrizing_inner_product([[1.0, 1.0], [0.0, 1.0]])


def test_recurrence_times_of_rational_rotations():
    assert recurrence_times(rotation(0.25), 12) == [4, 8, 12]
    assert recurrence_times(rotation(0.1), 30) == [10, 20, 30]


def test_too_few_recurrences():
    with pytest.raises(NoRecurrenceFound):
        recurrence_times(rotation(0.1), 25)


def test_recurrence_needs_an_isometry():
    with pytest.raises(ValueError):
        recurrence_times(np.diag([2.0, 0.5]), 10)


# =============================================================================
# Scalar cohomological equation
# =============================================================================

def test_scalar_livsic_solution(base):
    table = {(0, 0): [[2.0]], (0, 1): [[1.0]], (1, 0): [[4.0]], (1, 1): [[2.0]]}
    a = CocycleSpec(base, LocallyConstantGenerator(table, (0, 1)), name="scalar")
    solution = scalar_livsic(a, 2.0)
    assert solution.window == (0, 0)
    assert solution.phi[(0,)] == pytest.approx(1.0)
    assert solution.phi[(1,)] == pytest.approx(0.5)
    assert solution.residual < 1e-12
    x = SymbolicPoint((1,), (0, 1, 1), (0,), 0)
    fx = base.forward(x)
    lhs = a.value(x)[0, 0] * solution.value(x) / solution.value(fx)
    assert lhs == pytest.approx(2.0)


def test_scalar_livsic_periodic_obstruction(base):
    a = CocycleSpec(base, LocallyConstantGenerator({(0,): [[2.0]], (1,): [[3.0]]}), name="scalar")
    with pytest.raises(PeriodicObstruction) as info:
        scalar_livsic(a, 2.0)
    assert info.value.witness.period == 1


def test_scalar_livsic_rejects_nonpositive_rho(base):
    a = CocycleSpec(base, LocallyConstantGenerator({(0,): [[2.0]], (1,): [[2.0]]}), name="scalar")
    with pytest.raises(ValueError):
        scalar_livsic(a, 0.0)


# =============================================================================
# Transfer maps at a fixed point
# =============================================================================

def test_transfer_map_recovers_planted_coboundary(base, coboundary, certificate, planted, samples):
    C = build_transfer_fixed_point(coboundary, rotation(0.1), ANCHOR, 2, certificate=certificate)
    assert len(C.samples) == 32
    assert C.homoclinic_residual < 1e-9
    assert C.conjugacy_residual < 1e-9
    assert np.allclose(C(ANCHOR), np.eye(2))
    homoclinic = [x for x, _ in C.sample_items()]
    assert agreement_with_samples(C, planted, homoclinic) < 1e-8
    assert agreement_with_samples(C, planted, samples) < 1e-8
    assert math.isfinite(C.certificate.K_prime)
    assert C.certificate.M >= 1.0


def test_transfer_map_needs_a_normalized_cocycle(base, coboundary, certificate):
    shifted = CocycleSpec(base, ConjugatedGenerator(coboundary.generator, [[1.0, 0.3], [0.0, 1.0]]))
    with pytest.raises(BadConjugator):
        build_transfer_fixed_point(shifted, rotation(0.1), ANCHOR, 2, certificate=certificate)


def test_transfer_map_needs_a_fixed_point(coboundary, certificate):
    with pytest.raises(ValueError):
        build_transfer_fixed_point(coboundary, rotation(0.1), SymbolicPoint((0, 1), (), (0, 1), 0), 2,
                                   certificate=certificate)


def test_normalize_rejects_a_wrong_conjugator(coboundary):
    with pytest.raises(BadConjugator):
        normalize_at_fixed_point(coboundary, ANCHOR, np.diag([2.0, 1.0]), rotation(0.1))


def test_normalize_with_the_right_conjugator(base, coboundary):
    P = np.array([[1.0, 0.3], [0.0, 1.0]])
    shifted = CocycleSpec(base, ConjugatedGenerator(coboundary.generator, P))
    normalized = normalize_at_fixed_point(shifted, ANCHOR, np.linalg.inv(P), rotation(0.1))
    assert np.allclose(normalized.value(ANCHOR), rotation(0.1))


def test_conjugacy_from_periodic_data(base, coboundary, samples):
    P = np.array([[1.0, 0.3], [0.0, 1.0]])
    shifted = CocycleSpec(base, ConjugatedGenerator(coboundary.generator, P), name="shifted")
    C = conjugacy_from_periodic_data(shifted, rotation(0.1), ANCHOR, 2)
    assert C.conjugacy_residual < 1e-6
    homoclinic = [x for x, _ in C.sample_items() if max(abs(x.lo), abs(x.hi)) <= 2]
    assert verify_conjugacy(shifted, rotation(0.1), C, homoclinic[:16]) < 1e-6


def test_conjugacy_from_dissimilar_periodic_data(coboundary):
    with pytest.raises(PeriodicObstruction):
        conjugacy_from_periodic_data(coboundary, rotation(0.2), ANCHOR, 2)


def test_transfer_map_lookup(planted):
    calls = []

    def function(x):
        calls.append(x)
        return planted(x)

    C = TransferMap.from_function(function, anchor=ANCHOR)
    x = SymbolicPoint((0,), (1, 1), (0,), -1)
    first = C.lookup(x)
    second = C.lookup(x)
    assert np.array_equal(first, second)
    assert calls.count(x) == 1
    assert np.allclose(C.reanchored(np.diag([2.0, 1.0]))(x), np.diag([2.0, 1.0]) @ first)


def test_missing_sample_without_resolver():
    C = TransferMap(ANCHOR, np.eye(2), {})
    with pytest.raises(MissingSample):
        C.lookup(SymbolicPoint((0,), (1,), (0,), 0))


def test_invariant_metric_from_planted_transfer(coboundary, planted, samples):
    metric = invariant_metric_from_transfer(TransferMap.from_function(planted, anchor=ANCHOR))
    assert metric.isometry_residual(coboundary, samples) < 1e-10


def test_homoclinic_products_return_to_the_identity(base, transfer):
    A = coboundary_over(base, transfer, rotation(0.25))
    x = next(point for point in base.homoclinic_points(ANCHOR, 1) if point != ANCHOR)
    report = homoclinic_consistency(A, x, ANCHOR, recurrence_times(rotation(0.25), 8))
    assert report.time == 8
    assert report.value < 1e-9
    assert report.periodic_value < 1e-9


def test_homoclinic_consistency_needs_a_long_recurrence(base, transfer):
    A = coboundary_over(base, transfer, rotation(0.25))
    x = next(point for point in base.homoclinic_points(ANCHOR, 1) if point != ANCHOR)
    with pytest.raises(ValueError):
        homoclinic_consistency(A, x, ANCHOR, [1])


# =============================================================================
# Coprime combination
# =============================================================================

def test_bezout():
    r, s = bezout(2, 3)
    assert 2 * r + 3 * s == 1
    assert (r, s) == (-1, 1)


def test_combine_coprime_planted(base, transfer, planted, samples):
    A = coboundary_over(base, transfer, rotation(1 / 3))
    C = TransferMap.from_function(planted, anchor=ANCHOR)
    report = combine_coprime(A, rotation(1 / 3), C, C, 1, 2, 3, samples)
    assert (report.r, report.s) == (-1, 1)
    assert report.residual < 1e-10
    assert report.centralizer_residual < 1e-10


def test_combine_coprime_fails_for_a_conjugacy_over_the_cube_only(base, transfer, planted, samples):
    A = coboundary_over(base, transfer, rotation(1 / 3))
    distortion = np.diag([2.0, 1.0])
    C1 = TransferMap.from_function(planted, anchor=ANCHOR)
    C2 = TransferMap.from_function(lambda x: planted(x) @ distortion, anchor=ANCHOR)
    with pytest.raises(CombineFailed) as info:
        combine_coprime(A, rotation(1 / 3), C1, C2, 1, 2, 3, samples)
    assert info.value.residual > 1e-3


def test_combine_coprime_needs_coprime_periods(base, transfer, planted, samples):
    A = coboundary_over(base, transfer, rotation(1 / 3))
    C = TransferMap.from_function(planted, anchor=ANCHOR)
    with pytest.raises(NotCoprime):
        combine_coprime(A, rotation(1 / 3), C, C, 1, 2, 4, samples)


# =============================================================================
# Unipotent family
# =============================================================================

def test_unipotent_criterion_positive(base):
    family = UnipotentFamily(base, {(0, 0): 1.0, (0, 1): 1.5, (1, 0): 0.5, (1, 1): 1.0}, 1.0, (0, 1))
    report = unipotent_periodic_criterion(family, base.enumerate_periodic_orbits(6))
    assert report.conjugate
    assert report.witness is None
    assert report.ratio_bound == pytest.approx(1.0)
    for _, period, S, target in report.rows:
        assert S == pytest.approx(period)
        assert target == pytest.approx(period)


def test_unipotent_criterion_negative(base):
    family = UnipotentFamily(base, {(0,): 1.0, (1,): -1.0}, 1.0)
    report = unipotent_periodic_criterion(family, base.enumerate_periodic_orbits(4))
    assert not report.conjugate
    assert report.ratio_bound == math.inf
    assert report.witness.period == 2
    assert report.witness.label() == PeriodicOrbit(SymbolicPoint((0, 1), (), (0, 1), 0), 2).label()
    assert family.birkhoff_sum(report.witness.point, 2) == 0.0


def test_coboundary_divergence(base):
    negative = UnipotentFamily(base, {(0,): 1.0, (1,): -1.0}, 1.0)
    sums, slope = coboundary_divergence(negative, SymbolicPoint((1,), (), (1,), 0), 64)
    assert sums[-1] == pytest.approx(-128.0)
    assert slope == pytest.approx(1.0)

    positive = UnipotentFamily(base, {(0, 0): 1.0, (0, 1): 1.5, (1, 0): 0.5, (1, 1): 1.0}, 1.0, (0, 1))
    x = SymbolicPoint((0,), (0, 1, 1, 0, 1, 0, 0, 1), (1,), 0)
    sums, slope = coboundary_divergence(positive, x, 64)
    assert np.max(np.abs(sums)) <= 0.5 + 1e-12
    assert abs(slope) < 1e-8
