"""Tests for certified holonomies, equivariance and the Hoelder fit."""

import math

import numpy as np
import pytest

from src.base import SftBase, SymbolicPoint, sample_points
from src.cocycle import CoboundaryGenerator, CocycleSpec, ConstantGenerator, LocallyConstantGenerator, bunching_margin
from src.config import config
from src.holonomy import (STABLE, UNSTABLE, InsufficientSpread, NoBunchingCertificate, NotOnStableLeaf,
                          equivariance_residual, flipped_pairs, holder_fit, holonomy_table, stable_holonomy,
                          truncated_holonomy, unstable_holonomy)
from src.scenario import build_base, build_cocycle, load_scenario

TRANSFER = {
    (0, 0): [[1.0, 0.0], [0.0, 1.0]],
    (0, 1): [[1.1, 0.2], [0.0, 0.9]],
    (1, 0): [[1.0, 0.1], [-0.1, 1.05]],
    (1, 1): [[0.9, -0.1], [0.2, 1.1]],
}


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
def coboundary(base, transfer):
    return CocycleSpec(base, CoboundaryGenerator(ConstantGenerator(rotation(0.1)), transfer), name="coboundary")


@pytest.fixture
def certificate(base, coboundary):
    return bunching_margin(coboundary, 1.0, 16, sample_points(base, np.random.default_rng(0), 6))


def test_certificate_is_valid(certificate):
    assert certificate.valid
    assert certificate.theta < 0.9


def test_stable_holonomy_of_a_coboundary(base, transfer, coboundary, certificate):
    x = base.cylinder_point((0, 1, 1, 0, 1), lo=-2)
    y = x.with_symbol(-1, 1 - x.symbol(-1))
    H = stable_holonomy(coboundary, x, y, certificate=certificate)
    expected = transfer.matrix(y, base) @ np.linalg.inv(transfer.matrix(x, base))
    np.testing.assert_allclose(H.matrix, expected, atol=1e-12)
    assert H.error_bound <= 1e-12
    assert equivariance_residual(coboundary, H) < 1e-10


def test_global_stable_leaf_pairs_are_pulled_back(base, transfer, coboundary, certificate):
    x = base.cylinder_point((0, 1, 1, 0, 1), lo=-2)
    y = x.with_symbol(0, 1 - x.symbol(0)).with_symbol(1, 1 - x.symbol(1))
    H = stable_holonomy(coboundary, x, y, certificate=certificate)
    expected = transfer.matrix(y, base) @ np.linalg.inv(transfer.matrix(x, base))
    np.testing.assert_allclose(H.matrix, expected, atol=1e-10)


def test_pulled_back_error_bound_includes_the_conjugation():
    scenario = load_scenario("sft-holonomy")
    base = build_base(scenario)
    A = build_cocycle(scenario, base)
    certificate = bunching_margin(A, A.hoelder_exponent, 24, sample_points(base, np.random.default_rng(7), 8))
    x = base.cylinder_point((0, 1, 1, 0, 1), lo=-2)
    y = x.with_symbol(0, 1 - x.symbol(0)).with_symbol(1, 1 - x.symbol(1))
    steps = base.steps_to_local_leaf(x, y, STABLE)
    assert steps > 0
    Ax = A.iterate(x, steps, condition_cap=None)
    Ay = A.iterate(y, steps, condition_cap=None)
    pullback = np.linalg.norm(np.linalg.inv(Ay), 2) * np.linalg.norm(Ax, 2)

    coarse = stable_holonomy(A, x, y, tol=1e-4, certificate=certificate)
    fine = stable_holonomy(A, x, y, tol=1e-13, certificate=certificate)
    distance = base.distance(base.forward(x, steps), base.forward(y, steps))
    local = certificate.constant * certificate.theta ** (coarse.depth - steps) * distance ** certificate.beta
    assert coarse.error_bound == pytest.approx(pullback * local)
    assert coarse.error_bound <= 1e-4
    assert np.linalg.norm(coarse.matrix - fine.matrix, 2) <= coarse.error_bound + fine.error_bound


def test_unstable_holonomy_of_a_coboundary(base, transfer, coboundary, certificate):
    x = base.cylinder_point((1, 0, 0, 1, 1), lo=-2)
    y = x.with_symbol(0, 1 - x.symbol(0))
    H = unstable_holonomy(coboundary, x, y, certificate=certificate)
    expected = transfer.matrix(y, base) @ np.linalg.inv(transfer.matrix(x, base))
    np.testing.assert_allclose(H.matrix, expected, atol=1e-12)
    assert H.direction == UNSTABLE


def test_holonomy_preconditions(base, coboundary, certificate):
    x = base.cylinder_point((0, 1, 1), lo=-1)
    with pytest.raises(NotOnStableLeaf):
        stable_holonomy(coboundary, x, SymbolicPoint((0,), (), (0,), 0), certificate=certificate)
    with pytest.raises(NoBunchingCertificate):
        stable_holonomy(coboundary, x, x.with_symbol(-1, 1 - x.symbol(-1)))


def test_truncations_stabilize(base, coboundary):
    x = base.cylinder_point((0, 0, 1, 1, 0), lo=-2)
    y = x.with_symbol(-2, 1 - x.symbol(-2))
    np.testing.assert_allclose(truncated_holonomy(coboundary, x, y, 3, STABLE),
                               truncated_holonomy(coboundary, x, y, 9, STABLE), atol=1e-12)


def test_constant_cocycle_has_trivial_holonomy(base):
    A = CocycleSpec(base, ConstantGenerator(rotation(0.3)))
    certificate = bunching_margin(A, 1.0, 12, sample_points(base, np.random.default_rng(1), 2))
    x = sample_points(base, np.random.default_rng(2), 1)[0]
    pairs = flipped_pairs(base, x, range(-2, -8, -1))
    assert len(pairs) == 6
    for H in holonomy_table(A, pairs, STABLE, certificate):
        assert H.deviation() < 1e-12
        assert len(H.csv_row()) == 6


def test_holder_fit_recovers_the_exponent():
    distances = 0.5 ** np.arange(2, 16)
    fit = holder_fit([(d, 3.0 * d ** 0.5) for d in distances])
    assert fit.beta == pytest.approx(0.5, abs=1e-9)
    assert fit.constant == pytest.approx(3.0, rel=1e-9)
    assert not fit.degenerate


def test_holder_fit_needs_spread():
    with pytest.raises(InsufficientSpread):
        holder_fit([(0.5 ** k, 0.1) for k in range(4)])
    with pytest.raises(InsufficientSpread):
        holder_fit([(0.5 + 0.001 * k, 0.1) for k in range(10)])


def test_identity_deviation_fit_is_degenerate():
    fit = holder_fit([(0.5 ** k, 0.0) for k in range(2, 14)])
    assert fit.degenerate
