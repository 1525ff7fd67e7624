"""Tests for subshifts, toral automorphisms and periodic orbit bookkeeping."""

from fractions import Fraction

import numpy as np
import pytest

from src.base import (NotCloseEnough, NotInProductRange, PeriodicOrbit, RateTriple, SftBase, SymbolicPoint,
                      ToralAutomorphism, anosov_closing, enumerate_periodic_orbits, homoclinic_points,
                      local_product, sample_points, weak_irreducibility_check)
from src.config import config

FULL_SHIFT = [[1, 1], [1, 1]]
GOLDEN_MEAN = [[1, 1], [1, 0]]
CAT = [[2, 1], [1, 1]]


@pytest.fixture(autouse=True)
def clean_config():
    config.reset_overrides()
    yield
    config.reset_overrides()


def test_symbolic_points_are_normalized():
    assert SymbolicPoint((0,), (0, 0, 1), (1,), 3) == SymbolicPoint((0,), (), (1,), 5)
    assert SymbolicPoint((0, 1, 0, 1), (), (0, 1), 1) == SymbolicPoint((1, 0), (), (1, 0), 0)


def test_symbolic_point_text_format():
    x = SymbolicPoint((0,), (1, 0, 1), (1, 0), -1)
    assert SymbolicPoint.from_text(x.to_text()) == x
    with pytest.raises(ValueError):
        SymbolicPoint.from_text("(0)^inf|1.1")


def test_shift_and_symbol_replacement():
    x = SymbolicPoint((0,), (1, 1, 0, 1), (0,), -2)
    y = x.shift(3)
    assert all(y.symbol(i) == x.symbol(i + 3) for i in range(-10, 10))
    z = x.with_symbol(5, 1)
    assert z.symbol(5) == 1
    assert all(z.symbol(i) == x.symbol(i) for i in range(-10, 10) if i != 5)


def test_sft_distance_is_an_ultrametric():
    base = SftBase(FULL_SHIFT, 0.5)
    rng = np.random.default_rng(1)
    points = sample_points(base, rng, 12, radius=4)
    for x in points:
        assert base.distance(x, x) == 0.0
        for y in points:
            assert base.distance(x, y) == base.distance(y, x)
            for z in points[:4]:
                assert base.distance(x, z) <= max(base.distance(x, y), base.distance(y, z))


def test_sft_rejects_bad_transition_matrices():
    with pytest.raises(ValueError):
        SftBase([[1, 2], [1, 1]], 0.5)
    with pytest.raises(ValueError):
        SftBase([[0, 1], [1, 0]], 0.5)
    with pytest.raises(ValueError):
        SftBase(FULL_SHIFT, 1.0)


def test_periodic_orbit_counts_match_traces():
    base = SftBase(GOLDEN_MEAN, 0.5)
    assert [base.fixed_point_count(n) for n in range(1, 6)] == [1, 3, 4, 7, 11]
    orbits = enumerate_periodic_orbits(base, 6)
    for n in range(1, 7):
        covered = sum(orbit.period for orbit in orbits if n % orbit.period == 0)
        assert covered == base.fixed_point_count(n)
    labels = [orbit.label() for orbit in orbits]
    assert len(set(labels)) == len(labels)


def test_homoclinic_points_of_the_full_shift():
    base = SftBase(FULL_SHIFT, 0.5)
    q = SymbolicPoint((0,), (), (0,), 0)
    assert homoclinic_points(base, q, 0) == [q]
    points = homoclinic_points(base, q, 2)
    assert len(points) == 2 ** 5
    assert q in points
    assert all(base.on_stable_leaf(q, x, local=False) and base.on_unstable_leaf(q, x, local=False)
               for x in points)


def test_local_product_takes_future_of_x_and_past_of_z():
    base = SftBase(FULL_SHIFT, 0.5)
    x = SymbolicPoint((1,), (0, 1, 1), (0,), 0)
    z = SymbolicPoint((0,), (1, 0, 0), (1,), -2)
    w = local_product(base, x, z)
    assert all(w.symbol(i) == x.symbol(i) for i in range(0, 8))
    assert all(w.symbol(i) == z.symbol(i) for i in range(-8, 1))
    with pytest.raises(NotInProductRange):
        local_product(base, x, SymbolicPoint((1,), (), (1,), 0))


def test_sft_closing():
    base = SftBase(FULL_SHIFT, 0.5)
    x = base.cylinder_point((0, 1, 1, 0))
    orbit, constant = anosov_closing(base, x, 3)
    assert orbit == PeriodicOrbit(SymbolicPoint((0, 1, 1), (), (0, 1, 1), 0), 3)
    assert constant >= 0.0
    with pytest.raises(NotCloseEnough):
        anosov_closing(base, base.cylinder_point((0, 1)), 1)


def test_cat_map_periodic_points_are_exact():
    L = ToralAutomorphism(CAT)
    assert [L.fixed_point_count(n) for n in (1, 2, 3)] == [1, 5, 16]
    points = L.fixed_points(2)
    assert len(points) == 5
    for p in points:
        assert all(isinstance(c, Fraction) for c in p)
        assert L.forward(p, 2) == p
    orbits = enumerate_periodic_orbits(L, 3)
    assert [orbit.period for orbit in orbits].count(1) == 1
    assert [orbit.period for orbit in orbits].count(2) == 2
    assert [orbit.period for orbit in orbits].count(3) == 5


def test_toral_automorphism_validation():
    with pytest.raises(ValueError, match="hyperbolic"):
        ToralAutomorphism([[1, 1], [0, 1]])
    with pytest.raises(ValueError, match="determinant"):
        ToralAutomorphism([[2, 0], [0, 1]])


def test_toral_closing_returns_nearby_rational_point():
    L = ToralAutomorphism(CAT)
    orbit, _ = anosov_closing(L, np.array([1e-4, -2e-4]) % 1.0, 1)
    assert orbit.point == (Fraction(0), Fraction(0))
    assert orbit.label() == "0/1 0/1"


def test_stable_and_unstable_leaves_of_the_cat_map():
    L = ToralAutomorphism(CAT)
    x = np.array([0.3, 0.6])
    u = L.unstable_basis[:, 0]
    s = L.stable_basis[:, 0]
    assert L.on_unstable_leaf(x, (x + 0.01 * u) % 1.0)
    assert L.on_stable_leaf(x, (x + 0.01 * s) % 1.0)
    assert not L.on_stable_leaf(x, (x + 0.01 * u) % 1.0)
    w = L.local_product(x, (x + 0.01 * u + 0.02 * s) % 1.0)
    np.testing.assert_allclose(w, (x + 0.02 * s) % 1.0, atol=1e-12)


def test_weak_irreducibility():
    assert weak_irreducibility_check(ToralAutomorphism(CAT)).weakly_irreducible
    double = np.kron(np.eye(2), np.array(CAT))
    assert weak_irreducibility_check(ToralAutomorphism(double)).weakly_irreducible
    skew = np.block([[np.array(CAT), np.zeros((2, 2))], [np.zeros((2, 2)), np.array([[3, 1], [2, 1]])]])
    report = weak_irreducibility_check(ToralAutomorphism(skew))
    assert not report.weakly_irreducible
    assert len(report.factors) == 2


def test_rate_triple_validation():
    RateTriple(nu=0.2, gamma=0.9, gamma_hat=1.05)
    with pytest.raises(ValueError):
        RateTriple(nu=0.2, gamma=1.1, gamma_hat=1.05)
