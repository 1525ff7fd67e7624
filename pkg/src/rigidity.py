"""Smooth rigidity diagnostics for perturbations of hyperbolic toral automorphisms."""

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .base import (PerturbedToralMap, RateTriple, SmoothToralMap, ToralAutomorphism, TrigPolynomial,
                   weak_irreducibility_check, wrap)
from .cocycle import (CocycleSpec, Generator, PeriodicDatum, bunching_margin, match_periodic_conjugator)
from .config import config, parallel_map
from .holonomy import HolderFit, InsufficientSpread, holder_fit, stable_holonomy
from .transfer import MetricField

STABLE = 'stable'
UNSTABLE = 'unstable'

# rows per series block, independent of the thread count
_BLOCK = 1024


class RigidityError(Exception):
    """Custom exception for rigidity-related errors."""
    pass


class NotContracting(RigidityError):
    """The conjugacy iteration does not converge for this map."""
    pass


class BunchingFailed(RigidityError):
    """The rate triple violates the bunching inequalities."""
    pass


class LeafGrowthFailed(RigidityError):
    """A leaf intersection could not be bracketed."""
    pass


# =============================================================================
# BUNCHING
# =============================================================================

@dataclass(frozen=True)
class BunchingReport:
    holds: bool
    first: float
    second: float

    @property
    def margins(self) -> Tuple[float, float]:
        return 1.0 - self.first, 1.0 - self.second


def bunching_check(rates: RateTriple, beta: float) -> BunchingReport:
    """Evaluate gamma_hat gamma nu^(beta/(1+beta)) < 1 and gamma_hat gamma^(1+beta) < 1."""
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    first = rates.gamma_hat * rates.gamma * rates.nu ** (beta / (1.0 + beta))
    second = rates.gamma_hat * rates.gamma ** (1.0 + beta)
    return BunchingReport(bool(first < 1.0 and second < 1.0), float(first), float(second))


def _require_bunching(f: SmoothToralMap, beta: float) -> BunchingReport:
    report = bunching_check(f.rates, beta)
    if not report.holds:
        raise BunchingFailed(f"Bunching fails for {f!r}: values {report.first:.4f}, {report.second:.4f}")
    return report


# =============================================================================
# FRANKS-MANNING CONJUGACY
# =============================================================================

def _split_frames(L: ToralAutomorphism) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal invariant bases and the restrictions of L to them."""
    U, S = L.unstable_basis, L.stable_basis
    matrix = L.matrix.astype(float)
    return U, S, U.T @ matrix @ U, S.T @ matrix @ S


def _series_terms(L: ToralAutomorphism, size: float) -> int:
    rate = max(L.stable_rate, 1.0 / L.unstable_rate)
    if size <= 0.0:
        return 0
    terms = int(math.ceil(math.log(1e-17 / size) / math.log(rate))) + 1
    return min(max(terms, 1), config.max_horizon)


def _inverse_checked(f: SmoothToralMap, X: np.ndarray) -> np.ndarray:
    Y = f.inverse_many(X)
    miss = float(np.max(np.abs(wrap(f.forward_many(Y) - X)))) if len(X) else 0.0
    if miss > 1e-10:
        raise NotContracting(f"Inverse iteration lost the orbit (miss {miss:.3g})")
    return Y


def _series_displacement(f: SmoothToralMap, X: np.ndarray, terms: int) -> np.ndarray:
    """
    u = h - id from the contracting split series.

    u^u(x) = sum_{k>=0} L_u^{-(k+1)} P^u(f^k x) and u^s(x) = -sum_{k>=1} L_s^{k-1} P^s(f^{-k} x)
    with P = f - L on lifts.
    """
    L = f.linear_part
    U, S, T_u, T_s = _split_frames(L)
    matrix_t = L.matrix.T.astype(float)

    def defect(points):
        return f.lift(points) - points @ matrix_t

    u = L.unstable_dimension
    to_unstable = L.coordinates[:u].T
    to_stable = L.coordinates[u:].T
    T_u_inv = np.linalg.inv(T_u)
    unstable = np.zeros((len(X), U.shape[1]))
    power = T_u_inv.copy()
    points = X.copy()
    for _ in range(terms):
        unstable += (defect(points) @ to_unstable) @ power.T
        power = power @ T_u_inv
        points = f.forward_many(points)

    stable = np.zeros((len(X), S.shape[1]))
    power = np.eye(S.shape[1])
    points = X.copy()
    for _ in range(terms):
        points = _inverse_checked(f, points)
        stable -= (defect(points) @ to_stable) @ power.T
        power = power @ T_s
    return unstable @ U.T + stable @ S.T


def _torus_grid(resolution: int, dimension: int) -> np.ndarray:
    axes = [np.arange(resolution) / resolution] * dimension
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, dimension)


class ConjugacyField:
    """
    h = id + u with L o h = h o f, u evaluated pointwise by the split series.

    Values on the solve grid are stored; other points are evaluated on demand.
    """

    def __init__(self, system: SmoothToralMap, resolution: int, terms: int):
        self.system = system
        self.linear_part = system.linear_part
        self.resolution = resolution
        self.terms = terms
        self.offset = np.zeros(system.dimension)
        self.grid = _torus_grid(resolution, system.dimension)
        self.values = np.zeros_like(self.grid)
        self.residual = math.inf
        self.refined_residual = math.inf
        self.normalization: Dict[str, object] = {}

    def displacement(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        blocks = [X[i:i + _BLOCK] for i in range(0, len(X), _BLOCK)]
        parts = parallel_map(lambda block: _series_displacement(self.system, block, self.terms), blocks)
        return np.concatenate(parts) - self.offset

    def __call__(self, X) -> np.ndarray:
        """Lifted h(X) = X + u(X)."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        value = np.atleast_2d(X) + self.displacement(X)
        return value[0] if single else value

    def jacobian(self, x, step: float = 1e-4) -> np.ndarray:
        """Central finite-difference Dh(x)."""
        x = np.asarray(x, dtype=float)
        d = len(x)
        offsets = np.vstack([x + step * np.eye(d), x - step * np.eye(d)])
        values = self(offsets)
        return ((values[:d] - values[d:]) / (2.0 * step)).T

    def inverse(self, Y, tol: float = 1e-13, max_iter: int = 40) -> np.ndarray:
        """Lifted h^{-1}(Y) by Newton's method with finite-difference Jacobians."""
        Y = np.asarray(Y, dtype=float)
        X = Y - self.displacement(Y)[0]
        for _ in range(max_iter):
            R = wrap(self(X) - Y)
            step = np.linalg.solve(self.jacobian(X), R)
            X = X - step
            if np.max(np.abs(step)) < tol:
                break
        return X

    def functional_residual(self, X) -> float:
        """sup |L h(x) - h(f x)| mod Z^d."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        matrix_t = self.linear_part.matrix.T.astype(float)
        lhs = self(X) @ matrix_t
        rhs = self(self.system.forward_many(X))
        return float(np.max(np.abs(wrap(lhs - rhs))))

    def equivariance_residual(self, X, n: int) -> float:
        """sup |L^n h(x) - h(f^n x)| mod Z^d."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        images = X
        for _ in range(n):
            images = self.system.forward_many(images)
        power = np.linalg.matrix_power(self.linear_part.matrix, n).astype(float)
        return float(np.max(np.abs(wrap(self(X) @ power.T - self(images)))))

    def sup_error(self, reference, X) -> float:
        """sup |h(x) - reference(x)| mod Z^d."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return float(np.max(np.abs(wrap(self(X) - reference(X)))))

    def regularity(self, rng: np.random.Generator, pairs: int = 24) -> Optional[HolderFit]:
        """Power-law fit of |u(x) - u(y)| against |x - y| over a ladder of separations."""
        centers = rng.random((pairs, self.system.dimension))
        directions = rng.standard_normal((pairs, self.system.dimension))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = np.geomspace(1e-1, 1e-4, pairs)
        shifted = centers + radii[:, None] * directions
        changes = np.linalg.norm(self.displacement(shifted) - self.displacement(centers), axis=1)
        try:
            return holder_fit(list(zip(radii, changes)))
        except InsufficientSpread:
            return None


def franks_manning(f: SmoothToralMap, grid: int = 64, rng: Optional[np.random.Generator] = None) -> ConjugacyField:
    """
    Conjugacy h with L o h = h o f, homotopic to the identity.

    Args:
        f: Map homotopic to a hyperbolic automorphism L
        grid: Solve-grid resolution per axis
        rng: Generator for the refinement sample (seeded from config when omitted)

    Returns:
        ConjugacyField with grid values, residuals and the fixed-point normalization

    Raises:
        NotContracting: If the iteration diverges or the residual stays above the solve tolerance
    """
    L = f.linear_part
    samples = np.random.default_rng(config.seed).random((256, f.dimension))
    size = float(np.max(np.abs(f.lift(samples) - samples @ L.matrix.T.astype(float))))
    if not np.isfinite(size):
        raise NotContracting("The defect f - L is not bounded")
    conjugacy = ConjugacyField(f, grid, _series_terms(L, size))
    if config.verbose_logging:
        print(f"🔄 Franks-Manning series: {conjugacy.terms} terms on a {grid}^{f.dimension} grid")

    anchor = f.periodic_orbit_from([np.zeros(f.dimension)], 1)[0]
    image = conjugacy(anchor)
    conjugacy.offset = wrap(image - np.zeros(f.dimension))
    conjugacy.normalization = {'anchor': anchor.tolist(), 'image': wrap(image).tolist(),
                               'normalized': wrap(conjugacy(anchor)).tolist()}

    conjugacy.values = conjugacy.displacement(conjugacy.grid)
    conjugacy.residual = conjugacy.functional_residual(conjugacy.grid)
    rng = rng or np.random.default_rng(config.seed)
    fine = (rng.integers(0, 4 * grid, size=(min(4096, (4 * grid) ** f.dimension), f.dimension)) + 0.5) / (4 * grid)
    conjugacy.refined_residual = conjugacy.functional_residual(fine)
    if conjugacy.residual > config.solve_tol or conjugacy.refined_residual > 10.0 * config.solve_tol:
        raise NotContracting(f"Functional-equation residual {conjugacy.residual:.3g} above {config.solve_tol}")
    if config.verbose_logging:
        print(f"✓ Conjugacy residual {conjugacy.residual:.2e} (refined {conjugacy.refined_residual:.2e})")
    return conjugacy


def convergence_scale(linear: ToralAutomorphism, perturbation: TrigPolynomial,
                      scales: Sequence[float], grid: int = 16) -> Optional[float]:
    """Largest scale eps for which franks_manning converges for L + eps Q."""
    best = None
    for scale in sorted(scales):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            system = PerturbedToralMap(linear, perturbation.scaled(scale), strict=False)
        try:
            franks_manning(system, grid)
        except (NotContracting, np.linalg.LinAlgError):
            break
        best = scale
    return best


@dataclass
class DerivativeTransferReport:
    points: List[np.ndarray]
    jacobians: List[np.ndarray]
    residual: float
    ladder: List[Tuple[float, float]]
    converged: bool


def derivative_transfer(h: ConjugacyField, f: Optional[SmoothToralMap] = None,
                        L: Optional[ToralAutomorphism] = None, points: Optional[Sequence] = None,
                        step: float = 1e-4,
                        ladder: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5)) -> DerivativeTransferReport:
    """
    C(x) = Dh(x) by central differences and the residual of L Dh(x) = Dh(fx) Df(x).

    Non-convergence of the difference ladder is reported, not raised.
    """
    f = f or h.system
    L = L or f.linear_part
    if points is None:
        points = list(np.random.default_rng(config.seed).random((8, f.dimension)))
    matrix = L.matrix.astype(float)
    jacobians, residual = [], 0.0
    for x in points:
        J = h.jacobian(x, step)
        J_image = h.jacobian(f.forward(x), step)
        residual = max(residual, float(np.linalg.norm(matrix @ J - J_image @ f.derivative(x), 2)))
        jacobians.append(J)

    changes = []
    previous = None
    for t in ladder:
        current = [h.jacobian(x, t) for x in points]
        if previous is not None:
            changes.append((t, max(float(np.linalg.norm(a - b, 2)) for a, b in zip(current, previous))))
        previous = current
    values = [c for _, c in changes]
    converged = bool(values) and values[-1] < 1e-4 and all(b <= a + 1e-9 for a, b in zip(values, values[1:]))
    return DerivativeTransferReport(list(points), jacobians, residual, changes, converged)


# =============================================================================
# NONSTATIONARY LINEARIZATION
# =============================================================================

class LeafChart:
    """
    psi_x(t) = lim f^n(f^{-n} x + t e_n / G_n) on an unstable leaf (inverse roles on a stable leaf).

    ``gain`` is |Df^n e_n| along the anchoring orbit, ``direction`` the unit tangent at x.
    """

    def __init__(self, system: SmoothToralMap, x, leaf: str, depth: int):
        if leaf not in (STABLE, UNSTABLE):
            raise ValueError(f"Unknown leaf type {leaf!r}")
        L = system.linear_part
        unstable = leaf == UNSTABLE
        if (L.unstable_dimension if unstable else L.dimension - L.unstable_dimension) != 1:
            raise ValueError("Leaf charts are one-dimensional")
        self.system = system
        self.leaf = leaf
        self.depth = depth
        self.point = np.asarray(x, dtype=float) % 1.0
        step = system.inverse_many if unstable else system.forward_many
        orbit = [self.point]
        for _ in range(depth):
            orbit.append(step(orbit[-1][None, :])[0])
        self.orbit = orbit

        reference = (L.unstable_basis if unstable else L.stable_basis)[:, 0]
        Qu, Qs = system.invariant_frames(orbit[-1][None, :], depth=max(depth, 12))
        tip = (Qu if unstable else Qs)[0][:, 0]
        if tip @ reference < 0:
            tip = -tip
        v = tip
        for k in range(depth, 0, -1):
            if unstable:
                v = system.derivative(orbit[k]) @ v
            else:
                v = np.linalg.solve(system.derivative(orbit[k - 1]), v)
        self.tip = tip
        self.gain = float(np.linalg.norm(v))
        self.direction = v / self.gain

    def displacements(self, ts) -> np.ndarray:
        """psi_x(t) - x for each t."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        D = np.outer(ts / self.gain, self.tip)
        for k in range(self.depth, 0, -1):
            if self.leaf == UNSTABLE:
                base = np.broadcast_to(self.orbit[k], D.shape)
                D = self.system.displacement(base, D)
            else:
                D = np.array([self.system.inverse_displacement(self.orbit[k - 1], d) for d in D])
        return D

    def __call__(self, t: float) -> np.ndarray:
        return (self.point + self.displacements([t])[0]) % 1.0


@dataclass
class LinearizationChart:
    point: np.ndarray
    leaf: str
    radius: float
    depth: int
    direction: np.ndarray
    multiplier: float
    parameters: np.ndarray
    displacements: np.ndarray
    residual: float
    uniqueness: float
    certificate: float
    derivative_error: float
    chart: LeafChart = field(repr=False, default=None)

    def __call__(self, t: float) -> np.ndarray:
        return self.chart(t)


def nonstationary_linearization(f: SmoothToralMap, x, leaf: str, R: float, depth: int = 12,
                                samples: int = 41, beta: float = 1.0) -> LinearizationChart:
    """
    Chart phi_x of a one-dimensional leaf with Df|E_x = phi_{fx} o f o phi_x^{-1}.

    Args:
        f: Smooth toral map with one-dimensional stable and unstable leaves
        x: Base point
        leaf: 'stable' or 'unstable'
        R: Chart radius in the leaf coordinate
        depth: Truncation depth n; the chart at depth 2n is the uniqueness cross-check
        samples: Number of chart parameters in [-R, R]
        beta: Hoelder exponent for the bunching gate

    Returns:
        LinearizationChart with conjugation residual and derivative normalization error

    Raises:
        BunchingFailed: If the measured rates are not bunched
    """
    _require_bunching(f, beta)
    chart = LeafChart(f, x, leaf, depth)
    ts = np.linspace(-R, R, samples)
    D = chart.displacements(ts)

    image = f.forward_many(chart.point[None, :])[0]
    image_chart = LeafChart(f, image, leaf, depth)
    pushed = f.derivative(chart.point) @ chart.direction
    multiplier = float(np.sign(pushed @ image_chart.direction) * np.linalg.norm(pushed))
    lhs = f.displacement(np.broadcast_to(chart.point, D.shape), D)
    rhs = image_chart.displacements(multiplier * ts)
    residual = float(np.max(np.linalg.norm(lhs - rhs, axis=1)))

    deep = LeafChart(f, x, leaf, 2 * depth).displacements(ts)
    uniqueness = float(np.max(np.linalg.norm(deep - D, axis=1)))
    rate = f.rates.gamma if leaf == UNSTABLE else f.rates.nu
    certificate = 10.0 * R * R * rate ** depth + 1e-12

    h = 1e-5
    ends = chart.displacements([-h, h])
    derivative_error = abs(float(np.linalg.norm(ends[1] - ends[0])) / (2.0 * h) - 1.0)
    if config.verbose_logging:
        print(f"📊 {leaf} chart at {np.round(chart.point, 6)}: residual {residual:.2e}, "
              f"uniqueness {uniqueness:.2e}")
    return LinearizationChart(chart.point, leaf, R, depth, chart.direction, multiplier, ts, D,
                              residual, uniqueness, certificate, derivative_error, chart)


# =============================================================================
# FOLIATION HOLONOMY
# =============================================================================

@dataclass
class FoliationHolonomyMap:
    """Stable holonomy W^u(x) -> W^u(y) in leaf-chart coordinates: psi_x(s) -> psi_y(t)."""
    source: np.ndarray
    target: np.ndarray
    sources: np.ndarray
    targets: np.ndarray
    accuracy: float


def _side(f: SmoothToralMap, start: np.ndarray, D: np.ndarray, max_steps: int = 80) -> int:
    """Sign of the unstable coordinate of f^n(z + D) - f^n(z) once it leaves the local scale."""
    row = f.linear_part.coordinates[0]
    point = start
    for _ in range(max_steps):
        if np.linalg.norm(D) > 0.05:
            break
        D = f.displacement(point[None, :], D[None, :])[0]
        point = f.forward_many(point[None, :])[0]
    value = row @ D
    if np.linalg.norm(D) <= 0.05:
        return 0
    return 1 if value > 0 else -1


def foliation_holonomy(f: SmoothToralMap, x, y, R: float = 0.02, samples: int = 9, tol: Optional[float] = None,
                       depth: int = 12) -> FoliationHolonomyMap:
    """
    Unstable-leaf map from W^u(x) to W^u(y) along local stable leaves, by bisection.

    Raises:
        LeafGrowthFailed: If the intersection cannot be bracketed
    """
    if f.dimension != 2:
        raise ValueError("Foliation holonomies are computed for surface maps")
    tol = config.leaf_tol if tol is None else tol
    ss = np.linspace(-R, R, samples) if samples > 1 else np.zeros(1)
    x = np.asarray(x, dtype=float) % 1.0
    y = np.asarray(y, dtype=float) % 1.0
    offset = wrap(y - x)
    if np.linalg.norm(offset) == 0.0:
        return FoliationHolonomyMap(x, y, ss, ss.copy(), 0.0)
    if not f.on_stable_leaf(x, y):
        raise LeafGrowthFailed(f"{y} is not on the local stable leaf of {x}")
    chart_x = LeafChart(f, x, UNSTABLE, depth)
    chart_y = LeafChart(f, y, UNSTABLE, depth)
    sources = chart_x.displacements(ss)

    def side(t: float, s_index: int) -> int:
        z = (x + sources[s_index]) % 1.0
        D = offset + chart_y.displacements([t])[0] - sources[s_index]
        return _side(f, z, D)

    targets = np.zeros_like(ss)
    width = 4.0 * float(np.linalg.norm(offset)) + 1e-3
    for i, s in enumerate(ss):
        lo, hi = s - width, s + width
        for _ in range(10):
            if side(lo, i) < 0 < side(hi, i):
                break
            lo, hi = s - 2.0 * (s - lo), s + 2.0 * (hi - s)
        else:
            raise LeafGrowthFailed(f"No sign change around s = {s:.3g}")
        for _ in range(200):
            if hi - lo <= tol:
                break
            mid = 0.5 * (lo + hi)
            sign = side(mid, i)
            if sign == 0:
                lo = hi = mid
                break
            if sign < 0:
                lo = mid
            else:
                hi = mid
        targets[i] = 0.5 * (lo + hi)
    accuracy = tol + 10.0 * R * R * f.rates.gamma ** depth
    return FoliationHolonomyMap(x, y, ss, targets, accuracy)


class LeafMultiplierGenerator(Generator):
    """Scalar cocycle ||Df_x e_x|| along the unit tangent of a one-dimensional invariant direction."""

    def __init__(self, system: SmoothToralMap, leaf: str = UNSTABLE):
        self.system = system
        self.leaf = leaf
        self.dimension = 1

    def matrix(self, x, base) -> np.ndarray:
        Qu, Qs = self.system.invariant_frames(np.asarray(x, dtype=float)[None, :])
        e = (Qu if self.leaf == UNSTABLE else Qs)[0][:, 0]
        return np.array([[float(np.linalg.norm(self.system.derivative(x) @ e))]])

    def validate(self, base) -> None:
        pass


@dataclass
class DerivativeCheckReport:
    source: np.ndarray
    target: np.ndarray
    steps: List[float]
    quotients: List[float]
    deviations: List[float]
    ratios: List[float]
    richardson: List[float]
    cocycle_holonomy: float
    holonomy_depth: int
    holonomy_accuracy: float
    passed: bool


def rounding_depth(f: SmoothToralMap, distance: float) -> int:
    """
    Depth at which the truncation error nu^n d of a stable holonomy meets the
    rounding carried along the forward orbit of the target, eps gamma_hat^n.
    """
    eps = float(np.finfo(float).eps)
    if distance <= eps:
        return 1
    rates = f.rates
    return max(1, int(math.ceil(math.log(distance / eps) / math.log(rates.gamma_hat / rates.nu))))


def holonomy_derivative_check(f: SmoothToralMap, x, y, steps: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5),
                              beta: float = 1.0) -> DerivativeCheckReport:
    """
    Finite-difference derivative of the stable foliation holonomy at x against the cocycle holonomy.

    The cocycle holonomy is truncated at the rounding depth of the pair, and the
    ladder counts as monotone up to the resulting accuracy of H.

    Raises:
        BunchingFailed: If the map is not bunched for beta
    """
    _require_bunching(f, beta)
    A = CocycleSpec(f, LeafMultiplierGenerator(f, UNSTABLE), hoelder_exponent=beta, name="Df|E^u", validate=False)
    rng = np.random.default_rng(config.seed)
    certificate = bunching_margin(A, beta, 16, [np.asarray(x, float), np.asarray(y, float)]
                                  + list(rng.random((4, f.dimension))))
    distance = f.distance(x, y)
    depth = rounding_depth(f, distance)
    tol = max(1e-12, certificate.constant * certificate.theta ** depth * distance ** beta)
    operator = stable_holonomy(A, x, y, tol=tol, certificate=certificate)
    H = float(operator.matrix[0, 0])
    accuracy = operator.error_bound + float(np.finfo(float).eps) * f.rates.gamma_hat ** operator.depth

    quotients, deviations, ratios = [], [], []
    for t in steps:
        leaf_map = foliation_holonomy(f, x, y, R=t, samples=2, tol=1e-15)
        quotient = float((leaf_map.targets[1] - leaf_map.targets[0]) / (2.0 * t))
        quotients.append(quotient)
        deviations.append(abs(quotient - H))
        ratios.append(abs(quotient - H) / t)
    richardson = [(4.0 * b - a) / 3.0 for a, b in zip(quotients, quotients[1:])]
    monotone = all(b <= a + accuracy + 1e-12 for a, b in zip(deviations, deviations[1:]))
    passed = bool(monotone and deviations[-1] < 1e-3)
    if config.verbose_logging:
        print(f"📊 Holonomy derivative ladder: {['%.2e' % d for d in deviations]} "
              f"({'pass' if passed else 'fail'})")
    return DerivativeCheckReport(np.asarray(x, float), np.asarray(y, float), list(steps), quotients,
                                 deviations, ratios, richardson, H, operator.depth, accuracy, passed)


# =============================================================================
# METRICS AND TRANSLATION CONJUGATES
# =============================================================================

def metric_isometry_residual(samples: Sequence[Tuple[object, object, np.ndarray]], g: MetricField) -> float:
    """max over (x, y, M) of the g-length distortion of M: T_x -> T_y."""
    if not samples:
        return 0.0
    return max(g.distortion(x, y, np.asarray(M, dtype=float)) for x, y, M in samples)


def pushed_metric(h: ConjugacyField, step: float = 1e-4) -> MetricField:
    """g_x = Dh(x)^T Dh(x), the Euclidean metric pulled back by h."""
    def provider(x):
        J = h.jacobian(x, step)
        return J.T @ J

    return MetricField(provider=provider)


def translation_conjugates(h: ConjugacyField, v, points: Sequence, step: float = 1e-5) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Samples (x, T_v x, DT_v(x)) for T_v = h^{-1} o (. + v) o h, with DT_v by central differences."""
    v = np.asarray(v, dtype=float)

    def translate(x):
        return h.inverse(h(x) + v)

    samples = []
    for x in points:
        x = np.asarray(x, dtype=float)
        d = len(x)
        columns = [wrap(translate(x + step * e) - translate(x - step * e)) / (2.0 * step) for e in np.eye(d)]
        samples.append((x, translate(x) % 1.0, np.array(columns).T))
    return samples


# =============================================================================
# SKEW PRODUCT ON T^4
# =============================================================================

SKEW_A = [[2, 1], [1, 1]]
SKEW_B = [[3, 1], [2, 1]]


def skew_product_map(epsilon: float, A=SKEW_A, B=SKEW_B) -> PerturbedToralMap:
    """f(x, y) = (A x + eps sin(2 pi y_1) v, B y) with v the expanding eigenvector of A."""
    A = np.array(A, dtype=float)
    values, vectors = np.linalg.eig(A)
    v = np.real(vectors[:, int(np.argmax(np.abs(values)))])
    v = v / np.linalg.norm(v)
    L = ToralAutomorphism(np.block([[np.array(A), np.zeros((2, 2))], [np.zeros((2, 2)), np.array(B, dtype=float)]]))
    term = ([0, 0, 1, 0], [epsilon * v[0], epsilon * v[1], 0.0, 0.0], [0.0, 0.0, 0.0, 0.0])
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        return PerturbedToralMap(L, TrigPolynomial(4, [term] if epsilon else []), strict=False)


@dataclass
class SkewDemoReport:
    epsilon: float
    n_max: int
    points_checked: int
    max_relative_error: float
    rows: List[Tuple[int, int, float, float]]
    weakly_irreducible: bool
    eigenvalues_match: bool


def t4_skew_periodic_demo(epsilon: float, n_max: int, conjugators_per_period: int = 4) -> SkewDemoReport:
    """
    Periodic spectra of the skew product against {lambda^n, lambda^-n, mu^n, mu^-n}.

    Df depends only on the second factor, so every y in Fix(B^n) is checked.
    Rows are (n, |Fix(B^n)|, worst relative eigenvalue error, worst conjugator condition number).
    """
    f = skew_product_map(epsilon)
    A = ToralAutomorphism(SKEW_A)
    B = ToralAutomorphism(SKEW_B)
    lam = float(np.max(np.abs(A.eigenvalues)))
    mu = float(np.max(np.abs(B.eigenvalues)))
    rows = []
    worst_overall = 0.0
    checked = 0
    for n in range(1, n_max + 1):
        expected = np.sort(np.array([lam ** n, lam ** -n, mu ** n, mu ** -n]))
        power = np.linalg.matrix_power(f.linear_part.matrix, n).astype(float)
        target = PeriodicDatum(None, power, np.linalg.eigvals(power))
        worst, worst_condition = 0.0, 1.0
        fixed = B.fixed_points(n)
        for index, y in enumerate(fixed):
            point = np.array([0.0, 0.0, float(y[0]), float(y[1])])
            product = np.eye(4)
            for _ in range(n):
                product = f.derivative(point) @ product
                point = f.forward_many(point[None, :])[0]
            if np.any(product[2:, :2] != 0.0):
                raise RigidityError("Derivative lost its block-triangular structure")
            found = np.sort(np.abs(np.concatenate([np.linalg.eigvals(product[:2, :2]),
                                                   np.linalg.eigvals(product[2:, 2:])])))
            worst = max(worst, float(np.max(np.abs(found - expected) / expected)))
            if index < conjugators_per_period:
                match = match_periodic_conjugator(PeriodicDatum(None, product, np.linalg.eigvals(product)), target)
                worst_condition = max(worst_condition, match.condition_number if match else math.inf)
            checked += 1
        rows.append((n, len(fixed), worst, worst_condition))
        worst_overall = max(worst_overall, worst)
    irreducible = weak_irreducibility_check(f.linear_part).weakly_irreducible
    if config.verbose_logging:
        print(f"📊 Skew product: {checked} periodic spectra, worst relative error {worst_overall:.2e}")
    return SkewDemoReport(epsilon, n_max, checked, worst_overall, rows, irreducible, worst_overall < 1e-8)
