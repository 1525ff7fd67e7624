"""Conjugacies between cocycles built from periodic data."""

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import sympy

from .base import PeriodicOrbit, SftBase, SymbolicPoint, anosov_closing, point_key, sample_points
from .cocycle import (ConjugatedGenerator, ConstantGenerator, CocycleSpec, LocallyConstantGenerator,
                      bunching_margin, eigenvalue_clusters, gl_distance, match_periodic_conjugator,
                      periodic_data, rank_profile, BunchingCertificate, PeriodicDatum)
from .config import config, parallel_map
from .holonomy import stable_holonomy, unstable_holonomy


class TransferError(Exception):
    """Custom exception for transfer-map-related errors."""
    pass


class NotDiagonalizable(TransferError):
    """The constant cocycle has a nontrivial Jordan block."""
    pass


class PeriodicObstruction(TransferError):
    """Periodic data rule out a solution; carries the witness orbit."""

    def __init__(self, message: str, witness: Optional[object] = None):
        super().__init__(message)
        self.witness = witness


class BadConjugator(TransferError):
    """The supplied matrix does not conjugate the cocycle to the target at q."""
    pass


class NoRecurrenceFound(TransferError):
    """Fewer than three recurrence times below the horizon."""
    pass


class HomoclinicInconsistency(TransferError):
    """Stable and unstable constructions disagree at a homoclinic point."""

    def __init__(self, message: str, witness: Optional[object] = None):
        super().__init__(message)
        self.witness = witness


class MissingSample(TransferError):
    """The transfer map has no value at the requested point."""
    pass


class NotCoprime(TransferError):
    pass


class CombineFailed(TransferError):
    """The combined conjugacy does not conjugate the cocycles over f."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def _matrix_of(B: Union[CocycleSpec, np.ndarray, Sequence]) -> np.ndarray:
    if isinstance(B, CocycleSpec):
        if not isinstance(B.generator, ConstantGenerator):
            raise ValueError("A constant cocycle is required")
        return B.generator.value
    return np.array(B, dtype=float)


# =============================================================================
# ISOMETRIZING METRICS
# =============================================================================

@dataclass(frozen=True)
class IsometrizingMetric:
    """Inner product <u, v>_G = u^T G v in which B is conformal on each Lyapunov space."""
    gram: np.ndarray
    basis: np.ndarray
    moduli: Tuple[float, ...]

    def operator_norm(self, X: np.ndarray) -> float:
        """||X||_G = ||W^{-1} X W|| for the conformal basis W."""
        return float(np.linalg.norm(np.linalg.solve(self.basis, X @ self.basis), 2))


def isometrizing_inner_product(B) -> IsometrizingMetric:
    """
    Gram matrix in which the constant matrix B acts by rotation-scalings.

    Args:
        B: Constant matrix, diagonalizable over the complex numbers

    Returns:
        IsometrizingMetric normalized to det G = 1

    Raises:
        NotDiagonalizable: If B has a nontrivial Jordan block (tolerance 1e-9)
    """
    B = _matrix_of(B)
    d = B.shape[0]
    columns: List[np.ndarray] = []
    moduli: List[float] = []
    for value, multiplicity in eigenvalue_clusters(np.linalg.eigvals(B)):
        if rank_profile(B, value, multiplicity)[0] != d - multiplicity:
            raise NotDiagonalizable(f"Eigenvalue {value:.6g} has a nontrivial Jordan block")
        if value.imag < -1e-12:
            continue
        if abs(value.imag) <= 1e-12:
            space = scipy.linalg.null_space(B - value.real * np.eye(d), rcond=1e-9)
            columns.extend(space.T)
            moduli.extend([abs(value)] * multiplicity)
        else:
            space = scipy.linalg.null_space(B.astype(complex) - value * np.eye(d), rcond=1e-9)
            for v in space.T:
                v = v * math.sqrt(2.0)
                columns.extend([v.real, v.imag])
                moduli.extend([abs(value)] * 2)
    W = np.array(columns).T
    if W.shape != (d, d):
        raise NotDiagonalizable("Eigenvectors do not span R^d")
    W_inv = np.linalg.inv(W)
    gram = W_inv.T @ W_inv
    scale = np.linalg.det(gram) ** (1.0 / d)
    W = W * math.sqrt(scale)
    return IsometrizingMetric(gram / scale, W, tuple(moduli))


def recurrence_times(B, n_max: int, tol: float = 1e-8) -> List[int]:
    """
    Times n <= n_max with ||B^n - Id||_G < tol in the isometrizing norm.

    Raises:
        NoRecurrenceFound: If fewer than three times are found
    """
    metric = isometrizing_inner_product(B)
    if max(abs(m - 1.0) for m in metric.moduli) > config.isometry_tol:
        raise ValueError("B is not isometric in its isometrizing inner product")
    conformal = np.linalg.solve(metric.basis, _matrix_of(B) @ metric.basis)
    power = np.eye(conformal.shape[0])
    times = []
    for n in range(1, n_max + 1):
        power = conformal @ power
        if np.linalg.norm(power - np.eye(power.shape[0]), 2) < tol:
            times.append(n)
    if len(times) < 3:
        raise NoRecurrenceFound(f"Only {len(times)} recurrence times up to {n_max}; raise the horizon")
    return times


# =============================================================================
# SCALAR LIVSIC EQUATION
# =============================================================================

@dataclass(frozen=True)
class LivsicSolution:
    """phi on cylinders [x_lo .. x_hi] with a(x) phi(x) / phi(fx) = rho."""
    phi: Dict[Tuple[int, ...], float]
    window: Tuple[int, int]
    rho: float
    obstruction: float
    residual: float

    def value(self, x: SymbolicPoint) -> float:
        lo, hi = self.window
        return self.phi[x.window(lo, hi)] if hi >= lo else self.phi[()]


def scalar_livsic(a: CocycleSpec, rho: float, n_max: Optional[int] = None) -> LivsicSolution:
    """
    Solve the scalar cohomological equation for a locally constant positive cocycle.

    Args:
        a: One-dimensional locally constant cocycle over a subshift
        rho: Target constant
        n_max: Largest period in the obstruction scan

    Returns:
        LivsicSolution, normalized to phi = 1 on the first cylinder

    Raises:
        PeriodicObstruction: With the witness orbit when a periodic product differs from rho^n
    """
    base = a.base
    generator = a.generator
    if not isinstance(base, SftBase) or not isinstance(generator, LocallyConstantGenerator) or a.dimension != 1:
        raise ValueError("scalar_livsic needs a one-dimensional locally constant cocycle over a subshift")
    if rho <= 0:
        raise ValueError("rho must be positive")
    lo, hi = generator.window
    weights = {word: float(value[0, 0]) for word, value in generator.table.items()}
    if any(w <= 0 for w in weights.values()):
        raise ValueError("The scalar cocycle must be positive")

    length = hi - lo
    vertices = base.admissible_words(length) if length else [()]
    n_max = n_max or min(max(len(vertices), 1), 12)
    obstruction = 0.0
    for orbit in base.enumerate_periodic_orbits(n_max):
        product = a.iterate(orbit.point, orbit.period, condition_cap=None)[0, 0]
        deviation = abs(product / rho ** orbit.period - 1.0)
        obstruction = max(obstruction, deviation)
        if deviation > 1e-6:
            raise PeriodicObstruction(f"Periodic product at {orbit.label()} deviates by {deviation:.3g}", orbit)

    log_rho = math.log(rho)
    potential = {vertices[0]: 0.0}
    queue = deque([vertices[0]])
    edges = [w for w in base.admissible_words(length + 1)]
    outgoing: Dict[Tuple[int, ...], List[Tuple[int, ...]]] = {}
    for w in edges:
        outgoing.setdefault(w[:-1] if length else (), []).append(w)
    while queue:
        u = queue.popleft()
        for w in outgoing.get(u, []):
            v = w[1:] if length else ()
            if v not in potential:
                potential[v] = potential[u] + math.log(weights[w]) - log_rho
                queue.append(v)
    residual = 0.0
    for w in edges:
        u, v = (w[:-1], w[1:]) if length else ((), ())
        gap = abs(potential[v] - potential[u] - math.log(weights[w]) + log_rho)
        residual = max(residual, gap)
        if gap > 1e-8:
            raise PeriodicObstruction(f"Cohomological equation fails on cylinder {w} by {gap:.3g}", w)
    phi = {v: math.exp(p) for v, p in potential.items()}
    return LivsicSolution(phi, (lo, hi - 1), rho, obstruction, residual)


# =============================================================================
# TRANSFER MAPS
# =============================================================================

def normalize_at_fixed_point(A: CocycleSpec, q, C_q, B) -> CocycleSpec:
    """
    A'_x = C_q^{-1} A_x C_q, so that A'_q = B.

    Raises:
        BadConjugator: If C_q does not conjugate A_q to B within 1e-8
    """
    C_q = np.array(C_q, dtype=float)
    B = _matrix_of(B)
    A_q = A.value(q)
    residual = np.linalg.norm(A_q - C_q @ B @ np.linalg.inv(C_q), 2)
    if residual >= 1e-8 * np.linalg.norm(A_q, 2):
        raise BadConjugator(f"C(q) leaves residual {residual:.3g} at q")
    return CocycleSpec(A.base, ConjugatedGenerator(A.generator, C_q), A.hoelder_exponent,
                       name=f"{A.name}@q", validate=False)


@dataclass(frozen=True)
class HolderCertificate:
    beta: float
    M: float
    K_prime: float

    @property
    def constant(self) -> float:
        return 2.0 * self.M * self.K_prime


class TransferMap:
    """
    Sampled conjugacy x -> C(x).

    Values at stored samples are returned directly, other homoclinic points
    are resolved on demand, and arbitrary symbolic points are projected to the
    homoclinic point agreeing with them on [-window, window].
    """

    def __init__(self, anchor, anchor_matrix: np.ndarray, samples: Dict[object, np.ndarray],
                 resolver: Optional[Callable[[object], np.ndarray]] = None,
                 base: Optional[SftBase] = None, window: Optional[int] = None):
        self.anchor = anchor
        self.anchor_matrix = np.array(anchor_matrix, dtype=float)
        self.samples = dict(samples)
        self.resolver = resolver
        self.base = base
        self.window = window
        self.certificate: Optional[HolderCertificate] = None
        self.conjugacy_residual = math.nan
        self.homoclinic_residual = math.nan

    @classmethod
    def from_function(cls, function: Callable[[object], np.ndarray], anchor=None) -> 'TransferMap':
        """Transfer map defined everywhere by a function (planted conjugacies)."""
        anchor_matrix = function(anchor) if anchor is not None else np.eye(1)
        return cls(anchor, anchor_matrix, {}, resolver=function)

    def lookup(self, x) -> np.ndarray:
        """Value at x; raises MissingSample when x is neither stored nor resolvable."""
        key = point_key(x)
        value = self.samples.get(key)
        if value is not None:
            return value
        if self.resolver is None:
            raise MissingSample(f"No transfer value at {x}")
        value = self.resolver(x)
        self.samples[key] = value
        return value

    def project(self, x: SymbolicPoint) -> SymbolicPoint:
        """Homoclinic point agreeing with x on [-m, m] and with the anchor elsewhere."""
        if self.base is None or self.window is None:
            return x
        a = self.anchor.symbol(0)
        m = self.window
        while m >= 0:
            word = x.window(-m, m)
            if self.base.allowed(a, word[0]) and self.base.allowed(word[-1], a):
                return SymbolicPoint((a,), word, (a,), lo=-m)
            m -= 1
        return self.anchor

    def __call__(self, x) -> np.ndarray:
        if isinstance(x, SymbolicPoint) and not _is_homoclinic(x, self.anchor):
            x = self.project(x)
        return self.lookup(x)

    def reanchored(self, left: np.ndarray) -> 'TransferMap':
        """The map x -> left C(x)."""
        left = np.array(left, dtype=float)
        resolver = None if self.resolver is None else (lambda x: left @ self.resolver(x))
        result = TransferMap(self.anchor, left @ self.anchor_matrix,
                             {k: left @ v for k, v in self.samples.items()}, resolver, self.base, self.window)
        result.homoclinic_residual = self.homoclinic_residual
        return result

    def sample_items(self) -> List[Tuple[object, np.ndarray]]:
        return sorted(self.samples.items(), key=lambda item: str(item[0]))


def _is_homoclinic(x: SymbolicPoint, q: SymbolicPoint) -> bool:
    return x.past == q.past and x.future == q.future


def _homoclinic_sample(base: SftBase, q: SymbolicPoint, depth: int, limit: int) -> List[SymbolicPoint]:
    """All homoclinic points of the given depth, or a seeded sample of ``limit`` of them."""
    a = q.symbol(0)
    power = sympy.Matrix(base.transition_matrix.tolist()) ** (2 * depth + 2)
    if int(power[a, a]) <= limit:
        return base.homoclinic_points(q, depth)
    rng = np.random.default_rng(config.seed)
    found = {q}
    attempts = 0
    while len(found) < limit and attempts < 50 * limit:
        attempts += 1
        word = [a]
        for _ in range(2 * depth + 1):
            successors = base._successors[word[-1]]
            word.append(successors[int(rng.integers(len(successors)))])
        if base.allowed(word[-1], a):
            found.add(SymbolicPoint((a,), tuple(word[1:]), (a,), lo=-depth))
    found.discard(q)
    return [q] + sorted(found, key=lambda p: p.to_text())


def holder_certificate(base: SftBase, points: List[SymbolicPoint], matrices: List[np.ndarray],
                       beta: float) -> HolderCertificate:
    """K' = max d_GL(C(x), C(y)) / (2 M dist(x, y)^beta) over all stored pairs."""
    C = np.array(matrices)
    C_inv = np.linalg.inv(C)
    M = float(max(np.linalg.norm(C, 2, axis=(1, 2)).max(), np.linalg.norm(C_inv, 2, axis=(1, 2)).max()))
    if len(points) < 2:
        return HolderCertificate(beta, M, 0.0)
    radius = max(max(abs(p.lo), abs(p.hi)) for p in points) + 1
    W = np.array([p.window(-radius, radius) for p in points])
    offsets = np.abs(np.arange(-radius, radius + 1))
    i, j = np.triu_indices(len(points), k=1)
    differ = W[i] != W[j]
    index = np.where(differ, offsets, 2 * radius + 2).min(axis=1)
    distance = base.nu ** index
    gl = (np.linalg.norm(C[i] - C[j], 2, axis=(1, 2))
          + np.linalg.norm(C_inv[i] - C_inv[j], 2, axis=(1, 2)))
    ratios = gl / (2.0 * M * distance ** beta)
    return HolderCertificate(beta, M, float(ratios.max()))


def build_transfer_fixed_point(A: CocycleSpec, B, q: SymbolicPoint, depth: int,
                               certificate: Optional[BunchingCertificate] = None,
                               limit: int = 512, tol: float = 1e-12) -> TransferMap:
    """
    Transfer map C(x) = H^s_{q,x} on homoclinic points of q.

    Args:
        A: Cocycle normalized so that A_q = B
        B: Constant target matrix (diagonalizable, conformal)
        q: Fixed point of the subshift
        depth: Homoclinic window radius
        certificate: Bunching certificate of A (measured when omitted)
        limit: Largest number of homoclinic points evaluated
        tol: Holonomy truncation tolerance

    Returns:
        Certified TransferMap anchored at (q, Id)

    Raises:
        NotDiagonalizable: If B has a Jordan block
        BadConjugator: If A_q differs from B
        HomoclinicInconsistency: If H^s_{x,q} H^u_{q,x} is not the identity at some point
    """
    base = A.base
    if not isinstance(base, SftBase):
        raise ValueError("The fixed-point construction runs over a subshift")
    if q.periodic_word() is None or len(q.periodic_word()) != 1:
        raise ValueError(f"{q} is not a fixed point")
    B = _matrix_of(B)
    metric = isometrizing_inner_product(B)
    if max(metric.moduli) / min(metric.moduli) - 1.0 > config.isometry_tol:
        raise TransferError("B has several Lyapunov blocks; restrict to one block first")
    if np.linalg.norm(A.value(q) - B, 2) >= 1e-8 * np.linalg.norm(B, 2):
        raise BadConjugator("A is not normalized at q")
    if certificate is None:
        rng = np.random.default_rng(config.seed)
        certificate = bunching_margin(A, A.hoelder_exponent, 24, [q] + sample_points(base, rng, 8))

    with_progress = config.verbose_logging
    points = _homoclinic_sample(base, q, depth, limit)
    if with_progress:
        print(f"🔄 Building transfer map on {len(points)} homoclinic points (depth {depth})")

    def evaluate(x):
        Cs = stable_holonomy(A, q, x, tol, certificate).matrix
        Cu = unstable_holonomy(A, q, x, tol, certificate).matrix
        return Cs, float(np.linalg.norm(np.linalg.solve(Cs, Cu) - np.eye(A.dimension), 2))

    results = parallel_map(evaluate, points)
    worst = int(np.argmax([r for _, r in results]))
    homoclinic_residual = results[worst][1]
    if homoclinic_residual > config.homoclinic_tol:
        raise HomoclinicInconsistency(
            f"||H^s_(x,q) H^u_(q,x) - Id|| = {homoclinic_residual:.3g} at {points[worst]}", points[worst])

    def resolver(x):
        if not _is_homoclinic(x, q):
            raise MissingSample(f"{x} is not homoclinic to the anchor")
        return stable_holonomy(A, q, x, tol, certificate).matrix

    C = TransferMap(q, np.eye(A.dimension), {x: Cs for x, (Cs, _) in zip(points, results)},
                    resolver=resolver, base=base, window=depth)
    C.homoclinic_residual = homoclinic_residual
    C.certificate = holder_certificate(base, points, [Cs for Cs, _ in results], A.hoelder_exponent)
    check = [x for x in points if max(abs(x.lo), abs(x.hi)) <= depth][:64]
    C.conjugacy_residual = verify_conjugacy(A, B, C, check)
    if with_progress:
        print(f"✓ Transfer map: homoclinic residual {homoclinic_residual:.2e}, "
              f"conjugacy residual {C.conjugacy_residual:.2e}")
    return C


@dataclass(frozen=True)
class HomoclinicConsistencyReport:
    value: float
    time: int
    orbit: Optional[PeriodicOrbit]
    periodic_value: float


def homoclinic_consistency(A: CocycleSpec, x: SymbolicPoint, q: SymbolicPoint,
                           times: Sequence[int]) -> HomoclinicConsistencyReport:
    """||A^{2n}_{f^{-n}x} - Id|| at the largest usable recurrence time n, with the closing orbit."""
    usable = [n for n in times if 2 * n <= config.max_horizon and n > max(abs(x.lo), abs(x.hi))]
    if not usable:
        raise ValueError("No recurrence time is long enough for this homoclinic point")
    n = max(usable)
    start = A.base.forward(x, -n)
    identity = np.eye(A.dimension)
    value = float(np.linalg.norm(A.iterate(start, 2 * n, condition_cap=None) - identity, 2))
    orbit, _ = anosov_closing(A.base, start, 2 * n)
    closing = A.iterate(orbit.point, 2 * n, condition_cap=None)
    return HomoclinicConsistencyReport(value, n, orbit, float(np.linalg.norm(closing - identity, 2)))


def verify_conjugacy(A: CocycleSpec, B, C: TransferMap, samples: Sequence[object]) -> float:
    """
    max ||A_x - C(fx) B_x C(x)^{-1}|| / ||A_x|| over samples.

    Raises:
        MissingSample: If C is undefined at a sample or its image
    """
    worst = 0.0
    for x in samples:
        B_x = B.value(x) if isinstance(B, CocycleSpec) else np.asarray(B, dtype=float)
        A_x = A.value(x)
        image = C.lookup(A.base.forward(x)) @ B_x @ np.linalg.inv(C.lookup(x))
        worst = max(worst, float(np.linalg.norm(A_x - image, 2) / np.linalg.norm(A_x, 2)))
    return worst


def conjugacy_from_periodic_data(A: CocycleSpec, B, q: SymbolicPoint, depth: int, **kwargs) -> TransferMap:
    """Periodic conjugator at q, normalization, fixed-point construction and re-anchoring."""
    B = _matrix_of(B)
    datum_a = periodic_data(A, PeriodicOrbit(q, 1))
    datum_b = PeriodicDatum(PeriodicOrbit(q, 1), B, np.linalg.eigvals(B))
    conjugator = match_periodic_conjugator(datum_a, datum_b)
    if conjugator is None:
        raise PeriodicObstruction(f"A_q is not similar to B at {q.to_text()}", q)
    normalized = normalize_at_fixed_point(A, q, conjugator.matrix, B)
    C = build_transfer_fixed_point(normalized, B, q, depth, **kwargs).reanchored(conjugator.matrix)
    C.certificate = holder_certificate(A.base, [x for x, _ in C.sample_items()],
                                       [v for _, v in C.sample_items()], A.hoelder_exponent)
    C.conjugacy_residual = verify_conjugacy(A, B, C, [x for x, _ in C.sample_items()
                                                      if max(abs(x.lo), abs(x.hi)) <= depth][:64])
    return C


def agreement_with_samples(C: TransferMap, planted: Callable[[object], np.ndarray], samples: Sequence[object]) -> float:
    """max gl_distance between a constructed transfer map and an a.e.-defined planted one."""
    return max(gl_distance(C(x), planted(x)) for x in samples)


# =============================================================================
# METRICS
# =============================================================================

class MetricField:
    """Gram matrices g_x, given at samples or by a provider."""

    def __init__(self, grams: Optional[Dict[object, np.ndarray]] = None,
                 provider: Optional[Callable[[object], np.ndarray]] = None):
        self.grams = dict(grams or {})
        self.provider = provider

    def gram(self, x) -> np.ndarray:
        key = point_key(x)
        g = self.grams.get(key)
        if g is None:
            if self.provider is None:
                raise MissingSample(f"No metric at {x}")
            g = self.provider(x)
            self.grams[key] = g
        return g

    def distortion(self, x, y, M: np.ndarray) -> float:
        """max | ||M u||_{g_y} / ||u||_{g_x} - 1 | over u."""
        lower_x = np.linalg.cholesky(self.gram(x))
        lower_y = np.linalg.cholesky(self.gram(y))
        singular = np.linalg.svd(lower_y.T @ M @ np.linalg.inv(lower_x.T), compute_uv=False)
        return float(np.max(np.abs(singular - 1.0)))

    def isometry_residual(self, A: CocycleSpec, samples: Sequence[object]) -> float:
        return max(self.distortion(x, A.base.forward(x), A.value(x)) for x in samples)


def invariant_metric_from_transfer(C: TransferMap) -> MetricField:
    """g_x(u, v) = <C(x)^{-1} u, C(x)^{-1} v>."""
    def provider(x):
        inverse = np.linalg.inv(C(x))
        return inverse.T @ inverse

    return MetricField(provider=provider)


# =============================================================================
# COPRIME COMBINATION
# =============================================================================

@dataclass(frozen=True)
class CoprimeCombineReport:
    N: int
    M: int
    K: int
    r: int
    s: int
    residual: float
    centralizer_residual: float


def bezout(a: int, b: int) -> Tuple[int, int]:
    """(r, s) with a r + b s = gcd(a, b)."""
    r, s, _ = sympy.gcdex(a, b)
    return int(r), int(s)


def combine_coprime(A: CocycleSpec, B, C1: TransferMap, C2: TransferMap, N: int, M: int, K: int,
                    samples: Sequence[object], tol: float = 1e-8) -> CoprimeCombineReport:
    """
    Check that a conjugacy over f^K already conjugates the cocycles over f.

    Args:
        A: Cocycle over f
        B: Constant target matrix
        C1: Transfer map for the power f^(NM)
        C2: Transfer map for the power f^K
        N, M, K: Periods with gcd(NM, K) = 1
        samples: Points where the period-one identity is checked
        tol: Largest accepted relative residual

    Raises:
        NotCoprime: If gcd(NM, K) != 1
        CombineFailed: If C2 fails the period-one identity
    """
    if math.gcd(N * M, K) != 1:
        raise NotCoprime(f"gcd({N * M}, {K}) = {math.gcd(N * M, K)}")
    r, s = bezout(N * M, K)
    if N * M * r + K * s != 1:
        raise RuntimeError("Bezout identity failed")
    B = _matrix_of(B)
    residual = verify_conjugacy(A, B, C2, samples)
    power = np.linalg.matrix_power(B, N * M)
    centralizer = 0.0
    for x in samples:
        D = np.linalg.solve(C1(x), C2(x))
        centralizer = max(centralizer, float(np.linalg.norm(D @ power - power @ D, 2) / np.linalg.norm(power, 2)))
    if config.verbose_logging:
        print(f"📊 Coprime combination: r = {r}, s = {s}, residual {residual:.2e}")
    if residual > tol:
        raise CombineFailed(f"Period-one residual {residual:.3g} exceeds {tol}", residual)
    return CoprimeCombineReport(N, M, K, r, s, residual, centralizer)


# =============================================================================
# UNIPOTENT FAMILY
# =============================================================================

@dataclass
class UnipotentFamily:
    """A_x = [[1, alpha(x)], [0, 1]] against the constant B = [[1, beta], [0, 1]]."""
    base: SftBase
    alpha: Dict[Tuple[int, ...], float]
    beta_const: float
    window: Tuple[int, int] = (0, 0)

    def alpha_at(self, x: SymbolicPoint) -> float:
        return self.alpha[x.window(*self.window)]

    def cocycle(self) -> CocycleSpec:
        table = {w: [[1.0, a], [0.0, 1.0]] for w, a in self.alpha.items()}
        return CocycleSpec(self.base, LocallyConstantGenerator(table, self.window), name="unipotent-A")

    def target(self) -> CocycleSpec:
        return CocycleSpec(self.base, ConstantGenerator([[1.0, self.beta_const], [0.0, 1.0]]), name="unipotent-B")

    def birkhoff_sum(self, x: SymbolicPoint, n: int) -> float:
        total = 0.0
        for _ in range(n):
            total += self.alpha_at(x)
            x = x.shift(1)
        return total


@dataclass
class UnipotentReport:
    conjugate: bool
    ratio_bound: float
    witness: Optional[PeriodicOrbit]
    rows: List[Tuple[str, int, float, float]] = field(default_factory=list)


def unipotent_periodic_criterion(family: UnipotentFamily, orbits: Sequence[PeriodicOrbit],
                                 zero_tol: float = 1e-12) -> UnipotentReport:
    """Periodic conjugacy test: [[1, S], [0, 1]] ~ [[1, n beta], [0, 1]] iff S and n beta vanish together."""
    ratio_bound = 1.0
    witness = None
    rows = []
    for orbit in orbits:
        S = family.birkhoff_sum(orbit.point, orbit.period)
        target = orbit.period * family.beta_const
        rows.append((orbit.label(), orbit.period, S, target))
        zero_s, zero_t = abs(S) <= zero_tol, abs(target) <= zero_tol
        if zero_s != zero_t:
            if witness is None:
                witness = orbit
            continue
        if not zero_s:
            ratio = S / target
            ratio_bound = max(ratio_bound, abs(ratio), 1.0 / abs(ratio))
    return UnipotentReport(witness is None, ratio_bound if witness is None else math.inf, witness, rows)


def coboundary_divergence(family: UnipotentFamily, x: SymbolicPoint, n: int) -> Tuple[np.ndarray, float]:
    """Partial sums of alpha - beta along the orbit of x and their log-log growth slope."""
    sums = np.zeros(n)
    total = 0.0
    for k in range(n):
        total += family.alpha_at(x) - family.beta_const
        sums[k] = total
        x = x.shift(1)
    steps = np.arange(1, n + 1)
    magnitude = np.abs(sums)
    mask = magnitude > 0
    if mask.sum() < 2:
        return sums, 0.0
    slope, _ = np.polyfit(np.log(steps[mask]), np.log(magnitude[mask]), 1)
    return sums, float(slope)
