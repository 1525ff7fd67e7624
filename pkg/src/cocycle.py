"""Linear cocycles over hyperbolic base systems."""

import cmath
import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize

from .base import (BaseSystem, PeriodicOrbit, PowerBase, ReversedBase, SftBase, SmoothToralMap,
                   SymbolicPoint)
from .config import config, parallel_map


class CocycleError(Exception):
    """Custom exception for cocycle-related errors."""
    pass


class IllConditioned(CocycleError):
    """A product of generator values exceeded the condition cap."""
    pass


class Singular(CocycleError):
    """A matrix that must be invertible is singular."""
    pass


_CONFIGURED_CAP = -1.0


def _as_array(x) -> np.ndarray:
    return np.asarray([float(c) for c in x])


# =============================================================================
# GENERATORS
# =============================================================================

class Generator(ABC):
    """Source of the fiber maps A_x."""

    dimension: int

    @abstractmethod
    def matrix(self, x, base: BaseSystem) -> np.ndarray:
        pass

    def validate(self, base: BaseSystem) -> None:
        """Check the generator against its base; raise ValueError if it does not fit."""


class ConstantGenerator(Generator):
    def __init__(self, matrix):
        self.value = np.array(matrix, dtype=float)
        self.dimension = self.value.shape[0]

    def matrix(self, x, base: BaseSystem) -> np.ndarray:
        return self.value

    def validate(self, base: BaseSystem) -> None:
        _check_condition(self.value, "constant generator")


class LocallyConstantGenerator(Generator):
    """A_x = table[x_a .. x_b] for the symbol window [a, b]."""

    def __init__(self, table: Dict[Tuple[int, ...], Sequence], window: Tuple[int, int] = (0, 0)):
        if window[0] > window[1]:
            raise ValueError(f"Empty window {window}")
        self.window = (int(window[0]), int(window[1]))
        self.table = {tuple(int(s) for s in key): np.array(value, dtype=float) for key, value in table.items()}
        shapes = {value.shape for value in self.table.values()}
        if len(shapes) != 1:
            raise ValueError("All table entries must have the same shape")
        self.dimension = shapes.pop()[0]

    def matrix(self, x: SymbolicPoint, base: BaseSystem) -> np.ndarray:
        key = x.window(*self.window)
        try:
            return self.table[key]
        except KeyError:
            raise CocycleError(f"No table entry for window {key}")

    def validate(self, base: BaseSystem) -> None:
        if not isinstance(base, SftBase):
            raise ValueError("Locally constant generators need a symbolic base")
        length = self.window[1] - self.window[0] + 1
        missing = [w for w in base.admissible_words(length) if w not in self.table]
        if missing:
            raise ValueError(f"Generator table misses admissible windows {missing[:5]}")
        for key, value in self.table.items():
            _check_condition(value, f"table entry {key}")


class TailGenerator(Generator):
    """
    Hoelder (not locally constant) generator over a subshift.

    A_x = T[x_a .. x_b] expm(sum_j kappa^j G[x_{a-j}] + sum_j kappa^j G'[x_{b+j}]),
    j >= 1, with kappa = nu^beta. Dependence on a coordinate at distance j from
    the core window decays like kappa^j.
    """

    def __init__(self, core: Dict[Tuple[int, ...], Sequence], kappa: float,
                 past: Optional[Dict[int, Sequence]] = None, future: Optional[Dict[int, Sequence]] = None,
                 window: Tuple[int, int] = (-1, 0)):
        if not 0.0 < kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")
        self.core = LocallyConstantGenerator(core, window)
        self.window = self.core.window
        self.dimension = self.core.dimension
        self.kappa = float(kappa)
        self.past = {int(k): np.array(v, dtype=float) for k, v in (past or {}).items()}
        self.future = {int(k): np.array(v, dtype=float) for k, v in (future or {}).items()}
        self.depth = int(math.ceil(math.log(1e-17) / math.log(self.kappa)))
        self._cache: Dict[Tuple, np.ndarray] = {}

    def _exponent(self, symbols: Sequence[int], table: Dict[int, np.ndarray]) -> np.ndarray:
        total = np.zeros((self.dimension, self.dimension))
        if not table:
            return total
        weight = 1.0
        for s in symbols:
            weight *= self.kappa
            if s in table:
                total = total + weight * table[s]
        return total

    def matrix(self, x: SymbolicPoint, base: BaseSystem) -> np.ndarray:
        a, b = self.window
        past_symbols = tuple(x.symbol(a - j) for j in range(1, self.depth + 1)) if self.past else ()
        future_symbols = tuple(x.symbol(b + j) for j in range(1, self.depth + 1)) if self.future else ()
        key = (x.window(a, b), past_symbols, future_symbols)
        value = self._cache.get(key)
        if value is None:
            exponent = self._exponent(past_symbols, self.past) + self._exponent(future_symbols, self.future)
            value = self.core.matrix(x, base) @ scipy.linalg.expm(exponent)
            self._cache[key] = value
        return value

    def validate(self, base: BaseSystem) -> None:
        self.core.validate(base)
        spread = sum(np.linalg.norm(g, 2) for g in list(self.past.values()) + list(self.future.values()))
        worst = max(np.linalg.cond(v) for v in self.core.table.values())
        bound = worst * math.exp(2.0 * spread * self.kappa / (1.0 - self.kappa))
        if bound > config.condition_cap:
            raise ValueError(f"Tail generator condition bound {bound:.3g} exceeds the cap")


class DerivativeGenerator(Generator):
    """A_x = Df_x for a smooth toral map."""

    def __init__(self, system: SmoothToralMap):
        self.system = system
        self.dimension = system.dimension

    def matrix(self, x, base: BaseSystem) -> np.ndarray:
        return self.system.derivative(_as_array(x))

    def validate(self, base: BaseSystem) -> None:
        if not isinstance(base, SmoothToralMap):
            raise ValueError("Derivative generators need a toral base")


class CoboundaryGenerator(Generator):
    """A_x = Cbar(f x) B_x Cbar(x)^{-1}, the cocycle cohomologous to B through Cbar."""

    def __init__(self, inner: Generator, transfer: Generator):
        if inner.dimension != transfer.dimension:
            raise ValueError("Dimensions of the inner cocycle and the transfer map differ")
        self.inner = inner
        self.transfer = transfer
        self.dimension = inner.dimension

    def matrix(self, x, base: BaseSystem) -> np.ndarray:
        after = self.transfer.matrix(base.forward(x), base)
        before = self.transfer.matrix(x, base)
        return after @ self.inner.matrix(x, base) @ np.linalg.inv(before)

    def validate(self, base: BaseSystem) -> None:
        self.inner.validate(base)
        self.transfer.validate(base)


class ConjugatedGenerator(Generator):
    """A'_x = C^{-1} A_x C for a constant matrix C."""

    def __init__(self, inner: Generator, conjugator):
        self.inner = inner
        self.conjugator = np.array(conjugator, dtype=float)
        self.inverse = np.linalg.inv(self.conjugator)
        self.dimension = inner.dimension

    def matrix(self, x, base: BaseSystem) -> np.ndarray:
        return self.inverse @ self.inner.matrix(x, base) @ self.conjugator

    def validate(self, base: BaseSystem) -> None:
        self.inner.validate(base)


class PowerGenerator(Generator):
    """Generator of the cocycle A^N over f^N."""

    def __init__(self, cocycle: 'CocycleSpec', power: int):
        self.cocycle = cocycle
        self.power = power
        self.dimension = cocycle.dimension

    def matrix(self, x, base: BaseSystem) -> np.ndarray:
        return self.cocycle.iterate(x, self.power, condition_cap=None)


class InverseGenerator(Generator):
    """Generator of the inverse cocycle over f^{-1}: x -> (A_{f^{-1} x})^{-1}."""

    def __init__(self, cocycle: 'CocycleSpec'):
        self.cocycle = cocycle
        self.dimension = cocycle.dimension

    def matrix(self, x, base: BaseSystem) -> np.ndarray:
        return np.linalg.inv(self.cocycle.value(self.cocycle.base.forward(x, -1)))


def _check_condition(matrix: np.ndarray, label: str) -> None:
    condition = np.linalg.cond(matrix)
    if not np.isfinite(condition) or condition > config.condition_cap:
        raise ValueError(f"{label} has condition number {condition:.3g} above the cap")


# =============================================================================
# COCYCLES
# =============================================================================

class CocycleSpec:
    """Linear cocycle (f, A) with fiber maps produced by a generator."""

    def __init__(self, base: BaseSystem, generator: Generator, hoelder_exponent: float = 1.0,
                 name: str = "cocycle", validate: bool = True):
        if not 0.0 < hoelder_exponent <= 1.0:
            raise ValueError("Hoelder exponent must lie in (0, 1]")
        self.base = base
        self.generator = generator
        self.dimension = generator.dimension
        self.hoelder_exponent = float(hoelder_exponent)
        self.name = name
        if validate:
            generator.validate(base)

    def __repr__(self) -> str:
        return f"CocycleSpec({self.name!r}, d={self.dimension}, beta={self.hoelder_exponent})"

    def value(self, x) -> np.ndarray:
        return self.generator.matrix(x, self.base)

    def scaled_iterate(self, x, n: int, condition_cap: Optional[float] = None) -> Tuple[np.ndarray, float]:
        """
        Ordered product A^n_x as (matrix, log scale) with the matrix renormalized to unit norm.

        Raises:
            IllConditioned: If condition_cap is given and the running product exceeds it
        """
        if abs(n) > config.max_horizon:
            raise ValueError(f"|n| = {abs(n)} exceeds the horizon {config.max_horizon}")
        product = np.eye(self.dimension)
        log_scale = 0.0
        point = x
        for k in range(abs(n)):
            if n > 0:
                product = self.value(point) @ product
                point = self.base.forward(point)
            else:
                point = self.base.forward(point, -1)
                product = _solve(self.value(point), product)
            size = np.linalg.norm(product, 2)
            product = product / size
            log_scale += math.log(size)
            if condition_cap is not None and (k % 8 == 7 or k == abs(n) - 1):
                condition = np.linalg.cond(product)
                if condition > condition_cap:
                    raise IllConditioned(f"Condition {condition:.3g} of A^{n} exceeds cap {condition_cap:.3g}")
        return product, log_scale

    def iterate(self, x, n: int, condition_cap: Optional[float] = _CONFIGURED_CAP) -> np.ndarray:
        """
        A^n_x = A_{f^{n-1}x} ... A_x, and (A^{-n}_{f^{n}x})^{-1} style products for n < 0.

        Args:
            x: Base point
            n: Number of steps (|n| at most the configured horizon)
            condition_cap: Cap on the running condition number; defaults to the
                configured cap, None disables the check

        Returns:
            The d x d matrix A^n_x
        """
        cap = config.condition_cap if condition_cap == _CONFIGURED_CAP else condition_cap
        product, log_scale = self.scaled_iterate(x, n, cap)
        return product * math.exp(log_scale)


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as e:
        raise Singular(f"Generator value is singular: {e}")


def iterate(A: CocycleSpec, x, n: int) -> np.ndarray:
    """Ordered product of generator values along the orbit segment of x."""
    return A.iterate(x, n)


def power_cocycle(A: CocycleSpec, power: int) -> CocycleSpec:
    """The cocycle A^N over the power base f^N."""
    return CocycleSpec(PowerBase(A.base, power), PowerGenerator(A, power), A.hoelder_exponent,
                       name=f"{A.name}^{power}", validate=False)


def inverse_cocycle(A: CocycleSpec) -> CocycleSpec:
    """The cocycle generating A^{-n} over the time-reversed base."""
    return CocycleSpec(ReversedBase(A.base), InverseGenerator(A), A.hoelder_exponent,
                       name=f"{A.name}^-1", validate=False)


def gl_distance(A, B) -> float:
    """||A - B|| + ||A^{-1} - B^{-1}|| in the operator norm."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    for label, M in (("A", A), ("B", B)):
        if np.linalg.svd(M, compute_uv=False).min() <= np.finfo(float).eps * max(1.0, np.abs(M).max()):
            raise Singular(f"{label} is singular")
    return float(np.linalg.norm(A - B, 2) + np.linalg.norm(np.linalg.inv(A) - np.linalg.inv(B), 2))


# =============================================================================
# PERIODIC DATA
# =============================================================================

def _sort_spectrum(values: np.ndarray) -> np.ndarray:
    return np.array(sorted(values, key=lambda z: (round(abs(z), 12), round(cmath.phase(z), 12))))


@dataclass(frozen=True)
class PeriodicDatum:
    orbit: PeriodicOrbit
    return_matrix: np.ndarray
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class PeriodicConjugator:
    matrix: np.ndarray
    condition_number: float
    residual: float


def periodic_data(A: CocycleSpec, orbit: PeriodicOrbit) -> PeriodicDatum:
    """Return matrix A^n_p at a periodic orbit and its spectrum sorted by (modulus, argument)."""
    product = A.iterate(orbit.point, orbit.period, condition_cap=None)
    return PeriodicDatum(orbit, product, _sort_spectrum(np.linalg.eigvals(product)))


def eigenvalue_clusters(values: np.ndarray, tol: float = 1e-6) -> List[Tuple[complex, int]]:
    """Group nearly equal eigenvalues; returns (mean, multiplicity) pairs."""
    groups: List[List[complex]] = []
    for z in values:
        for group in groups:
            if abs(z - group[0]) <= tol * max(1.0, abs(z)):
                group.append(z)
                break
        else:
            groups.append([z])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def rank_profile(M: np.ndarray, eigenvalue: complex, multiplicity: int) -> Tuple[int, ...]:
    shifted = M.astype(complex) - eigenvalue * np.eye(M.shape[0])
    scale = max(1.0, np.linalg.norm(M, 2))
    power = np.eye(M.shape[0], dtype=complex)
    ranks = []
    for k in range(1, multiplicity + 1):
        power = power @ shifted
        ranks.append(int(np.linalg.matrix_rank(power, tol=1e-9 * scale ** k)))
    return tuple(ranks)


def are_similar(A: np.ndarray, B: np.ndarray) -> bool:
    """Spectra within 1e-8 and equal Jordan structure (rank profiles) at every eigenvalue."""
    clusters_a = eigenvalue_clusters(np.linalg.eigvals(A))
    clusters_b = eigenvalue_clusters(np.linalg.eigvals(B))
    if len(clusters_a) != len(clusters_b):
        return False
    for value, multiplicity in clusters_a:
        match = [(v, m) for v, m in clusters_b if abs(v - value) <= 1e-8 * max(1.0, abs(value))]
        if len(match) != 1 or match[0][1] != multiplicity:
            return False
        if rank_profile(A, value, multiplicity) != rank_profile(B, match[0][0], multiplicity):
            return False
    return True


def _unit_columns(vectors: np.ndarray) -> np.ndarray:
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    for j in range(vectors.shape[1]):
        column = vectors[:, j]
        pivot = np.flatnonzero(np.abs(column) > 1e-12)[0]
        vectors[:, j] = column * (abs(column[pivot]) / column[pivot])
    return vectors


def _eigen_conjugator(A: np.ndarray, B: np.ndarray) -> Optional[np.ndarray]:
    """Balanced C = V_A S V_B^{-1} when the spectrum is simple."""
    values_a, vectors_a = np.linalg.eig(A)
    values_b, vectors_b = np.linalg.eig(B)
    order_a = sorted(range(len(values_a)), key=lambda i: (round(abs(values_a[i]), 10), round(cmath.phase(values_a[i]), 10)))
    order_b = sorted(range(len(values_b)), key=lambda i: (round(abs(values_b[i]), 10), round(cmath.phase(values_b[i]), 10)))
    Va = _unit_columns(vectors_a[:, order_a].astype(complex))
    Vb_inv = np.linalg.inv(_unit_columns(vectors_b[:, order_b].astype(complex)))
    values = values_a[order_a]
    d = len(values)

    # conjugate pairs share a scaling so that C stays real
    partner = {}
    for i in range(d):
        if abs(values[i].imag) > 1e-12:
            j = min((j for j in range(d) if j != i), key=lambda j: abs(values[j] - np.conj(values[i])))
            partner[i] = j
    free = [i for i in range(d) if i not in partner or i < partner[i]]
    real_free = [i for i in free if i not in partner]

    def build(params: np.ndarray, signs: Sequence[float]) -> np.ndarray:
        scale = np.ones(d, dtype=complex)
        for k, i in enumerate(free):
            magnitude = math.exp(params[2 * k]) if k else 1.0
            if i in partner:
                phase = params[2 * k + 1]
                scale[i] = magnitude * cmath.exp(1j * phase)
                scale[partner[i]] = np.conj(scale[i])
            else:
                scale[i] = magnitude * signs[real_free.index(i)]
        return (Va * scale) @ Vb_inv

    def objective(params: np.ndarray, signs) -> float:
        return math.log(np.linalg.cond(build(params, signs).real))

    best = None
    for tail in itertools.product((1.0, -1.0), repeat=max(len(real_free) - 1, 0)):
        signs = (1.0,) + tail if real_free else ()
        start = np.zeros(2 * len(free))
        result = scipy.optimize.minimize(objective, start, args=(signs,), method='Nelder-Mead',
                                         options={'xatol': 1e-10, 'fatol': 1e-13, 'maxiter': 4000})
        params = result.x if result.fun < objective(start, signs) - 1e-12 else start
        value = objective(params, signs)
        if best is None or value < best[0] - 1e-9:
            best = (value, build(params, signs).real)
    return None if best is None else best[1]


def _commutant_conjugator(A: np.ndarray, B: np.ndarray, starts: int = 8) -> Optional[np.ndarray]:
    """Minimal-condition invertible C in {X : A X = X B} by multistart search."""
    d = A.shape[0]
    system = np.kron(np.eye(d), A) - np.kron(B.T, np.eye(d))
    basis = scipy.linalg.null_space(system, rcond=1e-9)
    if basis.shape[1] == 0:
        return None
    matrices = [basis[:, k].reshape(d, d, order='F') for k in range(basis.shape[1])]

    def build(c: np.ndarray) -> np.ndarray:
        return sum(ck * Mk for ck, Mk in zip(c, matrices))

    def objective(c: np.ndarray) -> float:
        singular = np.linalg.svd(build(c), compute_uv=False)
        if singular[-1] <= 1e-300:
            return 1e3
        return math.log(singular[0] / singular[-1])

    identity = np.array([np.sum(Mk * np.eye(d)) for Mk in matrices])
    rng = np.random.default_rng(0)
    candidates = [identity] + [rng.standard_normal(len(matrices)) for _ in range(starts)]
    best = None
    for start in candidates:
        if objective(start) >= 1e3 and len(matrices) > 1:
            continue
        result = scipy.optimize.minimize(objective, start, method='Nelder-Mead',
                                         options={'xatol': 1e-10, 'fatol': 1e-13, 'maxiter': 4000})
        c = result.x if result.fun < objective(start) - 1e-12 else start
        value = objective(c)
        if best is None or value < best[0] - 1e-9:
            best = (value, build(c))
    if best is None or best[0] >= 1e3:
        return None
    return best[1]


def _normalize(C: np.ndarray) -> np.ndarray:
    flat = C.ravel()
    pivot = flat[np.argmax(np.abs(flat) > np.abs(flat).max() * (1 - 1e-9))]
    return C / (np.linalg.norm(C, 2) * np.sign(pivot)) if np.linalg.norm(C, 2) > 0 else C


def match_periodic_conjugator(D_A: PeriodicDatum, D_B: PeriodicDatum) -> Optional[PeriodicConjugator]:
    """
    Conjugator C with A^n_p = C B^n_p C^{-1} and near-minimal condition number.

    Returns:
        PeriodicConjugator, or None when the return matrices are not similar
    """
    A, B = D_A.return_matrix, D_B.return_matrix
    if A.shape != B.shape:
        raise ValueError("Periodic data of different dimensions")
    if not are_similar(A, B):
        return None
    simple = all(m == 1 for _, m in eigenvalue_clusters(np.linalg.eigvals(A)))
    if np.allclose(A, B, rtol=0.0, atol=1e-14 * max(1.0, np.abs(A).max())):
        C = np.eye(A.shape[0])
    elif simple:
        C = _eigen_conjugator(A, B)
    else:
        C = _commutant_conjugator(A, B)
    if C is None:
        return None
    if not simple:
        C = _normalize(C)
    residual = float(np.linalg.norm(A - C @ B @ np.linalg.inv(C), 2))
    if residual >= 1e-8 * np.linalg.norm(A, 2):
        if config.debug_mode:
            print(f"⚠️  Conjugator residual {residual:.3g} too large")
        return None
    return PeriodicConjugator(C, float(np.linalg.cond(C)), residual)


# =============================================================================
# SPECTRAL NARROWNESS, BUNCHING AND DISTORTION
# =============================================================================

@dataclass(frozen=True)
class NarrowSpectrumSpec:
    centers: Tuple[float, ...]
    delta: float

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if any(a < b for a, b in zip(self.centers, self.centers[1:])):
            raise ValueError("Centers must be non-increasing")


@dataclass(frozen=True)
class DeltaNarrowReport:
    delta: float
    witness: Optional[PeriodicOrbit]
    spec: NarrowSpectrumSpec


def delta_narrow_radius(A: CocycleSpec, orbits: List[PeriodicOrbit], centers: Sequence[float]) -> DeltaNarrowReport:
    """Smallest delta with e^{n(l_i - delta)} <= |alpha_i| <= e^{n(l_i + delta)} on every orbit."""
    if not orbits:
        raise ValueError("No orbits supplied")
    centers = sorted((float(c) for c in centers), reverse=True)
    if len(centers) != A.dimension:
        raise ValueError("One center per dimension is required")

    def radius(orbit: PeriodicOrbit) -> float:
        datum = periodic_data(A, orbit)
        logs = sorted((math.log(abs(z)) / orbit.period for z in datum.eigenvalues), reverse=True)
        return max(abs(a - c) for a, c in zip(logs, centers))

    radii = parallel_map(radius, orbits)
    index = int(np.argmax(radii))
    delta = float(radii[index])
    return DeltaNarrowReport(delta, orbits[index], NarrowSpectrumSpec(tuple(centers), delta))


@dataclass(frozen=True)
class BunchingCertificate:
    beta: float
    horizon: int
    theta: float
    constant: float
    valid: bool


def _distortion_sequence(A: CocycleSpec, x, horizon: int, beta: float, backward: bool) -> np.ndarray:
    """q_n = ||A^n|| ||(A^n)^{-1}|| (contraction^n)^beta for n = 0..horizon."""
    values = [1.0]
    product = np.eye(A.dimension)
    point = x
    for n in range(1, horizon + 1):
        if backward:
            point = A.base.forward(point, -1)
            product = _solve(A.value(point), product)
        else:
            product = A.value(point) @ product
            point = A.base.forward(point)
        product = product / np.linalg.norm(product, 2)
        forward_rate, backward_rate = A.base.contraction_factors(x, n)
        rate = backward_rate if backward else forward_rate
        values.append(float(np.linalg.cond(product)) * rate ** beta)
    return np.array(values)


def bunching_margin(A: CocycleSpec, beta: float, horizon: int, samples: List[object]) -> BunchingCertificate:
    """
    Fit theta and L to the worst-case distortion sequence over samples.

    Args:
        A: Cocycle
        beta: Hoelder exponent used against the base contraction
        horizon: Largest n measured
        samples: Base points

    Returns:
        BunchingCertificate, valid iff theta < 1 - bunching_slack
    """
    if horizon < 2:
        raise ValueError("horizon must be at least 2")

    def worst(x) -> np.ndarray:
        return np.maximum(_distortion_sequence(A, x, horizon, beta, False),
                          _distortion_sequence(A, x, horizon, beta, True))

    q = np.max(np.array(parallel_map(worst, samples)), axis=0)
    n = np.arange(horizon + 1)
    slope, _ = np.polyfit(n[1:], np.log(q[1:]), 1)
    theta = float(math.exp(slope))
    constant = float(np.max(q / theta ** n))
    valid = theta < 1.0 - config.bunching_slack
    if config.verbose_logging:
        print(f"📊 Bunching: theta = {theta:.4f}, L = {constant:.4f} ({'valid' if valid else 'invalid'})")
    return BunchingCertificate(beta, horizon, theta, constant, bool(valid))


def qc_distortion(A: CocycleSpec, x, n: int) -> float:
    """||A^n_x|| ||(A^n_x)^{-1}||."""
    product, _ = A.scaled_iterate(x, n)
    return float(np.linalg.cond(product))


def qc_growth_exponent(A: CocycleSpec, x, n_max: int) -> float:
    """Log-log slope of the quasiconformal distortion along the orbit of x."""
    ladder = sorted({int(round(v)) for v in np.geomspace(max(2, n_max // 16), n_max, 12)})
    values = [qc_distortion(A, x, n) for n in ladder]
    slope, _ = np.polyfit(np.log(ladder), np.log(values), 1)
    return float(slope)
