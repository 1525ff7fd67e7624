"""Lyapunov exponents, periodic exponents and dominated splittings."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .base import BaseSystem, PeriodicOrbit, point_key
from .cocycle import CocycleSpec, Generator, periodic_data, _solve
from .config import config, parallel_map


class SpectrumError(Exception):
    """Custom exception for spectrum-related errors."""
    pass


class NoDomination(SpectrumError):
    """The requested gap is absent or the horizon is too short to see it."""
    pass


class FrameMismatch(SpectrumError):
    """Moving frames are not carried onto each other by the cocycle."""
    pass


@dataclass(frozen=True)
class LyapunovSpectrum:
    exponents: Tuple[float, ...]
    distinct: Tuple[float, ...]
    multiplicities: Tuple[int, ...]

    @property
    def moduli(self) -> Tuple[float, ...]:
        return tuple(math.exp(s) for s in self.distinct)


def group_exponents(exponents: Sequence[float], tol: Optional[float] = None) -> LyapunovSpectrum:
    """Merge exponents closer than the grouping tolerance into distinct values sigma_1 < ... < sigma_l."""
    tol = config.grouping_tol if tol is None else tol
    ordered = sorted(exponents)
    groups: List[List[float]] = []
    for value in ordered:
        if groups and value - groups[-1][-1] <= tol:
            groups[-1].append(value)
        else:
            groups.append([value])
    return LyapunovSpectrum(tuple(sorted(exponents, reverse=True)),
                            tuple(float(np.mean(g)) for g in groups),
                            tuple(len(g) for g in groups))


def lyapunov_exponents(A: CocycleSpec, x, n: int) -> LyapunovSpectrum:
    """
    Lyapunov exponents along the orbit of x by QR accumulation.

    Args:
        A: Cocycle
        x: Starting point
        n: Number of steps (at least 1)

    Returns:
        LyapunovSpectrum with per-iterate exponents in natural log
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    Q = np.eye(A.dimension)
    sums = np.zeros(A.dimension)
    point = x
    for _ in range(n):
        Q, R = np.linalg.qr(A.value(point) @ Q)
        sums += np.log(np.abs(np.diag(R)))
        point = A.base.forward(point)
    return group_exponents(sums / n)


def periodic_exponents(A: CocycleSpec, orbit: PeriodicOrbit) -> Tuple[float, ...]:
    """(1/n) ln |eigenvalues of A^n_p|, in descending order."""
    datum = periodic_data(A, orbit)
    return tuple(sorted((math.log(abs(z)) / orbit.period for z in datum.eigenvalues), reverse=True))


# =============================================================================
# DOMINATED SPLITTINGS
# =============================================================================

def _orthonormal(M: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(M)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


@dataclass
class SplittingField:
    """
    Invariant splitting E^1 + ... + E^l, fastest block first.

    Frames at arbitrary points are computed on demand from finite windows:
    the fast space of each gap by forward subspace iteration over the window
    ending at x, the slow space by backward iteration from f^n x. The frame
    gauge is carried along the orbit: the reference frame of each block at
    f^{-gauge_depth} x is pushed forward one step at a time, re-orthonormalized
    and projected back onto the block after each step.
    """
    cocycle: CocycleSpec
    gaps: Tuple[int, ...]
    horizon: int
    gauge_depth: int = 4
    samples: List[Tuple[object, List[np.ndarray]]] = field(default_factory=list)
    K: float = math.inf
    tau: float = math.inf
    invariance_residual: float = math.inf

    def __post_init__(self):
        rng = np.random.default_rng(config.seed)
        d = self.cocycle.dimension
        self._reference = _orthonormal(rng.standard_normal((d, d)))
        self._cache: Dict[object, List[np.ndarray]] = {}
        self._spans: Dict[object, List[np.ndarray]] = {}

    @property
    def dimensions(self) -> Tuple[int, ...]:
        edges = (0,) + self.gaps + (self.cocycle.dimension,)
        return tuple(b - a for a, b in zip(edges, edges[1:]))

    def _fast(self, x, k: int) -> np.ndarray:
        A = self.cocycle
        start = A.base.forward(x, -self.horizon)
        Q = self._reference[:, :k]
        point = start
        for _ in range(self.horizon):
            Q = _orthonormal(A.value(point) @ Q)
            point = A.base.forward(point)
        return Q

    def _slow(self, x, k: int) -> np.ndarray:
        A = self.cocycle
        point = A.base.forward(x, self.horizon)
        Q = self._reference[:, k:]
        for _ in range(self.horizon):
            point = A.base.forward(point, -1)
            Q = _orthonormal(_solve(A.value(point), Q))
        return Q

    def subspaces(self, x) -> List[np.ndarray]:
        """Orthonormal bases of E^1_x, ..., E^l_x in no particular gauge."""
        key = point_key(x)
        cached = self._spans.get(key)
        if cached is not None:
            return cached
        fast = {k: self._fast(x, k) for k in self.gaps}
        slow = {k: self._slow(x, k) for k in self.gaps}
        spans = []
        edges = (0,) + self.gaps + (self.cocycle.dimension,)
        for i in range(len(edges) - 1):
            lower, upper = edges[i], edges[i + 1]
            if i == 0:
                spans.append(fast[upper])
            elif upper == self.cocycle.dimension:
                spans.append(slow[lower])
            else:
                spans.append(_intersection(fast[upper], slow[lower], upper - lower))
        self._spans[key] = spans
        return spans

    def frames(self, x) -> List[np.ndarray]:
        """Orthonormal frames of E^1_x, ..., E^l_x."""
        key = point_key(x)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        A = self.cocycle
        point = A.base.forward(x, -self.gauge_depth)
        edges = (0,) + self.gaps + (A.dimension,)
        frames = [_project(basis, self._reference[:, lower:upper])
                  for basis, lower, upper in zip(self.subspaces(point), edges, edges[1:])]
        for _ in range(self.gauge_depth):
            step = A.value(point)
            point = A.base.forward(point)
            frames = [_project(basis, step @ Q) for basis, Q in zip(self.subspaces(point), frames)]
        self._cache[key] = frames
        return frames

    def invariance_at(self, x) -> float:
        """max_i ||(I - P_{E^i_{fx}}) A_x E^i_x|| over blocks, relative."""
        here = self.frames(x)
        there = self.frames(self.cocycle.base.forward(x))
        A_x = self.cocycle.value(x)
        worst = 0.0
        for Q, Q_next in zip(here, there):
            image = _orthonormal(A_x @ Q)
            leak = image - Q_next @ (Q_next.T @ image)
            worst = max(worst, float(np.linalg.norm(leak, 2)))
        return worst


def _project(basis: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Orthonormal frame of span(basis) from the orthogonal projection of M."""
    return _orthonormal(basis @ (basis.T @ M))


def _intersection(F: np.ndarray, S: np.ndarray, dimension: int) -> np.ndarray:
    """Orthonormal basis of span(F) intersected with span(S), by principal vectors."""
    _, _, Vt = np.linalg.svd(S.T @ F)
    return _orthonormal(F @ Vt[:dimension].T)


def _domination_ratios(S: SplittingField, x, g: int, horizon: int) -> np.ndarray:
    """
    r_m = ||A^m | slow|| / m(A^m | fast) for m = 0..horizon, across the gap after block g.

    The pushed slow frame is projected onto the slow bundle at f^m x after every
    step, so rounding along the fast bundle cannot outgrow the slow decay.
    """
    A = S.cocycle
    frames = S.frames(x)
    Mf, Ms = _orthonormal(np.hstack(frames[:g])), _orthonormal(np.hstack(frames[g:]))
    ratios = [1.0]
    point = x
    for _ in range(horizon):
        step = A.value(point)
        Mf, Ms = step @ Mf, step @ Ms
        scale = np.linalg.norm(Mf, 2)
        Mf, Ms = Mf / scale, Ms / scale
        point = A.base.forward(point)
        slow = _orthonormal(np.hstack(S.subspaces(point)[g:]))
        Ms = slow @ (slow.T @ Ms)
        top = np.linalg.svd(Ms, compute_uv=False)[0]
        bottom = np.linalg.svd(Mf, compute_uv=False)[-1]
        ratios.append(float(top / bottom))
    return np.array(ratios)


def _certify(S: SplittingField, samples: List[object], horizon: int) -> SplittingField:
    A = S.cocycle
    edges = (0,) + S.gaps + (A.dimension,)

    def measure(x):
        frames = S.frames(x)
        ratios = []
        for g in range(1, len(edges) - 1):
            ratios.append(_domination_ratios(S, x, g, horizon))
        return frames, np.max(np.array(ratios), axis=0), S.invariance_at(x)

    results = parallel_map(measure, samples)
    S.samples = [(x, frames) for x, (frames, _, _) in zip(samples, results)]
    worst = np.max(np.array([r for _, r, _ in results]), axis=0)
    m = np.arange(horizon + 1)
    slope, _ = np.polyfit(m[1:], np.log(worst[1:]), 1)
    S.tau = float(math.exp(slope))
    S.K = float(np.max(worst / S.tau ** m))
    S.invariance_residual = float(max(r for _, _, r in results))
    if config.verbose_logging:
        print(f"📊 Splitting {S.dimensions}: K = {S.K:.3g}, tau = {S.tau:.4f}, "
              f"invariance residual = {S.invariance_residual:.2e}")
    if S.tau >= 1.0 - config.bunching_slack:
        raise NoDomination(f"Measured tau = {S.tau:.4f} shows no exponential gap")
    if S.invariance_residual > config.invariance_tol:
        raise NoDomination(f"Invariance residual {S.invariance_residual:.3g} exceeds {config.invariance_tol}")
    return S


def dominated_splitting(A: CocycleSpec, k: int, samples: List[object], horizon: int,
                        certificate_horizon: Optional[int] = None) -> SplittingField:
    """
    Dominated splitting of index k: a k-dimensional fast bundle and its slow complement.

    Args:
        A: Cocycle
        k: Index (dimension of the fast bundle)
        samples: Base points at which the splitting is certified
        horizon: Window length of the subspace iteration
        certificate_horizon: Largest n in the domination measurement (defaults to horizon)

    Returns:
        Certified SplittingField with blocks (fast, slow)

    Raises:
        NoDomination: If the measured rate or the invariance residual fails
    """
    if not 0 < k < A.dimension:
        raise ValueError(f"Index must lie in 1..{A.dimension - 1}")
    S = SplittingField(A, (k,), horizon)
    return _certify(S, samples, certificate_horizon or horizon)


def lyapunov_splitting(A: CocycleSpec, samples: List[object], horizon: int,
                       spectrum: Optional[LyapunovSpectrum] = None,
                       certificate_horizon: Optional[int] = None) -> SplittingField:
    """Splitting into the Lyapunov blocks E^1 + ... + E^l (one block per distinct exponent)."""
    if spectrum is None:
        spectrum = lyapunov_exponents(A, samples[0], max(4 * horizon, 200))
    gaps = tuple(int(g) for g in np.cumsum(spectrum.multiplicities[::-1])[:-1])
    if not gaps:
        raise NoDomination("A single Lyapunov block has no splitting")
    S = SplittingField(A, gaps, horizon)
    return _certify(S, samples, certificate_horizon or horizon)


class RestrictedGenerator(Generator):
    """Matrix of A_x from E^i_x to E^i_{fx} in the moving frames."""

    def __init__(self, cocycle: CocycleSpec, splitting: SplittingField, block: int):
        self.cocycle = cocycle
        self.splitting = splitting
        self.block = block
        self.dimension = splitting.dimensions[block]

    def matrix(self, x, base: BaseSystem) -> np.ndarray:
        here = self.splitting.frames(x)[self.block]
        there = self.splitting.frames(base.forward(x))[self.block]
        image = self.cocycle.value(x) @ here
        restricted = there.T @ image
        leak = np.linalg.norm(image - there @ restricted, 2)
        if leak > 10.0 * config.invariance_tol * np.linalg.norm(image, 2):
            raise FrameMismatch(f"Block {self.block} leaks {leak:.3g} off its frame at {x}")
        return restricted


def restrict_cocycle(A: CocycleSpec, S: SplittingField, i: int) -> CocycleSpec:
    """The block cocycle A|E^i written in the frames of S."""
    if not 0 <= i < len(S.dimensions):
        raise ValueError(f"Block index {i} out of range")
    if not math.isfinite(S.tau):
        raise FrameMismatch("Splitting is not certified")
    return CocycleSpec(A.base, RestrictedGenerator(A, S, i), A.hoelder_exponent,
                       name=f"{A.name}|E{i + 1}", validate=False)


def block_consistency_residual(A: CocycleSpec, S: SplittingField, i: int, x, n: int) -> float:
    """|| Q_{f^n x}^T A^n_x Q_x - (A|E^i)^n_x || relative to ||A^n_x||."""
    block = restrict_cocycle(A, S, i)
    full = A.iterate(x, n, condition_cap=None)
    projected = S.frames(A.base.forward(x, n))[i].T @ full @ S.frames(x)[i]
    return float(np.linalg.norm(projected - block.iterate(x, n, condition_cap=None), 2) / np.linalg.norm(full, 2))


@dataclass(frozen=True)
class PeriodicApproximationReport:
    generic: Tuple[float, ...]
    gap: float
    nearest: Tuple[Optional[PeriodicOrbit], ...]
    violated: bool


def periodic_approximation_check(A: CocycleSpec, x, n: int, orbits: List[PeriodicOrbit],
                                 tol: float = 5e-3) -> PeriodicApproximationReport:
    """Distance of each generic exponent to the periodic exponents of the given orbits."""
    generic = lyapunov_exponents(A, x, n).exponents
    if not orbits:
        if config.verbose_logging:
            print("⚠️  No periodic orbits to compare the generic exponents with")
        return PeriodicApproximationReport(tuple(generic), math.inf, (), True)
    periodic = parallel_map(lambda orbit: periodic_exponents(A, orbit), orbits)
    gaps = []
    nearest = []
    for i, value in enumerate(generic):
        distances = [abs(value - chi[i]) for chi in periodic]
        j = int(np.argmin(distances))
        gaps.append(distances[j])
        nearest.append(orbits[j])
    gap = float(max(gaps))
    if gap > tol and config.verbose_logging:
        print(f"⚠️  Generic exponents {generic} sit {gap:.3g} away from periodic data")
    return PeriodicApproximationReport(tuple(generic), gap, tuple(nearest), gap > tol)
