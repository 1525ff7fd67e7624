"""Hyperbolic base systems: subshifts of finite type and toral maps."""

import itertools
import math
import re
import warnings
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import sympy

from .config import config


class BaseSystemError(Exception):
    """Custom exception for base-system-related errors."""
    pass


class NotInProductRange(BaseSystemError):
    """Points are too far apart for the local product structure."""
    pass


class CapacityExceeded(BaseSystemError):
    """Periodic orbit enumeration would exceed the configured cap."""
    pass


class NotCloseEnough(BaseSystemError):
    """Orbit segment does not return close enough to be closed."""
    pass


class OutsideConeBound(BaseSystemError):
    """Perturbation is too large for the cone-field argument to guarantee hyperbolicity."""
    pass


TorusPoint = Union[np.ndarray, Tuple[Fraction, ...]]


def wrap(v: np.ndarray) -> np.ndarray:
    """Nearest-lift representative of a torus displacement, in [-1/2, 1/2)."""
    return (np.asarray(v, dtype=float) + 0.5) % 1.0 - 0.5


def _primitive_root(word: Tuple[int, ...]) -> Tuple[int, ...]:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word == word[:p] * (n // p):
            return word[:p]
    return word


def _word_text(word: Sequence[int]) -> str:
    if all(0 <= s < 10 for s in word):
        return ''.join(str(s) for s in word)
    return ','.join(str(s) for s in word)


def _parse_word(text: str) -> Tuple[int, ...]:
    if not text:
        return ()
    if ',' in text:
        return tuple(int(s) for s in text.split(','))
    return tuple(int(s) for s in text)


_TAIL_PATTERN = re.compile(r'^\((.+)\)\^inf$')


@dataclass(frozen=True)
class SymbolicPoint:
    """
    Eventually periodic bi-infinite symbol sequence.

    ``past`` repeats to -inf ending at index ``lo - 1``, ``core`` occupies
    indices ``lo .. hi - 1`` and ``future`` repeats to +inf from ``hi``.
    The representation is normalized on construction (primitive tails,
    minimal core, phase pinned to 0 for purely periodic points), so
    equality of points is equality of representations.
    """
    past: Tuple[int, ...]
    core: Tuple[int, ...]
    future: Tuple[int, ...]
    lo: int = 0

    def __post_init__(self):
        if not self.past or not self.future:
            raise ValueError("Tails of a symbolic point must be nonempty")
        past = _primitive_root(tuple(int(s) for s in self.past))
        future = _primitive_root(tuple(int(s) for s in self.future))
        core = tuple(int(s) for s in self.core)
        lo = int(self.lo)

        changed = True
        while core and changed:
            changed = False
            if core and core[-1] == future[-1]:
                future = (future[-1],) + future[:-1]
                core = core[:-1]
                changed = True
            if core and core[0] == past[0]:
                past = past[1:] + (past[0],)
                core = core[1:]
                lo += 1
                changed = True

        if not core and past == future:
            p = len(past)
            past = tuple(past[(k - lo) % p] for k in range(p))
            future = past
            lo = 0

        object.__setattr__(self, 'past', past)
        object.__setattr__(self, 'future', future)
        object.__setattr__(self, 'core', core)
        object.__setattr__(self, 'lo', lo)

    @property
    def hi(self) -> int:
        return self.lo + len(self.core)

    def symbol(self, i: int) -> int:
        if i < self.lo:
            return self.past[(i - self.lo) % len(self.past)]
        if i < self.hi:
            return self.core[i - self.lo]
        return self.future[(i - self.hi) % len(self.future)]

    def window(self, a: int, b: int) -> Tuple[int, ...]:
        """Symbols at indices a..b inclusive."""
        return tuple(self.symbol(i) for i in range(a, b + 1))

    def shift(self, k: int = 1) -> 'SymbolicPoint':
        """Left shift applied k times (k may be negative)."""
        return SymbolicPoint(self.past, self.core, self.future, self.lo - k)

    def with_symbol(self, index: int, value: int) -> 'SymbolicPoint':
        """Copy of the point with the symbol at ``index`` replaced."""
        a = min(self.lo, index)
        b = max(self.hi - 1, index)
        past = tuple(self.symbol(a - len(self.past) + j) for j in range(len(self.past)))
        future = tuple(self.symbol(b + 1 + j) for j in range(len(self.future)))
        core = list(self.window(a, b))
        core[index - a] = int(value)
        return SymbolicPoint(past, tuple(core), future, lo=a)

    def periodic_word(self) -> Optional[Tuple[int, ...]]:
        """Minimal word w with the point equal to w repeated, or None."""
        if not self.core and self.past == self.future:
            return self.past
        return None

    def to_text(self) -> str:
        a = min(self.lo, 0)
        b = max(self.hi, 1)
        past = tuple(self.symbol(a - len(self.past) + j) for j in range(len(self.past)))
        future = tuple(self.symbol(b + j) for j in range(len(self.future)))
        left = self.window(a, -1) if a < 0 else ()
        right = self.window(0, b - 1)
        return f"({_word_text(past)})^inf|{_word_text(left)}.{_word_text(right)}|({_word_text(future)})^inf"

    @classmethod
    def from_text(cls, text: str) -> 'SymbolicPoint':
        """Parse the "(w_p)^inf|core.core|(w_f)^inf" format; the dot marks index 0."""
        parts = text.replace(' ', '').split('|')
        if len(parts) != 3:
            raise ValueError(f"Malformed symbolic point: {text!r}")
        tails = []
        for part in (parts[0], parts[2]):
            match = _TAIL_PATTERN.match(part)
            if not match:
                raise ValueError(f"Malformed tail {part!r} in {text!r}")
            tails.append(_parse_word(match.group(1)))
        if parts[1].count('.') != 1:
            raise ValueError(f"Core of {text!r} must contain exactly one '.'")
        left, right = parts[1].split('.')
        left_word, right_word = _parse_word(left), _parse_word(right)
        return cls(tails[0], left_word + right_word, tails[1], lo=-len(left_word))

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class PeriodicOrbit:
    """Periodic orbit given by one point and its minimal period."""
    point: object
    period: int

    def points(self, base: 'BaseSystem') -> List[object]:
        return base.orbit(self.point, self.period)

    def label(self) -> str:
        if isinstance(self.point, SymbolicPoint):
            return self.point.to_text()
        return format_torus_point(self.point)


@dataclass(frozen=True)
class RateTriple:
    """Hyperbolicity rates: ||Df v^s|| < nu < 1 < 1/gamma < ||Df v^u|| < gamma_hat."""
    nu: float
    gamma: float
    gamma_hat: float

    def __post_init__(self):
        if not (self.nu < 1 and self.gamma < 1 < self.gamma_hat):
            raise ValueError(f"Rates violate nu < 1, gamma < 1 < gamma_hat: {self}")


def point_key(x) -> object:
    """Hashable key of a base point (torus arrays rounded to 15 decimals)."""
    if isinstance(x, np.ndarray):
        return tuple(np.round(x, 15))
    return x


def format_torus_point(point: TorusPoint) -> str:
    """Exact points as "num/den" fractions, float points with 17 significant digits."""
    if len(point) and isinstance(point[0], Fraction):
        return ' '.join(f"{c.numerator}/{c.denominator}" for c in point)
    return ' '.join(format(float(c), '.17g') for c in point)


def parse_torus_point(text: str) -> Tuple[Fraction, ...]:
    return tuple(Fraction(token) for token in text.split())


def _mobius(n: int) -> int:
    factors = sympy.factorint(n)
    if any(exponent > 1 for exponent in factors.values()):
        return 0
    return -1 if len(factors) % 2 else 1


def _orbit_counts(fixed_counts: Dict[int, int], n_max: int) -> Dict[int, int]:
    """Number of orbits of each minimal period from |Fix(f^n)|."""
    counts = {}
    for n in range(1, n_max + 1):
        total = sum(_mobius(n // m) * fixed_counts[m] for m in range(1, n + 1) if n % m == 0)
        counts[n] = total // n
    return counts


class BaseSystem(ABC):
    """Common interface of the hyperbolic base systems."""

    @abstractmethod
    def forward(self, x, n: int = 1):
        """Image of x under f^n (n may be negative)."""

    @abstractmethod
    def distance(self, x, y) -> float:
        pass

    @abstractmethod
    def on_stable_leaf(self, x, y, local: bool = True) -> bool:
        pass

    @abstractmethod
    def on_unstable_leaf(self, x, y, local: bool = True) -> bool:
        pass

    @abstractmethod
    def contraction_factors(self, x, n: int) -> Tuple[float, float]:
        """Forward stable contraction nu^n_x and backward unstable contraction over n steps."""

    @abstractmethod
    def local_product(self, x, z):
        pass

    def steps_to_local_leaf(self, x, y, direction: str) -> int:
        """Iterates needed before a global leaf pair becomes a local one."""
        return 0

    def orbit(self, x, n: int) -> List[object]:
        points = [x]
        for _ in range(n - 1):
            points.append(self.forward(points[-1]))
        return points


# =============================================================================
# SUBSHIFTS OF FINITE TYPE
# =============================================================================

class SftBase(BaseSystem):
    """Two-sided mixing subshift of finite type with metric d(x, y) = nu^n(x, y)."""

    def __init__(self, transition_matrix, nu: float):
        matrix = np.array(transition_matrix, dtype=np.int64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("Transition matrix must be square")
        if not np.isin(matrix, (0, 1)).all():
            raise ValueError("Transition matrix must have 0/1 entries")
        if not 0.0 < nu < 1.0:
            raise ValueError(f"Metric parameter must lie in (0, 1), got {nu}")
        self.transition_matrix = matrix
        self.nu = float(nu)
        self.alphabet_size = matrix.shape[0]
        self._successors = {a: [b for b in range(self.alphabet_size) if matrix[a, b]]
                            for a in range(self.alphabet_size)}
        self.mixing_power = self._mixing_power()
        self._cycles: Dict[int, Tuple[int, ...]] = {}

    def _mixing_power(self) -> int:
        k = self.alphabet_size
        power = self.transition_matrix > 0
        for n in range(1, (k - 1) ** 2 + 2):
            if power.all():
                return n
            power = (power.astype(np.int64) @ self.transition_matrix) > 0
        raise ValueError("Transition matrix is not mixing")

    def __repr__(self) -> str:
        return f"SftBase(k={self.alphabet_size}, nu={self.nu})"

    def allowed(self, a: int, b: int) -> bool:
        return bool(self.transition_matrix[a, b])

    def is_admissible(self, x: SymbolicPoint) -> bool:
        start = x.lo - len(x.past) - 1
        stop = x.hi + len(x.future) + 1
        return all(self.allowed(x.symbol(i), x.symbol(i + 1)) for i in range(start, stop))

    def word_admissible(self, word: Sequence[int]) -> bool:
        return all(self.allowed(a, b) for a, b in zip(word, word[1:]))

    def forward(self, x: SymbolicPoint, n: int = 1) -> SymbolicPoint:
        return x.shift(n)

    def distance(self, x: SymbolicPoint, y: SymbolicPoint) -> float:
        return sft_distance(x, y, self)

    def contraction_factors(self, x, n: int) -> Tuple[float, float]:
        return self.nu ** n, self.nu ** n

    @staticmethod
    def _scan_bound(x: SymbolicPoint, y: SymbolicPoint) -> int:
        return (max(abs(x.lo), abs(x.hi), abs(y.lo), abs(y.hi))
                + math.lcm(len(x.past), len(y.past)) + math.lcm(len(x.future), len(y.future)) + 1)

    def agreement_index(self, x: SymbolicPoint, y: SymbolicPoint) -> Optional[int]:
        """n(x, y) = min{|i| : x_i != y_i}, or None when x = y."""
        if x == y:
            return None
        for k in range(self._scan_bound(x, y) + 1):
            if x.symbol(k) != y.symbol(k) or x.symbol(-k) != y.symbol(-k):
                return k
        raise RuntimeError(f"Distinct representations agree everywhere: {x} {y}")

    def _extreme_disagreement(self, x: SymbolicPoint, y: SymbolicPoint, direction: str) -> Tuple[bool, Optional[int]]:
        """(same leaf, last disagreement index for 'stable' / first for 'unstable')."""
        if direction == 'stable':
            start = max(x.hi, y.hi, 0)
            period = math.lcm(len(x.future), len(y.future))
            if any(x.symbol(i) != y.symbol(i) for i in range(start, start + period)):
                return False, None
            bottom = min(x.lo, y.lo, 0) - math.lcm(len(x.past), len(y.past)) - 1
            for i in range(start - 1, bottom - 1, -1):
                if x.symbol(i) != y.symbol(i):
                    return True, i
            return True, None
        start = min(x.lo, y.lo, 0)
        period = math.lcm(len(x.past), len(y.past))
        if any(x.symbol(i) != y.symbol(i) for i in range(start - period, start)):
            return False, None
        top = max(x.hi, y.hi, 0) + math.lcm(len(x.future), len(y.future)) + 1
        for i in range(start, top + 1):
            if x.symbol(i) != y.symbol(i):
                return True, i
        return True, None

    def on_stable_leaf(self, x, y, local: bool = True) -> bool:
        same, last = self._extreme_disagreement(x, y, 'stable')
        if not same:
            return False
        return last is None or last < 0 or not local

    def on_unstable_leaf(self, x, y, local: bool = True) -> bool:
        same, first = self._extreme_disagreement(x, y, 'unstable')
        if not same:
            return False
        return first is None or first > 0 or not local

    def steps_to_local_leaf(self, x, y, direction: str) -> int:
        same, index = self._extreme_disagreement(x, y, direction)
        if not same or index is None:
            return 0
        if direction == 'stable':
            return max(0, index + 1)
        return max(0, 1 - index)

    def local_product(self, x: SymbolicPoint, z: SymbolicPoint) -> SymbolicPoint:
        """The point agreeing with x at indices >= 0 and with z at indices <= 0."""
        if x.symbol(0) != z.symbol(0):
            raise NotInProductRange(f"x_0 = {x.symbol(0)} differs from z_0 = {z.symbol(0)}")
        a = min(z.lo, 0)
        b = max(x.hi, 1)
        past = tuple(z.symbol(a - len(z.past) + j) for j in range(len(z.past)))
        future = tuple(x.symbol(b + j) for j in range(len(x.future)))
        left = z.window(a, -1) if a < 0 else ()
        return SymbolicPoint(past, left + x.window(0, b - 1), future, lo=a)

    def shortest_cycle(self, a: int) -> Tuple[int, ...]:
        """Shortest admissible cycle (a, c_1, ..., c_{m-1}) returning to a."""
        if a in self._cycles:
            return self._cycles[a]
        parents = {}
        queue = deque()
        for b in self._successors[a]:
            if b == a:
                self._cycles[a] = (a,)
                return (a,)
            if b not in parents:
                parents[b] = a
                queue.append(b)
        while queue:
            c = queue.popleft()
            for b in self._successors[c]:
                if b == a:
                    path = [c]
                    while path[-1] != a:
                        path.append(parents[path[-1]])
                    cycle = tuple(reversed(path))
                    self._cycles[a] = cycle
                    return cycle
                if b not in parents:
                    parents[b] = c
                    queue.append(b)
        raise ValueError(f"Symbol {a} lies on no cycle")

    def cylinder_point(self, word: Sequence[int], lo: int = 0) -> SymbolicPoint:
        """An admissible point carrying ``word`` at indices lo.., closed by shortest cycles."""
        word = tuple(int(s) for s in word)
        if not word or not self.word_admissible(word):
            raise ValueError(f"Word {word} is not admissible")
        past = self.shortest_cycle(word[0])
        cycle = self.shortest_cycle(word[-1])
        future = cycle[1:] + (cycle[0],)
        return SymbolicPoint(past, word, future, lo=lo)

    def admissible_words(self, length: int) -> List[Tuple[int, ...]]:
        """All admissible words of the given length, in lexicographic order."""
        words = [(a,) for a in range(self.alphabet_size)]
        for _ in range(length - 1):
            words = [w + (b,) for w in words for b in self._successors[w[-1]]]
        return sorted(words)

    def random_word(self, rng: np.random.Generator, length: int) -> Tuple[int, ...]:
        word = [int(rng.integers(self.alphabet_size))]
        while len(word) < length:
            successors = self._successors[word[-1]]
            word.append(successors[int(rng.integers(len(successors)))])
        return tuple(word)

    def random_point(self, rng: np.random.Generator, radius: int = 8) -> SymbolicPoint:
        """Random admissible point with a random window over indices -radius..radius."""
        return self.cylinder_point(self.random_word(rng, 2 * radius + 1), lo=-radius)

    def fixed_point_count(self, n: int) -> int:
        """|Fix(f^n)| = trace(M^n), computed exactly."""
        power = sympy.Matrix(self.transition_matrix.tolist()) ** n
        return int(power.trace())

    def _closed_words(self, n: int) -> List[Tuple[int, ...]]:
        """Canonical cyclic words of length n: primitive and minimal among rotations."""
        words = []
        stack = [(a,) for a in range(self.alphabet_size - 1, -1, -1)]
        while stack:
            word = stack.pop()
            if len(word) == n:
                if self.allowed(word[-1], word[0]) and _primitive_root(word) == word:
                    if all(word <= word[r:] + word[:r] for r in range(1, n)):
                        words.append(word)
                continue
            for b in reversed(self._successors[word[-1]]):
                if b >= word[0]:
                    stack.append(word + (b,))
        return sorted(words)

    def enumerate_periodic_orbits(self, n_max: int) -> List[PeriodicOrbit]:
        if n_max < 1:
            raise ValueError("n_max must be at least 1")
        fixed = {n: self.fixed_point_count(n) for n in range(1, n_max + 1)}
        counts = _orbit_counts(fixed, n_max)
        total = sum(counts.values())
        if total > config.orbit_cap:
            raise CapacityExceeded(f"{total} orbits of period <= {n_max} exceed cap {config.orbit_cap}")
        orbits = []
        for n in range(1, n_max + 1):
            for word in self._closed_words(n):
                orbits.append(PeriodicOrbit(SymbolicPoint(word, (), word, 0), n))
        if config.verbose_logging:
            print(f"📊 {len(orbits)} periodic orbits of period <= {n_max}")
        return orbits

    def homoclinic_points(self, q: SymbolicPoint, depth: int) -> List[SymbolicPoint]:
        word = q.periodic_word()
        if word is None or len(word) != 1:
            raise ValueError(f"{q} is not a fixed point of the shift")
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        if depth == 0:
            return [q]
        a = word[0]
        if not self.allowed(a, a):
            raise ValueError(f"{q} is not admissible")
        length = 2 * depth + 1
        windows = []
        stack = [(b,) for b in self._successors[a]]
        while stack:
            window = stack.pop()
            if len(window) == length:
                if self.allowed(window[-1], a):
                    windows.append(window)
                continue
            for b in self._successors[window[-1]]:
                stack.append(window + (b,))
        points = []
        seen = set()
        for window in sorted(windows):
            point = SymbolicPoint((a,), window, (a,), lo=-depth)
            if point not in seen:
                seen.add(point)
                points.append(point)
        return points

    def anosov_closing(self, x: SymbolicPoint, n: int) -> Tuple[PeriodicOrbit, float]:
        if n < 1:
            raise ValueError("n must be at least 1")
        if x.symbol(0) != x.symbol(n):
            raise NotCloseEnough(f"x_0 != x_{n}: the segment cannot be closed")
        word = x.window(0, n - 1)
        p = SymbolicPoint(word, (), word, 0)
        orbit = PeriodicOrbit(p, len(p.past))
        gap = self.distance(x, x.shift(n))
        if gap == 0.0:
            return orbit, 0.0
        spread = max(self.distance(x.shift(i), p.shift(i)) for i in range(n + 1))
        return orbit, spread / gap


def sft_distance(x: SymbolicPoint, y: SymbolicPoint, base: SftBase) -> float:
    """d(x, y) = nu^n(x, y) with n(x, y) = min{|i| : x_i != y_i}."""
    index = base.agreement_index(x, y)
    if index is None:
        return 0.0
    return base.nu ** index


# =============================================================================
# TORAL MAPS
# =============================================================================

class SmithNormalForm:
    """
    Integer diagonalization D = P A Q with unimodular P and Q.

    Row and column operations run in exact integer arithmetic; the diagonal
    does not follow the divisibility chain, which enumeration does not need.
    """

    def __init__(self, matrix):
        self._A = [[int(v) for v in row] for row in matrix]
        n = len(self._A)
        self.D = [row[:] for row in self._A]
        self.P = [[int(i == j) for j in range(n)] for i in range(n)]
        self.Q = [[int(i == j) for j in range(n)] for i in range(n)]
        self._run()

    def _run(self):
        D, P, Q = self.D, self.P, self.Q
        n = len(D)
        for t in range(n):
            while True:
                pivot = self._search_pivot(t)
                if pivot is None:
                    raise ValueError("Matrix is singular")
                i, j = pivot
                D[t], D[i] = D[i], D[t]
                P[t], P[i] = P[i], P[t]
                for row in D:
                    row[t], row[j] = row[j], row[t]
                for row in Q:
                    row[t], row[j] = row[j], row[t]
                for i in range(t + 1, n):
                    q = D[i][t] // D[t][t]
                    if q:
                        D[i] = [a - q * b for a, b in zip(D[i], D[t])]
                        P[i] = [a - q * b for a, b in zip(P[i], P[t])]
                for j in range(t + 1, n):
                    q = D[t][j] // D[t][t]
                    if q:
                        for row in D:
                            row[j] -= q * row[t]
                        for row in Q:
                            row[j] -= q * row[t]
                if all(D[i][t] == 0 for i in range(t + 1, n)) and all(D[t][j] == 0 for j in range(t + 1, n)):
                    break

    def _search_pivot(self, t: int) -> Optional[Tuple[int, int]]:
        best = None
        n = len(self.D)
        for i in range(t, n):
            for j in range(t, n):
                value = abs(self.D[i][j])
                if value and (best is None or value < best[0]):
                    best = (value, i, j)
        return None if best is None else best[1:]

    @property
    def diagonal(self) -> List[int]:
        return [self.D[i][i] for i in range(len(self.D))]

    def torus_solutions(self) -> List[Tuple[Fraction, ...]]:
        """All x in [0,1)^d with A x in Z^d, as exact fractions."""
        moduli = [abs(d) for d in self.diagonal]
        n = len(moduli)
        points = []
        for numerators in itertools.product(*(range(m) for m in moduli)):
            y = [Fraction(k, m) for k, m in zip(numerators, moduli)]
            x = tuple(sum((self.Q[i][j] * y[j] for j in range(n)), Fraction(0)) % 1 for i in range(n))
            points.append(x)
        return sorted(points)


class SmoothToralMap(BaseSystem):
    """C^1 map of T^d homotopic to a hyperbolic toral automorphism."""

    linear_part: 'ToralAutomorphism'
    dimension: int

    @abstractmethod
    def lift(self, X: np.ndarray) -> np.ndarray:
        """The map on R^d (no reduction mod 1), vectorized over leading axes."""

    @abstractmethod
    def derivative_many(self, X: np.ndarray) -> np.ndarray:
        pass

    def derivative(self, x) -> np.ndarray:
        return self.derivative_many(np.asarray(x, dtype=float)[None, :])[0]

    def displacement(self, X: np.ndarray, D: np.ndarray) -> np.ndarray:
        """f(X + D) - f(X) on lifts."""
        return self.lift(X + D) - self.lift(X)

    def forward_many(self, X: np.ndarray) -> np.ndarray:
        return self.lift(np.asarray(X, dtype=float)) % 1.0

    def inverse_many(self, Y: np.ndarray, tol: float = 1e-15, max_iter: int = 50) -> np.ndarray:
        """Preimages by Newton's method started from the linear part's preimage."""
        Y = np.asarray(Y, dtype=float)
        X = (Y @ self.linear_part.inverse_matrix.T.astype(float)) % 1.0
        for _ in range(max_iter):
            R = wrap(self.lift(X) - Y)
            step = np.linalg.solve(self.derivative_many(X), R[..., None])[..., 0]
            X = X - step
            if np.max(np.abs(step)) < tol:
                break
        return X % 1.0

    def forward(self, x, n: int = 1) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        for _ in range(abs(n)):
            x = self.forward_many(x[None, :])[0] if n > 0 else self.inverse_many(x[None, :])[0]
        return x

    def distance(self, x, y) -> float:
        return float(np.linalg.norm(wrap(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))))

    @cached_property
    def rates(self) -> RateTriple:
        rng = np.random.default_rng(0)
        return self.estimate_rates(rng.random((256, self.dimension)))

    def invariant_frames(self, X: np.ndarray, depth: int = 30) -> Tuple[np.ndarray, np.ndarray]:
        """Orthonormal frames of E^u and E^s at the rows of X, by orthogonal iteration."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        L = self.linear_part
        back = [X]
        for _ in range(depth):
            back.append(self.inverse_many(back[-1]))
        Qu = np.broadcast_to(L.unstable_basis, (len(X),) + L.unstable_basis.shape).copy()
        for points in reversed(back[1:]):
            Qu, _ = np.linalg.qr(self.derivative_many(points) @ Qu)
        ahead = [X]
        for _ in range(depth):
            ahead.append(self.forward_many(ahead[-1]))
        Qs = np.broadcast_to(L.stable_basis, (len(X),) + L.stable_basis.shape).copy()
        for points in reversed(ahead[:-1]):
            Qs, _ = np.linalg.qr(np.linalg.solve(self.derivative_many(points), Qs))
        return Qu, Qs

    def estimate_rates(self, X: np.ndarray) -> RateTriple:
        """Rate triple measured over a sample sweep."""
        Qu, Qs = self.invariant_frames(X)
        J = self.derivative_many(np.atleast_2d(X))
        stable = np.linalg.svd(J @ Qs, compute_uv=False)
        unstable = np.linalg.svd(J @ Qu, compute_uv=False)
        return RateTriple(nu=float(stable.max()),
                          gamma=float(1.0 / unstable.min()),
                          gamma_hat=float(unstable.max()))

    def contraction_factors(self, x, n: int) -> Tuple[float, float]:
        rates = self.rates
        return rates.nu ** n, rates.gamma ** n

    def _tracks_leaf(self, x, y, n: int, inverse: bool) -> bool:
        D = wrap(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
        size = float(np.linalg.norm(D))
        if size == 0.0:
            return True
        if size >= config.local_product_radius:
            return False
        point = np.asarray(x, dtype=float)
        rate = self.rates.nu if not inverse else self.rates.gamma
        for _ in range(n):
            if inverse:
                previous = self.inverse_many(point[None, :])[0]
                D = self.inverse_displacement(previous, D)
                point = previous
            else:
                D = self.displacement(point[None, :], D[None, :])[0]
                point = self.forward_many(point[None, :])[0]
        return float(np.linalg.norm(D)) <= 10.0 * rate ** n * size + 1e-9

    def inverse_displacement(self, x: np.ndarray, D: np.ndarray, max_iter: int = 30) -> np.ndarray:
        """Solve f(x + E) - f(x) = D for small E."""
        E = np.linalg.solve(self.derivative(x), D)
        for _ in range(max_iter):
            R = self.displacement(x[None, :], E[None, :])[0] - D
            step = np.linalg.solve(self.derivative(x + E), R)
            E = E - step
            if np.max(np.abs(step)) <= 1e-17 + 1e-15 * np.max(np.abs(E)):
                break
        return E

    def on_stable_leaf(self, x, y, local: bool = True) -> bool:
        return self._tracks_leaf(x, y, 10, inverse=False)

    def on_unstable_leaf(self, x, y, local: bool = True) -> bool:
        return self._tracks_leaf(x, y, 10, inverse=True)

    def local_product(self, x, z, half_length: int = 30) -> np.ndarray:
        """W^s_loc(x) intersected with W^u_loc(z), by multiple shooting."""
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.distance(x, z) >= config.local_product_radius:
            raise NotInProductRange(f"Distance {self.distance(x, z):.3g} exceeds the local product radius")
        K = half_length
        ahead = [x]
        for _ in range(K):
            ahead.append(self.forward_many(ahead[-1][None, :])[0])
        back = [z]
        for _ in range(K):
            back.append(self.inverse_many(back[-1][None, :])[0])
        guess = np.array(list(reversed(back[1:])) + ahead)
        unstable_rows = self.linear_part.coordinates[:self.linear_part.unstable_dimension]
        stable_rows = self.linear_part.coordinates[self.linear_part.unstable_dimension:]

        def residual(W):
            jumps = wrap(self.forward_many(W[:-1]) - W[1:])
            head = stable_rows @ wrap(W[0] - back[K])
            tail = unstable_rows @ wrap(W[-1] - ahead[K])
            return np.concatenate([jumps.ravel(), tail, head])

        W = self._newton_orbit(guess, residual, boundary=(stable_rows, unstable_rows))
        return W[K] % 1.0

    def _newton_orbit(self, W: np.ndarray, residual, boundary=None, cyclic: bool = False,
                      tol: float = 1e-13, max_iter: int = 40) -> np.ndarray:
        """Newton iteration on an orbit segment (open with boundary rows, or cyclic)."""
        m, d = W.shape
        W = W.copy()
        for _ in range(max_iter):
            r = residual(W)
            if np.max(np.abs(r)) < tol:
                return W
            J = np.zeros((r.size, m * d))
            derivatives = self.derivative_many(W)
            rows = m if cyclic else m - 1
            for k in range(rows):
                J[k * d:(k + 1) * d, k * d:(k + 1) * d] = derivatives[k]
                nxt = (k + 1) % m
                J[k * d:(k + 1) * d, nxt * d:(nxt + 1) * d] -= np.eye(d)
            if boundary is not None:
                stable_rows, unstable_rows = boundary
                offset = rows * d
                u = unstable_rows.shape[0]
                J[offset:offset + u, (m - 1) * d:] = unstable_rows
                J[offset + u:, :d] = stable_rows
            step = np.linalg.lstsq(J, r, rcond=None)[0] if cyclic else np.linalg.solve(J, r)
            W = W - step.reshape(m, d)
        if np.max(np.abs(residual(W))) > 1e-10:
            raise BaseSystemError("Orbit shooting did not converge")
        return W

    def periodic_orbit_from(self, start: np.ndarray, n: int) -> np.ndarray:
        """Refine a closed pseudo-orbit of length n to a genuine periodic orbit."""
        W = np.array([np.asarray(p, dtype=float) for p in start])
        if len(W) != n:
            W = np.array(self.orbit(W[0], n))

        def residual(V):
            return wrap(self.forward_many(V) - np.roll(V, -1, axis=0)).ravel()

        return self._newton_orbit(W, residual, cyclic=True) % 1.0

    def minimal_period(self, p: np.ndarray, n: int, tol: float = 1e-9) -> int:
        for m in range(1, n + 1):
            if n % m == 0 and self.distance(self.forward(p, m), p) < tol:
                return m
        return n

    def enumerate_periodic_orbits(self, n_max: int) -> List[PeriodicOrbit]:
        """Continuation of the exact periodic orbits of the linear part."""
        orbits = []
        for orbit in self.linear_part.enumerate_periodic_orbits(n_max):
            start = [np.array([float(c) for c in p]) for p in orbit.points(self.linear_part)]
            points = self.periodic_orbit_from(start, orbit.period)
            representative = min(points, key=lambda p: tuple(np.round(p, 12)))
            orbits.append(PeriodicOrbit(representative, orbit.period))
        return orbits

    def anosov_closing(self, x, n: int) -> Tuple[PeriodicOrbit, float]:
        if n < 1:
            raise ValueError("n must be at least 1")
        x = np.asarray(x, dtype=float)
        segment = self.orbit(x, n + 1)
        gap = self.distance(x, segment[n])
        if gap >= config.closing_threshold:
            raise NotCloseEnough(f"dist(x, f^{n} x) = {gap:.3g} exceeds {config.closing_threshold}")
        points = self.periodic_orbit_from(segment[:n], n)
        p = points[0]
        orbit = PeriodicOrbit(p, self.minimal_period(p, n))
        if gap == 0.0:
            return orbit, 0.0
        spread = max(self.distance(segment[i], points[i % n]) for i in range(n + 1))
        return orbit, spread / gap


class ToralAutomorphism(SmoothToralMap):
    """Hyperbolic automorphism of T^d given by an integer matrix with det = +-1."""

    def __init__(self, matrix):
        M = np.array(matrix)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("Automorphism matrix must be square")
        if not np.allclose(M, np.round(M)):
            raise ValueError("Automorphism matrix must have integer entries")
        self.matrix = np.round(M).astype(np.int64)
        self.dimension = self.matrix.shape[0]
        exact = sympy.Matrix(self.matrix.tolist())
        if abs(int(exact.det())) != 1:
            raise ValueError("Automorphism matrix must have determinant +-1")
        self.inverse_matrix = np.array(exact.inv().tolist(), dtype=np.int64)
        self.eigenvalues = np.linalg.eigvals(self.matrix.astype(float))
        moduli = np.abs(self.eigenvalues)
        if np.any(np.abs(moduli - 1.0) < config.hyperbolicity_tol):
            raise ValueError("Automorphism is not hyperbolic")
        self.stable_rate = float(moduli[moduli < 1].max())
        self.unstable_rate = float(moduli[moduli > 1].min())
        self.unstable_dimension = int(np.sum(moduli > 1))
        self.unstable_basis = self._invariant_basis('ouc')
        self.stable_basis = self._invariant_basis('iuc')
        frame = np.hstack([self.unstable_basis, self.stable_basis])
        # rows give coordinates in the (unstable, stable) frame
        self.coordinates = np.linalg.inv(frame)
        u = self.unstable_dimension
        self.unstable_projector = self.unstable_basis @ self.coordinates[:u]
        self.stable_projector = self.stable_basis @ self.coordinates[u:]

    def _invariant_basis(self, sort: str) -> np.ndarray:
        T, Z, sdim = scipy.linalg.schur(self.matrix.astype(float), output='real', sort=sort)
        return Z[:, :sdim]

    @property
    def linear_part(self) -> 'ToralAutomorphism':
        return self

    def __repr__(self) -> str:
        return f"ToralAutomorphism({self.matrix.tolist()})"

    def lift(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.matrix.T.astype(float)

    def derivative_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.broadcast_to(self.matrix.astype(float), X.shape[:-1] + self.matrix.shape).copy()

    def displacement(self, X: np.ndarray, D: np.ndarray) -> np.ndarray:
        return np.asarray(D, dtype=float) @ self.matrix.T.astype(float)

    def inverse_many(self, Y: np.ndarray, tol: float = 1e-15, max_iter: int = 50) -> np.ndarray:
        return (np.asarray(Y, dtype=float) @ self.inverse_matrix.T.astype(float)) % 1.0

    def forward(self, x, n: int = 1):
        if len(x) and isinstance(x[0], Fraction):
            step = self.matrix if n >= 0 else self.inverse_matrix
            point = tuple(x)
            for _ in range(abs(n)):
                point = tuple(sum((int(step[i, j]) * point[j] for j in range(self.dimension)), Fraction(0)) % 1
                              for i in range(self.dimension))
            return point
        return super().forward(x, n)

    @cached_property
    def rates(self) -> RateTriple:
        moduli = np.abs(self.eigenvalues)
        return RateTriple(nu=self.stable_rate, gamma=1.0 / self.unstable_rate, gamma_hat=float(moduli.max()))

    def on_stable_leaf(self, x, y, local: bool = True) -> bool:
        d = wrap(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
        if local and np.linalg.norm(d) >= config.local_product_radius:
            return False
        return float(np.linalg.norm(self.unstable_projector @ d)) <= 1e-10

    def on_unstable_leaf(self, x, y, local: bool = True) -> bool:
        d = wrap(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
        if local and np.linalg.norm(d) >= config.local_product_radius:
            return False
        return float(np.linalg.norm(self.stable_projector @ d)) <= 1e-10

    def local_product(self, x, z) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = wrap(np.asarray(z, dtype=float) - x)
        if np.linalg.norm(d) >= config.local_product_radius:
            raise NotInProductRange(f"Distance {np.linalg.norm(d):.3g} exceeds the local product radius")
        return (x + self.stable_projector @ d) % 1.0

    def power_minus_identity(self, n: int) -> sympy.Matrix:
        M = sympy.Matrix(self.matrix.tolist())
        return M ** n - sympy.eye(self.dimension)

    def fixed_point_count(self, n: int) -> int:
        return abs(int(self.power_minus_identity(n).det()))

    def fixed_points(self, n: int) -> List[Tuple[Fraction, ...]]:
        """All solutions of (L^n - I) x in Z^d in [0,1)^d, exactly."""
        count = self.fixed_point_count(n)
        if count > config.orbit_cap:
            raise CapacityExceeded(f"|Fix(L^{n})| = {count} exceeds cap {config.orbit_cap}")
        snf = SmithNormalForm(self.power_minus_identity(n).tolist())
        return snf.torus_solutions()

    def minimal_period(self, p, n: int, tol: float = 1e-9) -> int:
        if len(p) and isinstance(p[0], Fraction):
            for m in range(1, n + 1):
                if n % m == 0 and self.forward(p, m) == tuple(p):
                    return m
            return n
        return super().minimal_period(p, n, tol)

    def enumerate_periodic_orbits(self, n_max: int) -> List[PeriodicOrbit]:
        if n_max < 1:
            raise ValueError("n_max must be at least 1")
        fixed = {n: self.fixed_point_count(n) for n in range(1, n_max + 1)}
        counts = _orbit_counts(fixed, n_max)
        total = sum(counts.values())
        if total > config.orbit_cap:
            raise CapacityExceeded(f"{total} orbits of period <= {n_max} exceed cap {config.orbit_cap}")
        orbits = []
        for n in range(1, n_max + 1):
            seen = set()
            found = []
            for point in self.fixed_points(n):
                if point in seen or self.minimal_period(point, n) != n:
                    continue
                members = self.orbit(point, n)
                seen.update(members)
                found.append(min(members))
            orbits.extend(PeriodicOrbit(p, n) for p in sorted(found))
        if config.verbose_logging:
            print(f"📊 {len(orbits)} periodic orbits of period <= {n_max}")
        return orbits

    def anosov_closing(self, x, n: int) -> Tuple[PeriodicOrbit, float]:
        """Exact rational periodic point near a nearly closed orbit segment."""
        if n < 1:
            raise ValueError("n must be at least 1")
        x = np.asarray(x, dtype=float)
        image = self.forward(x, n)
        gap = self.distance(x, image)
        if gap >= config.closing_threshold:
            raise NotCloseEnough(f"dist(x, L^{n} x) = {gap:.3g} exceeds {config.closing_threshold}")
        system = self.power_minus_identity(n)
        lifted = np.array(system.tolist(), dtype=float) @ x
        lattice = sympy.Matrix([int(round(v)) for v in lifted])
        solution = system.LUsolve(lattice)
        p = tuple(Fraction(int(sympy.fraction(c)[0]), int(sympy.fraction(c)[1])) % 1 for c in solution)
        orbit = PeriodicOrbit(p, self.minimal_period(p, n))
        if gap == 0.0:
            return orbit, 0.0
        p_float = np.array([float(c) for c in p])
        spread = max(self.distance(self.forward(x, i), self.forward(p_float, i)) for i in range(n + 1))
        return orbit, spread / gap


class TrigPolynomial:
    """Z^d-periodic map R^d -> R^d given by a finite Fourier table."""

    def __init__(self, dimension: int, terms: Sequence[Tuple[Sequence[int], Sequence[float], Sequence[float]]]):
        """
        Args:
            dimension: Torus dimension d
            terms: Rows (k, s, c) contributing s sin(2 pi k.x) + c cos(2 pi k.x)
        """
        self.dimension = dimension
        if terms:
            self.wavevectors = np.array([row[0] for row in terms], dtype=float).reshape(len(terms), dimension)
            self.sine = np.array([row[1] for row in terms], dtype=float).reshape(len(terms), dimension)
            self.cosine = np.array([row[2] for row in terms], dtype=float).reshape(len(terms), dimension)
        else:
            self.wavevectors = np.zeros((0, dimension))
            self.sine = np.zeros((0, dimension))
            self.cosine = np.zeros((0, dimension))

    def scaled(self, factor: float) -> 'TrigPolynomial':
        rows = [(k, factor * s, factor * c) for k, s, c in zip(self.wavevectors, self.sine, self.cosine)]
        return TrigPolynomial(self.dimension, rows)

    def _phases(self, X: np.ndarray) -> np.ndarray:
        return 2.0 * np.pi * (np.asarray(X, dtype=float) @ self.wavevectors.T)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        phases = self._phases(X)
        return np.sin(phases) @ self.sine + np.cos(phases) @ self.cosine

    def jacobian(self, X: np.ndarray) -> np.ndarray:
        phases = self._phases(X)
        weights_sine = 2.0 * np.pi * np.cos(phases)
        weights_cosine = -2.0 * np.pi * np.sin(phases)
        return (np.einsum('...m,ma,mb->...ab', weights_sine, self.sine, self.wavevectors)
                + np.einsum('...m,ma,mb->...ab', weights_cosine, self.cosine, self.wavevectors))

    def difference(self, X: np.ndarray, D: np.ndarray) -> np.ndarray:
        """Q(X + D) - Q(X) without cancellation for small D."""
        phases = self._phases(X)
        half = 0.5 * self._phases(D)
        s = np.sin(half)
        middle = phases + half
        return (2.0 * s * np.cos(middle)) @ self.sine - (2.0 * s * np.sin(middle)) @ self.cosine

    def c1_bound(self) -> float:
        """Upper bound for sup ||DQ||."""
        norms = np.linalg.norm(self.wavevectors, axis=1)
        amplitudes = np.linalg.norm(self.sine, axis=1) + np.linalg.norm(self.cosine, axis=1)
        return float(2.0 * np.pi * np.sum(norms * amplitudes))


def anosov_perturbation_bound(L: ToralAutomorphism) -> float:
    """C^1 size below which L + perturbation keeps a cone-field splitting."""
    coupling = np.linalg.norm(L.unstable_projector, 2) + np.linalg.norm(L.stable_projector, 2)
    return float(min(L.unstable_rate - 1.0, 1.0 - L.stable_rate) / (2.0 * coupling))


class PerturbedToralMap(SmoothToralMap):
    """
    f(x) = L x + Q(x) mod 1 for a trigonometric polynomial Q.

    The C^1 size of Q must stay below the cone bound of L. With strict=False a
    larger perturbation is accepted with a warning.
    """

    def __init__(self, linear_part: ToralAutomorphism, perturbation: TrigPolynomial, strict: bool = True):
        if perturbation.dimension != linear_part.dimension:
            raise ValueError("Perturbation dimension does not match the automorphism")
        self.linear_part = linear_part
        self.perturbation = perturbation
        self.dimension = linear_part.dimension
        self.perturbation_size = perturbation.c1_bound()
        self.anosov_bound = anosov_perturbation_bound(linear_part)
        if self.perturbation_size > self.anosov_bound:
            if strict:
                raise OutsideConeBound(f"Perturbation C^1 size {self.perturbation_size:.3g} exceeds the cone "
                                       f"bound {self.anosov_bound:.3g}")
            warnings.warn(f"Perturbation C^1 size {self.perturbation_size:.3g} exceeds the cone bound "
                          f"{self.anosov_bound:.3g}; hyperbolicity is not guaranteed")

    def __repr__(self) -> str:
        return f"PerturbedToralMap({self.linear_part!r}, size={self.perturbation_size:.3g})"

    def lift(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.linear_part.matrix.T.astype(float) + self.perturbation(X)

    def derivative_many(self, X: np.ndarray) -> np.ndarray:
        return self.linear_part.matrix.astype(float) + self.perturbation.jacobian(X)

    def displacement(self, X: np.ndarray, D: np.ndarray) -> np.ndarray:
        D = np.asarray(D, dtype=float)
        return D @ self.linear_part.matrix.T.astype(float) + self.perturbation.difference(X, D)


class PlantedConjugateMap(SmoothToralMap):
    """f = T^{-1} o L o T for T = id + Q, so that L o T = T o f."""

    def __init__(self, linear_part: ToralAutomorphism, conjugacy: TrigPolynomial):
        self.linear_part = linear_part
        self.conjugacy_part = conjugacy
        self.dimension = linear_part.dimension
        if conjugacy.c1_bound() >= 1.0:
            raise ValueError("id + Q must be a diffeomorphism (C^1 size of Q below 1)")

    def conjugacy(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X + self.conjugacy_part(X)

    def conjugacy_inverse(self, Y: np.ndarray, tol: float = 1e-15, max_iter: int = 50) -> np.ndarray:
        """Lifted inverse of T = id + Q by Newton's method."""
        Y = np.asarray(Y, dtype=float)
        X = Y - self.conjugacy_part(Y)
        eye = np.eye(self.dimension)
        for _ in range(max_iter):
            R = X + self.conjugacy_part(X) - Y
            step = np.linalg.solve(eye + self.conjugacy_part.jacobian(X), R[..., None])[..., 0]
            X = X - step
            if np.max(np.abs(step)) < tol:
                break
        return X

    def lift(self, X: np.ndarray) -> np.ndarray:
        Z = self.conjugacy(X) @ self.linear_part.matrix.T.astype(float)
        return self.conjugacy_inverse(Z)

    def derivative_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        W = self.lift(X)
        eye = np.eye(self.dimension)
        inner = self.linear_part.matrix.astype(float) @ (eye + self.conjugacy_part.jacobian(X))
        return np.linalg.solve(eye + self.conjugacy_part.jacobian(W), inner)


class ReversedBase(BaseSystem):
    """Time reversal: forward iterates of f^{-1}, stable and unstable leaves swapped."""

    def __init__(self, base: BaseSystem):
        self.base = base

    def forward(self, x, n: int = 1):
        return self.base.forward(x, -n)

    def distance(self, x, y) -> float:
        return self.base.distance(x, y)

    def on_stable_leaf(self, x, y, local: bool = True) -> bool:
        return self.base.on_unstable_leaf(x, y, local)

    def on_unstable_leaf(self, x, y, local: bool = True) -> bool:
        return self.base.on_stable_leaf(x, y, local)

    def contraction_factors(self, x, n: int) -> Tuple[float, float]:
        forward, backward = self.base.contraction_factors(x, n)
        return backward, forward

    def local_product(self, x, z):
        return self.base.local_product(z, x)

    def steps_to_local_leaf(self, x, y, direction: str) -> int:
        return self.base.steps_to_local_leaf(x, y, 'unstable' if direction == 'stable' else 'stable')


class PowerBase(BaseSystem):
    """The N-th power f^N of a base system."""

    def __init__(self, base: BaseSystem, power: int):
        if power < 1:
            raise ValueError("power must be at least 1")
        self.base = base
        self.power = power

    def forward(self, x, n: int = 1):
        return self.base.forward(x, self.power * n)

    def distance(self, x, y) -> float:
        return self.base.distance(x, y)

    def on_stable_leaf(self, x, y, local: bool = True) -> bool:
        return self.base.on_stable_leaf(x, y, local)

    def on_unstable_leaf(self, x, y, local: bool = True) -> bool:
        return self.base.on_unstable_leaf(x, y, local)

    def contraction_factors(self, x, n: int) -> Tuple[float, float]:
        return self.base.contraction_factors(x, self.power * n)

    def local_product(self, x, z):
        return self.base.local_product(x, z)

    def steps_to_local_leaf(self, x, y, direction: str) -> int:
        return -(-self.base.steps_to_local_leaf(x, y, direction) // self.power)


# =============================================================================
# OPERATIONS
# =============================================================================

def sample_points(base: BaseSystem, rng: np.random.Generator, count: int, radius: int = 8) -> List[object]:
    """Random sample points of a base system (symbolic windows or uniform torus points)."""
    while isinstance(base, (PowerBase, ReversedBase)):
        base = base.base
    if isinstance(base, SftBase):
        return [base.random_point(rng, radius) for _ in range(count)]
    return list(rng.random((count, base.dimension)))


def local_product(base: BaseSystem, x, z):
    """W^s_loc(x) intersected with W^u_loc(z)."""
    return base.local_product(x, z)


def enumerate_periodic_orbits(base: BaseSystem, n_max: int) -> List[PeriodicOrbit]:
    """All periodic orbits of minimal period <= n_max, each exactly once."""
    return base.enumerate_periodic_orbits(n_max)


def homoclinic_points(base: SftBase, q: SymbolicPoint, depth: int) -> List[SymbolicPoint]:
    """Points agreeing with the fixed point q outside the window [-depth, depth]."""
    return base.homoclinic_points(q, depth)


def anosov_closing(base: BaseSystem, x, n: int) -> Tuple[PeriodicOrbit, float]:
    """
    Close a nearly returning orbit segment.

    Returns:
        Tuple of (periodic orbit, measured closing constant K1)

    Raises:
        NotCloseEnough: If dist(x, f^n x) is above the closing threshold
    """
    return base.anosov_closing(x, n)


@dataclass(frozen=True)
class FactorReport:
    polynomial: str
    multiplicity: int
    moduli: Tuple[float, ...]


@dataclass(frozen=True)
class WeakIrreducibilityReport:
    weakly_irreducible: bool
    factors: Tuple[FactorReport, ...]


def _distinct_moduli(values: np.ndarray, tol: float) -> Tuple[float, ...]:
    distinct: List[float] = []
    for value in sorted(float(v) for v in values):
        if not distinct or value - distinct[-1] > tol:
            distinct.append(value)
    return tuple(distinct)


def weak_irreducibility_check(L: ToralAutomorphism, tol: float = 1e-10) -> WeakIrreducibilityReport:
    """
    Compare the root-modulus sets of the rational factors of the characteristic polynomial.

    Args:
        L: Hyperbolic toral automorphism
        tol: Tolerance for comparing moduli

    Returns:
        WeakIrreducibilityReport with one entry per irreducible factor over Q
    """
    variable = sympy.Symbol('t')
    polynomial = sympy.Matrix(L.matrix.tolist()).charpoly(variable).as_expr()
    _, factors = sympy.factor_list(polynomial, variable)
    reports = []
    for factor, multiplicity in factors:
        coefficients = [float(c) for c in sympy.Poly(factor, variable).all_coeffs()]
        moduli = _distinct_moduli(np.abs(np.roots(coefficients)), tol)
        reports.append(FactorReport(str(factor), int(multiplicity), moduli))
    reports.sort(key=lambda r: r.polynomial)
    reference = reports[0].moduli
    same = all(len(r.moduli) == len(reference) and np.allclose(r.moduli, reference, rtol=0.0, atol=tol)
               for r in reports)
    if config.verbose_logging:
        print(f"🔧 Characteristic polynomial factors: {[r.polynomial for r in reports]}")
    return WeakIrreducibilityReport(bool(same), tuple(reports))
