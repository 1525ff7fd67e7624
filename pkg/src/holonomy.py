"""Stable and unstable cocycle holonomies as certified truncated limits."""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .base import SftBase, SymbolicPoint
from .cocycle import BunchingCertificate, CocycleSpec
from .config import config, parallel_map


class HolonomyError(Exception):
    """Custom exception for holonomy-related errors."""
    pass


class NotOnLeaf(HolonomyError):
    """The two points do not share the requested leaf."""
    pass


class NotOnStableLeaf(NotOnLeaf):
    pass


class NotOnUnstableLeaf(NotOnLeaf):
    pass


class NoBunchingCertificate(HolonomyError):
    """Holonomy limits are only computed for certified fiber-bunched cocycles."""
    pass


class InsufficientSpread(HolonomyError):
    """Too few pairs, or distances spanning too small a range, for a power-law fit."""
    pass


STABLE = 'stable'
UNSTABLE = 'unstable'


@dataclass(frozen=True)
class HolonomyOperator:
    matrix: np.ndarray
    direction: str
    source: object
    target: object
    depth: int
    error_bound: float
    distance: float

    def deviation(self) -> float:
        """||H - Id||."""
        return float(np.linalg.norm(self.matrix - np.eye(self.matrix.shape[0]), 2))

    def csv_row(self) -> List[object]:
        return [str(self.source), str(self.target), self.direction, self.depth,
                self.error_bound, self.deviation()]


def truncated_holonomy(A: CocycleSpec, x, y, n: int, direction: str) -> np.ndarray:
    """(A^n_y)^{-1} A^n_x for the stable direction, with n replaced by -n for the unstable one."""
    steps = n if direction == STABLE else -n
    Px, log_x = A.scaled_iterate(x, steps)
    Py, log_y = A.scaled_iterate(y, steps)
    return np.linalg.solve(Py, Px) * math.exp(log_x - log_y)


def certified_depth(certificate: BunchingCertificate, distance: float, beta: float, tol: float) -> int:
    """Smallest n with L theta^n dist^beta below tol."""
    if distance == 0.0:
        return 0
    budget = tol / (certificate.constant * distance ** beta)
    if budget >= 1.0:
        return 1
    return max(1, int(math.ceil(math.log(budget) / math.log(certificate.theta))))


def _holonomy(A: CocycleSpec, x, y, tol: float, certificate: Optional[BunchingCertificate],
              direction: str) -> HolonomyOperator:
    base = A.base
    on_leaf = base.on_stable_leaf if direction == STABLE else base.on_unstable_leaf
    error = NotOnStableLeaf if direction == STABLE else NotOnUnstableLeaf
    if not on_leaf(x, y, local=False):
        raise error(f"{y} is not on the {direction} leaf of {x}")
    if certificate is None or not certificate.valid:
        raise NoBunchingCertificate(f"No valid bunching certificate for {A.name}")

    # global leaf pairs are moved onto the local leaf and pulled back by equivariance;
    # the pullback scales the local error by ||A_y^{-1}|| ||A_x||
    steps = base.steps_to_local_leaf(x, y, direction)
    shift = steps if direction == STABLE else -steps
    x_local, y_local = base.forward(x, shift), base.forward(y, shift)
    distance = base.distance(x_local, y_local)
    beta = certificate.beta
    pullback = 1.0
    if steps:
        Ax = A.iterate(x, shift, condition_cap=None)
        Ay = A.iterate(y, shift, condition_cap=None)
        pullback = float(np.linalg.norm(np.linalg.inv(Ay), 2) * np.linalg.norm(Ax, 2))
    depth = min(certified_depth(certificate, distance, beta, tol / pullback), config.max_horizon)
    if depth == 0:
        H = np.eye(A.dimension)
    else:
        H = truncated_holonomy(A, x_local, y_local, depth, direction)
    if steps:
        H = np.linalg.solve(Ay, H @ Ax)
    bound = pullback * certificate.constant * certificate.theta ** depth * distance ** beta if depth else 0.0
    if config.debug_mode:
        print(f"🔧 {direction} holonomy: depth {depth}, error bound {bound:.2e}")
    return HolonomyOperator(H, direction, x, y, depth + steps, bound, base.distance(x, y))


def stable_holonomy(A: CocycleSpec, x, y, tol: float = 1e-12,
                    certificate: Optional[BunchingCertificate] = None) -> HolonomyOperator:
    """
    H^s_{x,y} = lim (A^n_y)^{-1} A^n_x truncated at a certified depth.

    Args:
        A: Cocycle
        x: Source point
        y: Target point on the stable leaf of x
        tol: Target bound for the truncation error
        certificate: Valid bunching certificate of A

    Returns:
        HolonomyOperator with its depth and error bound

    Raises:
        NotOnStableLeaf: If y is not on the stable leaf of x
        NoBunchingCertificate: If no valid certificate is supplied
    """
    return _holonomy(A, x, y, tol, certificate, STABLE)


def unstable_holonomy(A: CocycleSpec, x, y, tol: float = 1e-12,
                      certificate: Optional[BunchingCertificate] = None) -> HolonomyOperator:
    """H^u_{x,y} = lim (A^{-n}_y)^{-1} A^{-n}_x truncated at a certified depth."""
    return _holonomy(A, x, y, tol, certificate, UNSTABLE)


def equivariance_residual(A: CocycleSpec, H: HolonomyOperator) -> float:
    """||A_x - H_{fy,fx} A_y H_{x,y}||, with H_{fy,fx} truncated at the depth of H."""
    base = A.base
    fx, fy = base.forward(H.source), base.forward(H.target)
    if H.depth == 0:
        back = np.eye(A.dimension)
    else:
        back = truncated_holonomy(A, fy, fx, H.depth, H.direction)
    return float(np.linalg.norm(A.value(H.source) - back @ A.value(H.target) @ H.matrix, 2))


@dataclass(frozen=True)
class HolderFit:
    beta: float
    constant: float
    residual: float
    degenerate: bool


def holder_fit(pairs: Sequence[Tuple[float, float]]) -> HolderFit:
    """
    Log-log regression of ||H - Id|| against dist.

    Raises:
        InsufficientSpread: With fewer than 8 pairs or under two decades of distance
    """
    pairs = [(float(d), float(h)) for d, h in pairs if d > 0]
    if len(pairs) < 8:
        raise InsufficientSpread(f"Only {len(pairs)} pairs with positive distance")
    distances = np.array([d for d, _ in pairs])
    if distances.max() / distances.min() < 100.0:
        raise InsufficientSpread("Distances span less than two decades")
    usable = [(d, h) for d, h in pairs if h > 0]
    if len(usable) < 2:
        return HolderFit(math.nan, 0.0, 0.0, True)
    logs_d = np.log([d for d, _ in usable])
    logs_h = np.log([h for _, h in usable])
    (beta, intercept), residuals, *_ = np.polyfit(logs_d, logs_h, 1, full=True)
    residual = float(math.sqrt(residuals[0] / len(usable))) if len(residuals) else 0.0
    return HolderFit(float(beta), float(math.exp(intercept)), residual, False)


def flipped_pairs(base: SftBase, x: SymbolicPoint, indices: Sequence[int]) -> List[Tuple[SymbolicPoint, SymbolicPoint]]:
    """Pairs (x, y) where y differs from x exactly at one index (admissible flips only)."""
    pairs = []
    for i in indices:
        for b in range(base.alphabet_size):
            if b == x.symbol(i):
                continue
            if base.allowed(x.symbol(i - 1), b) and base.allowed(b, x.symbol(i + 1)):
                pairs.append((x, x.with_symbol(i, b)))
                break
    return pairs


def holonomy_table(A: CocycleSpec, pairs: Sequence[Tuple[object, object]], direction: str,
                   certificate: BunchingCertificate, tol: float = 1e-12) -> List[HolonomyOperator]:
    """Holonomies for many pairs, in input order."""
    compute = stable_holonomy if direction == STABLE else unstable_holonomy
    return parallel_map(lambda pair: compute(A, pair[0], pair[1], tol, certificate), pairs)
