"""Configuration management for the periodic-data rigidity laboratory."""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

from dotenv import load_dotenv


class Config:
    """Centralized configuration management with .env file support and run overrides."""

    def __init__(self, env_file: str = ".env"):
        """Initialize configuration by loading from .env file and environment variables."""
        self._overrides: Dict[str, Any] = {}
        if os.path.exists(env_file):
            load_dotenv(env_file)
            print(f"✅ Loaded configuration from {env_file}")
        elif self.verbose_logging:
            print(f"⚠️  No {env_file} file found, using environment variables only")

    def override(self, **values: Any) -> None:
        """Override settings for the current run (CLI flags win over the environment)."""
        for key, value in values.items():
            if value is None:
                continue
            if not hasattr(type(self), key):
                raise KeyError(f"Unknown configuration key: {key}")
            self._overrides[key] = value

    def reset_overrides(self) -> None:
        self._overrides.clear()

    def _get(self, key: str, env_name: str, default: str, cast: Callable[[str], Any]) -> Any:
        if key in self._overrides:
            return self._overrides[key]
        return cast(os.getenv(env_name, default))

    @staticmethod
    def _flag(value: str) -> bool:
        return value.lower() == 'true'

    # =============================================================================
    # NUMERICAL LIMITS
    # =============================================================================

    @property
    def condition_cap(self) -> float:
        return self._get('condition_cap', 'CONDITION_CAP', '1e12', float)

    @property
    def max_horizon(self) -> int:
        return self._get('max_horizon', 'MAX_HORIZON', '4096', int)

    @property
    def orbit_cap(self) -> int:
        return self._get('orbit_cap', 'ORBIT_CAP', '200000', int)

    @property
    def hyperbolicity_tol(self) -> float:
        return self._get('hyperbolicity_tol', 'HYPERBOLICITY_TOL', '1e-6', float)

    # =============================================================================
    # BASE SYSTEMS
    # =============================================================================

    @property
    def local_product_radius(self) -> float:
        return self._get('local_product_radius', 'LOCAL_PRODUCT_RADIUS', '0.1', float)

    @property
    def closing_threshold(self) -> float:
        return self._get('closing_threshold', 'CLOSING_THRESHOLD', '0.05', float)

    # =============================================================================
    # TOLERANCES
    # =============================================================================

    @property
    def grouping_tol(self) -> float:
        return self._get('grouping_tol', 'GROUPING_TOL', '1e-2', float)

    @property
    def invariance_tol(self) -> float:
        return self._get('invariance_tol', 'INVARIANCE_TOL', '1e-6', float)

    @property
    def bunching_slack(self) -> float:
        return self._get('bunching_slack', 'BUNCHING_SLACK', '1e-3', float)

    @property
    def isometry_tol(self) -> float:
        return self._get('isometry_tol', 'ISOMETRY_TOL', '1e-6', float)

    @property
    def homoclinic_tol(self) -> float:
        return self._get('homoclinic_tol', 'HOMOCLINIC_TOL', '1e-6', float)

    @property
    def leaf_tol(self) -> float:
        return self._get('leaf_tol', 'LEAF_TOL', '1e-10', float)

    @property
    def solve_tol(self) -> float:
        return self._get('solve_tol', 'SOLVE_TOL', '1e-9', float)

    # =============================================================================
    # RUN SETTINGS
    # =============================================================================

    @property
    def threads(self) -> int:
        return self._get('threads', 'THREADS', '1', int)

    @property
    def seed(self) -> int:
        return self._get('seed', 'SEED', '0', int)

    @property
    def output_directory(self) -> str:
        return self._get('output_directory', 'OUTPUT_DIRECTORY', './output', str)

    # =============================================================================
    # LOGGING & DEBUG
    # =============================================================================

    @property
    def verbose_logging(self) -> bool:
        return self._get('verbose_logging', 'VERBOSE_LOGGING', 'false', self._flag)

    @property
    def debug_mode(self) -> bool:
        return self._get('debug_mode', 'DEBUG_MODE', 'false', self._flag)


class StageTimer:
    """Wall-clock bookkeeping for pipeline stages."""

    def __init__(self, config: Config):
        self.config = config
        self._stage_times: List[Tuple[str, float]] = []

    @contextmanager
    def track(self, stage: str):
        """Time a pipeline stage and record its duration."""
        start = time.perf_counter()
        if self.config.verbose_logging:
            print(f"🔄 Stage {stage} started")
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self._stage_times.append((stage, elapsed))
            if self.config.verbose_logging:
                print(f"📊 Stage {stage}: {elapsed:.3f}s")

    def rows(self) -> List[Tuple[str, float]]:
        return list(self._stage_times)

    def total(self) -> float:
        return sum(elapsed for _, elapsed in self._stage_times)

    def reset(self) -> None:
        self._stage_times = []


def parallel_map(function: Callable[[Any], Any], items: Iterable[Any], threads: Optional[int] = None) -> List[Any]:
    """
    Apply a function to items, optionally on a thread pool.

    Results come back in input order whatever the thread count, so reductions
    over them are deterministic.
    """
    items = list(items)
    workers = threads if threads is not None else config.threads
    if workers <= 1 or len(items) <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(function, items))


# Global configuration instance
config = Config()
stage_timer = StageTimer(config)
