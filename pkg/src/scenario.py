"""Scenario parsing, pipelines and reproducible reports."""

import ast
import configparser
import math
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .base import (OutsideConeBound, PeriodicOrbit, PerturbedToralMap, PlantedConjugateMap, RateTriple, SftBase,
                   SymbolicPoint, ToralAutomorphism, TrigPolynomial, anosov_closing, enumerate_periodic_orbits,
                   sample_points, weak_irreducibility_check)
from .cocycle import (CoboundaryGenerator, CocycleSpec, ConjugatedGenerator, ConstantGenerator, DerivativeGenerator,
                      LocallyConstantGenerator, TailGenerator, are_similar, bunching_margin, delta_narrow_radius,
                      power_cocycle)
from .config import config, parallel_map, stage_timer
from .file_handler import FileHandler, ReportFormatter
from .gallery import GALLERY
from .holonomy import (STABLE, equivariance_residual, flipped_pairs, holder_fit, holonomy_table,
                       truncated_holonomy)
from .rigidity import (UNSTABLE, bunching_check, derivative_transfer, foliation_holonomy, franks_manning,
                       holonomy_derivative_check, metric_isometry_residual, NotContracting,
                       nonstationary_linearization, pushed_metric, skew_product_map, t4_skew_periodic_demo,
                       translation_conjugates)
from .spectrum import (NoDomination, block_consistency_residual, dominated_splitting, lyapunov_splitting,
                       periodic_approximation_check)
from .transfer import (CombineFailed, TransferMap, UnipotentFamily, agreement_with_samples,
                       build_transfer_fixed_point, coboundary_divergence, combine_coprime,
                       conjugacy_from_periodic_data, homoclinic_consistency, invariant_metric_from_transfer,
                       recurrence_times, unipotent_periodic_criterion, verify_conjugacy)

SCHEMA = "periodic-rigidity-report/1"


class ScenarioError(Exception):
    """Custom exception for scenario-related errors."""
    pass


class ConfigError(ScenarioError):
    """A scenario file is malformed; names the section, field and line when known."""

    def __init__(self, message: str, section: Optional[str] = None, field: Optional[str] = None,
                 line: Optional[int] = None):
        location = ""
        if section is not None:
            location = f"[{section}]"
            if field is not None:
                location += f" {field}"
            if line is not None:
                location += f" (line {line})"
            location += ": "
        super().__init__(location + message)
        self.section = section
        self.field = field
        self.line = line


class CheckFailed(ScenarioError):
    """At least one embedded check failed; the report has been written."""

    def __init__(self, message: str, report_path: str, report: 'Report'):
        super().__init__(message)
        self.report_path = report_path
        self.report = report


class UnknownScenario(ScenarioError):
    pass


# =============================================================================
# VALUE PARSING
# =============================================================================

_ROTATION = re.compile(r'^rotation\(\s*([^)]+?)\s*\)$')
_DIAG = re.compile(r'^diag\((.*)\)$', re.S)
_REQUIRED = object()


def _number(text: str) -> float:
    return float(Fraction(text.strip()))


def rotation_matrix(turns: float) -> np.ndarray:
    angle = 2.0 * math.pi * turns
    return np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])


def parse_matrix(value: Any, square: bool = True) -> np.ndarray:
    """
    Matrix from a bracketed row list, ``rotation(turns)`` or ``diag(a, b, ...)``.

    Raises:
        ValueError: With a message naming the offending row
    """
    if isinstance(value, str):
        text = value.strip()
        match = _ROTATION.match(text)
        if match:
            return rotation_matrix(_number(match.group(1)))
        match = _DIAG.match(text)
        if match:
            entries = [_number(token) for token in match.group(1).split(',') if token.strip()]
            if not entries:
                raise ValueError("diag() needs at least one entry")
            return np.diag(entries)
        try:
            value = ast.literal_eval(text)
        except (SyntaxError, ValueError):
            raise ValueError(f"cannot read a matrix from {text!r}")
    if not isinstance(value, (list, tuple)) or not value:
        raise ValueError("expected a nonempty list of rows")
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, (list, tuple)):
            raise ValueError(f"row {i + 1} is not a bracketed list")
        if rows and len(row) != len(rows[0]):
            raise ValueError(f"row {i + 1} has {len(row)} entries, expected {len(rows[0])}")
        try:
            rows.append([float(v) for v in row])
        except (TypeError, ValueError):
            raise ValueError(f"row {i + 1} has a non-numeric entry")
    matrix = np.array(rows)
    if square and matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, found {matrix.shape[0]} rows of {matrix.shape[1]} entries")
    return matrix


def _word(key: Any) -> Tuple[int, ...]:
    if isinstance(key, int):
        return (key,)
    if isinstance(key, str):
        return tuple(int(c) for c in key.strip())
    return tuple(int(s) for s in key)


# =============================================================================
# SCENARIOS
# =============================================================================

@dataclass
class Scenario:
    """A parsed scenario: metadata plus the raw key/value sections."""
    name: str
    description: str
    pipeline: str
    seed: int
    budget: float
    sections: Dict[str, Dict[str, str]]
    text: str
    directory: str = "."

    def _line_of(self, section: str, key: str) -> Optional[int]:
        current = None
        pattern = re.compile(rf'^\s*{re.escape(key)}\s*[=:]', re.I)
        for number, line in enumerate(self.text.splitlines(), start=1):
            header = re.match(r'^\s*\[([^\]]+)\]', line)
            if header:
                current = header.group(1).strip()
            elif current == section and pattern.match(line):
                return number
        return None

    def error(self, section: str, key: Optional[str], message: str) -> ConfigError:
        line = self._line_of(section, key) if key is not None else None
        return ConfigError(message, section, key, line)

    def has(self, section: str, key: Optional[str] = None) -> bool:
        if section not in self.sections:
            return False
        return key is None or key in self.sections[section]

    def get(self, section: str, key: str, default: Any = _REQUIRED) -> str:
        if self.has(section, key):
            return self.sections[section][key]
        if default is _REQUIRED:
            if section not in self.sections:
                raise ConfigError(f"missing section needed for '{key}'", section, key)
            raise ConfigError("missing required field", section, key)
        return default

    def _convert(self, section: str, key: str, default: Any, cast: Callable[[str], Any]) -> Any:
        raw = self.get(section, key, None if default is not _REQUIRED else _REQUIRED)
        if raw is None:
            return default
        try:
            return cast(raw)
        except (TypeError, ValueError, SyntaxError) as e:
            raise self.error(section, key, f"invalid value {raw!r}: {e}")

    def get_int(self, section: str, key: str, default: Any = _REQUIRED) -> int:
        return self._convert(section, key, default, lambda raw: int(raw.strip()))

    def get_float(self, section: str, key: str, default: Any = _REQUIRED) -> float:
        return self._convert(section, key, default, _number)

    def get_bool(self, section: str, key: str, default: Any = _REQUIRED) -> bool:
        def cast(raw: str) -> bool:
            value = raw.strip().lower()
            if value not in ('true', 'false', 'yes', 'no', '1', '0'):
                raise ValueError("expected true or false")
            return value in ('true', 'yes', '1')
        return self._convert(section, key, default, cast)

    def get_literal(self, section: str, key: str, default: Any = _REQUIRED) -> Any:
        return self._convert(section, key, default, lambda raw: ast.literal_eval(raw.strip()))

    def get_matrix(self, section: str, key: str, default: Any = _REQUIRED, square: bool = True) -> np.ndarray:
        raw = self.get(section, key, None if default is not _REQUIRED else _REQUIRED)
        if raw is None:
            return parse_matrix(default, square)
        text = raw.strip()
        if text.startswith('@'):
            path = os.path.join(self.directory, text[1:].strip())
            if not FileHandler.validate_file_exists(path):
                raise self.error(section, key, f"matrix file {path} does not exist")
            try:
                matrix = FileHandler.read_matrix_file(path)
            except ValueError as e:
                raise self.error(section, key, str(e))
            if square and matrix.shape[0] != matrix.shape[1]:
                raise self.error(section, key, f"{path} does not hold a square matrix")
            return matrix
        try:
            return parse_matrix(text, square)
        except ValueError as e:
            raise self.error(section, key, str(e))

    def get_table(self, section: str, key: str) -> Dict[Tuple[int, ...], np.ndarray]:
        """Symbol-word table, e.g. ``{'01': [[1, 0], [0, 1]], '10': 'rotation(0.2)'}``."""
        raw = self.get_literal(section, key)
        if not isinstance(raw, dict) or not raw:
            raise self.error(section, key, "expected a nonempty {word: matrix} table")
        table = {}
        for word, value in raw.items():
            try:
                table[_word(word)] = parse_matrix(value)
            except ValueError as e:
                raise self.error(section, key, f"entry {word!r}: {e}")
        return table

    def get_window(self, section: str, key: str, default: Tuple[int, int] = (0, 0)) -> Tuple[int, int]:
        window = self.get_literal(section, key, default)
        if not isinstance(window, (list, tuple)) or len(window) != 2 or window[0] > window[1]:
            raise self.error(section, key, f"expected a window (a, b) with a <= b, got {window!r}")
        return int(window[0]), int(window[1])

    def echo(self, seed: int) -> Dict[str, Any]:
        return {
            'name': self.name,
            'description': self.description,
            'pipeline': self.pipeline,
            'seed': seed,
            'budget_seconds': self.budget,
            'sections': {name: dict(values) for name, values in self.sections.items() if name != 'scenario'},
        }


def parse_scenario(text: str, source: str = "<scenario>", directory: str = ".") -> Scenario:
    """
    Parse a scenario from INI text.

    Raises:
        ConfigError: If the text is malformed or [scenario] lacks a required field
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"duplicate field in {source}", e.section, e.option, e.lineno)
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"duplicate section in {source}", e.section, None, e.lineno)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse {source}: {e}")
    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    scenario = Scenario("", "", "", 0, 0.0, sections, text, directory)
    scenario.name = scenario.get('scenario', 'name').strip()
    scenario.description = scenario.get('scenario', 'description', "").strip()
    scenario.pipeline = scenario.get('scenario', 'pipeline').strip()
    scenario.seed = scenario.get_int('scenario', 'seed', 0)
    scenario.budget = scenario.get_float('scenario', 'budget', 60.0)
    if scenario.pipeline not in PIPELINES:
        raise scenario.error('scenario', 'pipeline', f"unknown pipeline '{scenario.pipeline}'")
    return scenario


def gallery_scenario(name: str) -> Scenario:
    """The built-in scenario of the given name."""
    if name not in GALLERY:
        raise UnknownScenario(f"No gallery scenario named '{name}'")
    return parse_scenario(GALLERY[name][1], source=f"gallery:{name}")


def load_scenario(path: str) -> Scenario:
    """Scenario from a file path, falling back to a gallery name."""
    if FileHandler.validate_file_exists(path):
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
        return parse_scenario(text, source=path, directory=os.path.dirname(os.path.abspath(path)))
    if path in GALLERY:
        return gallery_scenario(path)
    raise UnknownScenario(f"No scenario file or gallery entry named '{path}'")


# =============================================================================
# BUILDERS
# =============================================================================

_BASE_FIELDS = {'sft': 'transition', 'torus': 'matrix', 'perturbed': 'matrix', 'planted': 'matrix', 'skew': 'epsilon'}


def _trig_polynomial(scenario: Scenario, section: str, key: str, dimension: int) -> TrigPolynomial:
    terms = scenario.get_literal(section, key, [])
    try:
        return TrigPolynomial(dimension, terms)
    except (TypeError, ValueError, IndexError) as e:
        raise scenario.error(section, key, f"expected rows (k, sine, cosine) of length {dimension}: {e}")


def build_base(scenario: Scenario):
    """Base system described by the [base] section."""
    kind = scenario.get('base', 'kind').strip()
    if kind not in _BASE_FIELDS:
        raise scenario.error('base', 'kind', f"unknown base kind '{kind}'")
    try:
        if kind == 'sft':
            return SftBase(scenario.get_matrix('base', 'transition'), scenario.get_float('base', 'nu', 0.5))
        if kind == 'skew':
            return skew_product_map(scenario.get_float('base', 'epsilon'))
        L = ToralAutomorphism(scenario.get_matrix('base', 'matrix'))
        if kind == 'torus':
            return L
        terms = _trig_polynomial(scenario, 'base', 'terms', L.dimension)
        if kind == 'planted':
            return PlantedConjugateMap(L, terms)
        return PerturbedToralMap(L, terms.scaled(scenario.get_float('base', 'scale', 1.0)))
    except ValueError as e:
        raise scenario.error('base', _BASE_FIELDS[kind], str(e))
    except OutsideConeBound as e:
        raise scenario.error('base', 'terms', str(e))


def _require_sft(scenario: Scenario, base) -> SftBase:
    if not isinstance(base, SftBase):
        raise scenario.error('base', 'kind', f"pipeline '{scenario.pipeline}' runs over a subshift")
    return base


def _require_toral(scenario: Scenario, base):
    if isinstance(base, SftBase):
        raise scenario.error('base', 'kind', f"pipeline '{scenario.pipeline}' runs over a torus map")
    return base


def build_cocycle(scenario: Scenario, base) -> CocycleSpec:
    """Cocycle described by the [cocycle] section."""
    section = 'cocycle'
    kind = scenario.get(section, 'kind').strip()
    beta = scenario.get_float(section, 'beta', 1.0)
    if kind == 'constant':
        generator, key = ConstantGenerator(scenario.get_matrix(section, 'matrix')), 'matrix'
    elif kind == 'locally_constant':
        generator = LocallyConstantGenerator(scenario.get_table(section, 'table'), scenario.get_window(section, 'window'))
        key = 'table'
    elif kind == 'tail':
        kappa = scenario.get_float(section, 'kappa', None)
        if kappa is None:
            kappa = _require_sft(scenario, base).nu ** beta
        past = {w[0]: M for w, M in scenario.get_table(section, 'past').items()} if scenario.has(section, 'past') else None
        future = ({w[0]: M for w, M in scenario.get_table(section, 'future').items()}
                  if scenario.has(section, 'future') else None)
        try:
            generator = TailGenerator(scenario.get_table(section, 'core'), kappa, past, future,
                                      scenario.get_window(section, 'window', (-1, 0)))
        except ValueError as e:
            raise scenario.error(section, 'kappa', str(e))
        key = 'core'
    elif kind == 'coboundary':
        transfer = LocallyConstantGenerator(scenario.get_table(section, 'transfer'),
                                            scenario.get_window(section, 'transfer_window'))
        generator, key = CoboundaryGenerator(ConstantGenerator(scenario.get_matrix(section, 'target')), transfer), 'transfer'
    elif kind == 'perturbed_constant':
        center = scenario.get_matrix(section, 'matrix')
        scale = scenario.get_float(section, 'scale', 1.0)
        table = {w: center + scale * P for w, P in scenario.get_table(section, 'perturbation').items()}
        generator, key = LocallyConstantGenerator(table, (0, 0)), 'perturbation'
    elif kind == 'derivative':
        generator, key = DerivativeGenerator(_require_toral(scenario, base)), 'kind'
    else:
        raise scenario.error(section, 'kind', f"unknown cocycle kind '{kind}'")
    try:
        return CocycleSpec(base, generator, hoelder_exponent=beta, name=scenario.name)
    except ValueError as e:
        raise scenario.error(section, key, str(e))


def build_unipotent_family(scenario: Scenario, base: SftBase) -> UnipotentFamily:
    section = 'cocycle'
    if scenario.get(section, 'kind').strip() != 'unipotent':
        raise scenario.error(section, 'kind', "expected a unipotent cocycle")
    raw = scenario.get_literal(section, 'alpha')
    if not isinstance(raw, dict):
        raise scenario.error(section, 'alpha', "expected a {word: value} table")
    window = scenario.get_window(section, 'window')
    alpha = {_word(w): float(v) for w, v in raw.items()}
    missing = [w for w in base.admissible_words(window[1] - window[0] + 1) if w not in alpha]
    if missing:
        raise scenario.error(section, 'alpha', f"missing admissible windows {missing[:5]}")
    return UnipotentFamily(base, alpha, scenario.get_float(section, 'target'), window)


# =============================================================================
# REPORTS
# =============================================================================

_RELATIONS = {
    '<': lambda a, b: a < b,
    '<=': lambda a, b: a <= b,
    '>=': lambda a, b: a >= b,
    '==': lambda a, b: a == b,
}


@dataclass
class Check:
    name: str
    passed: bool
    value: Any
    threshold: Any = None
    relation: str = '<'
    detail: str = ""


@dataclass
class Report:
    """Scenario echo, results, certificates and checks; timings go to a side file."""
    scenario: Dict[str, Any]
    budget_seconds: float
    results: Dict[str, Any] = field(default_factory=dict)
    certificates: Dict[str, Any] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)
    files: List[str] = field(default_factory=list)
    timings: List[Tuple[str, float]] = field(default_factory=list)
    path: Optional[str] = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, name: str, value: Any, threshold: Any = None, relation: str = '<',
              passed: Optional[bool] = None, detail: str = "") -> Check:
        if passed is None:
            passed = _RELATIONS[relation](value, threshold)
        entry = Check(name, bool(passed), value, threshold, relation, detail)
        self.checks.append(entry)
        if config.verbose_logging:
            print(f"{'✓' if entry.passed else '❌'} {name}: {value} ({relation} {threshold})")
        return entry

    def failed_checks(self) -> List[Check]:
        return [check for check in self.checks if not check.passed]

    def to_document(self) -> Dict[str, Any]:
        return ReportFormatter.to_jsonable({
            'schema': SCHEMA,
            'scenario': self.scenario,
            'budget_seconds': self.budget_seconds,
            'results': self.results,
            'certificates': self.certificates,
            'checks': self.checks,
            'passed': self.passed,
            'files': self.files,
        })


class ArtifactWriter:
    """Writes side files next to the report and lists them in it."""

    def __init__(self, out_dir: str, name: str, report: Report):
        self.out_dir = out_dir
        self.name = name
        self.report = report

    def path(self, suffix: str) -> str:
        return FileHandler.generate_output_filename(self.name, self.out_dir, suffix)

    def table(self, label: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
        path = self.path(f".{label}.csv")
        FileHandler.save_csv(path, header, rows)
        self.report.files.append(os.path.basename(path))
        return path

    def json(self, label: str, document: Dict[str, Any]) -> str:
        path = self.path(f".{label}.json")
        FileHandler.save_json(path, document)
        self.report.files.append(os.path.basename(path))
        return path


# =============================================================================
# SHARED STEPS
# =============================================================================

def _fixed_point(symbol: int) -> SymbolicPoint:
    return SymbolicPoint((symbol,), (), (symbol,), 0)


def _closing_orbits(base: SftBase, rng: np.random.Generator, count: int, period: int) -> List[PeriodicOrbit]:
    """Periodic orbits closing random admissible segments of the given length."""
    orbits = []
    for _ in range(1000 * count):
        if len(orbits) == count:
            break
        word = base.random_word(rng, period)
        if base.allowed(word[-1], word[0]):
            orbit, _ = anosov_closing(base, base.cylinder_point(word + (word[0],)), period)
            orbits.append(orbit)
    return orbits


def determinant_residual(A: CocycleSpec, x, n: int) -> float:
    """|log|det A^n_x| - sum_k log|det A_{f^k x}||, relative to the sum."""
    _, total = np.linalg.slogdet(A.iterate(x, n, condition_cap=None))
    steps = 0.0
    point = x
    for _ in range(n):
        steps += np.linalg.slogdet(A.value(point))[1]
        point = A.base.forward(point)
    return float(abs(total - steps) / max(1.0, abs(steps)))


def _lyapunov_consistency(scenario: Scenario, A: CocycleSpec, base: SftBase, rng: np.random.Generator,
                          report: Report) -> None:
    period = scenario.get_int('pipeline', 'closing_period', 10)
    steps = scenario.get_int('pipeline', 'lyapunov_steps', 400)
    count = scenario.get_int('pipeline', 'closing_orbits', 3)
    with stage_timer.track('lyapunov-consistency'):
        orbits = _closing_orbits(base, rng, count, period)
        checks = [periodic_approximation_check(A, orbit.point, steps, [orbit]) for orbit in orbits]
        gap = max(check.gap for check in checks)
        report.results['closing_orbits'] = [orbit.label() for orbit in orbits]
        report.results['lyapunov_exponents'] = [list(check.generic) for check in checks]
        report.check('periodic vs Lyapunov exponents', gap, 5e-3)

        n = scenario.get_int('pipeline', 'determinant_steps', 50)
        residual = max(determinant_residual(A, x, n) for x in sample_points(base, rng, 4))
        report.check('determinant telescoping', residual, 1e-9)


# =============================================================================
# PIPELINES
# =============================================================================

HOLONOMY_HEADER = ['source', 'target', 'direction', 'depth', 'error_bound', 'deviation']


def run_sft_holonomy(scenario: Scenario, rng: np.random.Generator, report: Report, writer: ArtifactWriter) -> None:
    """Certified stable holonomies, truncation control and the Hoelder fit."""
    base = _require_sft(scenario, build_base(scenario))
    A = build_cocycle(scenario, base)
    p = 'pipeline'
    beta = A.hoelder_exponent

    with stage_timer.track('bunching'):
        certificate = bunching_margin(A, beta, scenario.get_int(p, 'horizon', 24), sample_points(base, rng, 8))
    report.certificates['bunching'] = certificate
    report.check('bunching theta', certificate.theta, scenario.get_float(p, 'max_theta', 0.6), '<=')
    if not certificate.valid:
        return

    deepest = scenario.get_int(p, 'deepest', 13)
    with stage_timer.track('holonomy-table'):
        pairs = []
        for x in sample_points(base, rng, scenario.get_int(p, 'points', 5)):
            pairs.extend(flipped_pairs(base, x, range(-2, -deepest - 1, -1)))
        table = holonomy_table(A, pairs, STABLE, certificate)
    writer.table('holonomy', HOLONOMY_HEADER, [H.csv_row() for H in table])
    report.check('holonomy pairs', len(pairs), scenario.get_int(p, 'min_pairs', 50), '>=')
    report.results['max_equivariance_residual'] = max(equivariance_residual(A, H) for H in table[:16])

    n = scenario.get_int(p, 'truncation', 6)
    with stage_timer.track('truncation'):
        gaps = parallel_map(lambda pair: float(np.linalg.norm(
            truncated_holonomy(A, pair[0], pair[1], n, STABLE)
            - truncated_holonomy(A, pair[0], pair[1], 2 * n, STABLE), 2)), pairs)
    report.check(f'truncation {n} vs {2 * n}', max(gaps), certificate.constant * certificate.theta ** n)

    fit = holder_fit([(H.distance, H.deviation()) for H in table])
    kappa = A.generator.kappa if isinstance(A.generator, TailGenerator) else base.nu ** beta
    expected = math.log(kappa) / math.log(base.nu)
    report.results['holder_fit'] = fit
    report.check('hoelder exponent', fit.beta, expected, passed=abs(fit.beta - expected) <= 0.1 * expected,
                 detail="within 10% of the generator decay exponent")


def _planted_parts(scenario: Scenario, A: CocycleSpec):
    generator = A.generator
    if not isinstance(generator, CoboundaryGenerator) or not isinstance(generator.inner, ConstantGenerator):
        raise scenario.error('cocycle', 'kind', "a coboundary cocycle over a constant target is required")
    return generator.inner.value, (lambda x: generator.transfer.matrix(x, A.base))


def run_planted_coboundary(scenario: Scenario, rng: np.random.Generator, report: Report,
                           writer: ArtifactWriter) -> None:
    """Recover a planted transfer map from holonomies at a fixed point."""
    base = _require_sft(scenario, build_base(scenario))
    A = build_cocycle(scenario, base)
    B, planted = _planted_parts(scenario, A)
    p = 'pipeline'
    q = _fixed_point(scenario.get_int(p, 'anchor', 0))

    with stage_timer.track('transfer-map'):
        C = build_transfer_fixed_point(A, B, q, scenario.get_int(p, 'depth', 8),
                                       limit=scenario.get_int(p, 'limit', 512))
    samples = [x for x, _ in C.sample_items()]
    report.results['homoclinic_points'] = len(samples)
    report.certificates['transfer_hoelder'] = C.certificate
    report.check('homoclinic points', len(samples), 100, '>=')
    report.check('agreement with planted transfer map', agreement_with_samples(C, planted, samples), 1e-6)
    report.check('conjugacy residual', C.conjugacy_residual, 1e-8)
    report.check('homoclinic identity', C.homoclinic_residual, 1e-6)
    writer.json('transfer', ReportFormatter.transfer_map_document(C))

    with stage_timer.track('homoclinic-consistency'):
        times = recurrence_times(B, scenario.get_int(p, 'recurrence_max', 20))
        shallow = [x for x in samples if 0 < max(abs(x.lo), abs(x.hi)) < max(times)]
        consistency = parallel_map(lambda x: homoclinic_consistency(A, x, q, times),
                                   shallow[:scenario.get_int(p, 'consistency_points', 8)])
    report.results['recurrence_times'] = times
    report.check('homoclinic consistency', max(c.value for c in consistency), 1e-8)
    report.check('closing orbit consistency', max(c.periodic_value for c in consistency), 1e-8)

    with stage_timer.track('invariant-metric'):
        metric = invariant_metric_from_transfer(C)
        report.check('invariant metric isometry', metric.isometry_residual(A, samples[:32]), 1e-8)

    with stage_timer.track('periodic-data-pipeline'):
        P = scenario.get_matrix(p, 'conjugator', [[1.0, 0.3], [0.0, 1.0]])
        shifted = CocycleSpec(base, ConjugatedGenerator(A.generator, P), A.hoelder_exponent,
                              name=f"{A.name}-shifted", validate=False)
        recovered = conjugacy_from_periodic_data(shifted, B, q, scenario.get_int(p, 'pipeline_depth', 3),
                                                 limit=scenario.get_int(p, 'pipeline_limit', 128))
        report.check('periodic-data pipeline residual', recovered.conjugacy_residual, 1e-8)

    _lyapunov_consistency(scenario, A, base, rng, report)


def run_delta_narrow_splitting(scenario: Scenario, rng: np.random.Generator, report: Report,
                               writer: ArtifactWriter) -> None:
    """delta-narrow periodic data and certified dominated splittings."""
    base = _require_sft(scenario, build_base(scenario))
    A = build_cocycle(scenario, base)
    p = 'pipeline'
    if scenario.has(p, 'centers'):
        centers = [float(c) for c in scenario.get_literal(p, 'centers')]
    else:
        center = scenario.get_matrix('cocycle', 'matrix')
        centers = [math.log(abs(z)) for z in np.linalg.eigvals(center)]

    with stage_timer.track('delta-narrow'):
        orbits = enumerate_periodic_orbits(base, scenario.get_int(p, 'n_max', 10))
        narrow = delta_narrow_radius(A, orbits, centers)
    report.results['periodic_orbits'] = len(orbits)
    report.results['delta_witness'] = narrow.witness.label()
    report.check('delta-narrow radius', narrow.delta, scenario.get_float(p, 'max_delta', 0.05), '<=')

    samples = sample_points(base, rng, scenario.get_int(p, 'samples', 8))
    horizon = scenario.get_int(p, 'horizon', 20)
    max_tau = scenario.get_float(p, 'max_tau', 0.3)
    with stage_timer.track('dominated-splittings'):
        for k in range(1, A.dimension):
            try:
                S = dominated_splitting(A, k, samples, horizon)
            except NoDomination as e:
                report.check(f'domination index {k}', math.inf, max_tau, '<=', detail=str(e))
                continue
            report.certificates[f'domination_{k}'] = {'K': S.K, 'tau': S.tau,
                                                      'invariance_residual': S.invariance_residual}
            report.check(f'domination index {k}', S.tau, max_tau, '<=')
            report.check(f'invariance index {k}', S.invariance_residual, config.invariance_tol, '<=')

    with stage_timer.track('lyapunov-splitting'):
        try:
            S = lyapunov_splitting(A, samples, horizon)
        except NoDomination as e:
            report.results['lyapunov_splitting'] = str(e)
        else:
            report.results['lyapunov_blocks'] = list(S.dimensions)
            report.results['block_consistency'] = max(block_consistency_residual(A, S, i, samples[0], 10)
                                                      for i in range(len(S.dimensions)))
            header = ['point', 'block', 'column'] + [f'e{i + 1}' for i in range(A.dimension)]
            writer.table('splitting', header, ReportFormatter.splitting_rows(S, samples[:4]))

    _lyapunov_consistency(scenario, A, base, rng, report)


def run_unipotent_criterion(scenario: Scenario, rng: np.random.Generator, report: Report,
                            writer: ArtifactWriter) -> None:
    """Periodic conjugacy criterion of the unipotent family against an exhaustive similarity oracle."""
    base = _require_sft(scenario, build_base(scenario))
    family = build_unipotent_family(scenario, base)
    p = 'pipeline'
    orbits = enumerate_periodic_orbits(base, scenario.get_int(p, 'n_max', 10))
    with stage_timer.track('criterion'):
        result = unipotent_periodic_criterion(family, orbits)
    writer.table('orbits', ['orbit', 'period', 'birkhoff_sum', 'target'], result.rows)

    with stage_timer.track('oracle'):
        A, B = family.cocycle(), family.target()
        mismatches = []
        for orbit, (label, _, S, target) in zip(orbits, result.rows):
            similar = are_similar(A.iterate(orbit.point, orbit.period, condition_cap=None),
                                  B.iterate(orbit.point, orbit.period, condition_cap=None))
            verdict = (abs(S) <= 1e-12) == (abs(target) <= 1e-12)
            if similar != verdict:
                mismatches.append(label)

    x = sample_points(base, rng, 1)[0]
    _, slope = coboundary_divergence(family, x, scenario.get_int(p, 'divergence_steps', 4096))
    report.results['periodic_orbits'] = len(orbits)
    report.results['witness'] = result.witness.label() if result.witness is not None else None
    report.results['coboundary_growth_slope'] = slope
    report.check('periodic data conjugate', result.conjugate, True, '==',
                 detail="" if result.conjugate else f"witness orbit {result.witness.label()}")
    if result.conjugate:
        report.check('ratio bound', result.ratio_bound, scenario.get_float(p, 'max_ratio', 3.0))
    report.check('oracle agreement', len(mismatches), 0, '==', detail=", ".join(mismatches[:5]))


def run_coprime_combine(scenario: Scenario, rng: np.random.Generator, report: Report,
                        writer: ArtifactWriter) -> None:
    """Combine conjugacies over coprime powers and reject a conjugacy valid only over f^K."""
    base = _require_sft(scenario, build_base(scenario))
    A = build_cocycle(scenario, base)
    B, planted = _planted_parts(scenario, A)
    p = 'pipeline'
    N, M, K = (scenario.get_int(p, key) for key in ('n', 'm', 'k'))
    q = _fixed_point(scenario.get_int(p, 'anchor', 0))
    samples = sample_points(base, rng, scenario.get_int(p, 'samples', 32))
    C = TransferMap.from_function(planted, anchor=q)

    with stage_timer.track('combine'):
        combined = combine_coprime(A, B, C, C, N, M, K, samples)
    report.results['combination'] = combined
    if scenario.has(p, 'bezout'):
        expected = tuple(scenario.get_literal(p, 'bezout'))
        report.check('bezout coefficients', [combined.r, combined.s], list(expected), '==')
    report.check('period-one residual', combined.residual, 1e-8)
    power_residual = verify_conjugacy(power_cocycle(A, K), np.linalg.matrix_power(B, K), C, samples)
    report.check(f'residual over f^{K}', power_residual, 1e-8)

    with stage_timer.track('negative-control'):
        target = scenario.get_matrix(p, 'negative_target', 'rotation(1/3)')
        distortion = scenario.get_matrix(p, 'negative_distortion', 'diag(2, 1)')
        negative = CocycleSpec(base, CoboundaryGenerator(ConstantGenerator(target), A.generator.transfer),
                               A.hoelder_exponent, name=f"{A.name}-negative")
        twisted = TransferMap.from_function(lambda x: planted(x) @ distortion, anchor=q)
        report.results['negative_power_residual'] = verify_conjugacy(
            power_cocycle(negative, K), np.linalg.matrix_power(target, K), twisted, samples)
        try:
            combine_coprime(negative, target, twisted, twisted, N, M, K, samples)
            rejected, detail = False, "accepted a conjugacy that fails over f"
        except CombineFailed as e:
            rejected, detail = True, f"period-one residual {e.residual:.3g}"
    report.check('negative control rejected', rejected, True, '==', detail=detail)


def run_catmap_rigidity(scenario: Scenario, rng: np.random.Generator, report: Report,
                        writer: ArtifactWriter) -> None:
    """Franks-Manning conjugacies, derivative transfer and translation isometries."""
    f = _require_toral(scenario, build_base(scenario))
    p = 'pipeline'
    with stage_timer.track('franks-manning'):
        h = franks_manning(f, scenario.get_int(p, 'grid', 256), rng=rng)
    report.results['series_terms'] = h.terms
    report.results['refined_residual'] = h.refined_residual
    report.results['normalization'] = h.normalization
    fit = h.regularity(rng)
    report.results['regularity_beta'] = fit.beta if fit is not None else None
    report.check('functional-equation residual', h.residual, 1e-9)

    planted = PlantedConjugateMap(f.linear_part, _trig_polynomial(scenario, p, 'planted_terms', f.dimension))
    with stage_timer.track('planted-conjugacy'):
        h_planted = franks_manning(planted, scenario.get_int(p, 'planted_grid', 64), rng=rng)
        error = h_planted.sup_error(planted.conjugacy, h_planted.grid)
    report.check('planted conjugacy sup error', error, 1e-6)

    with stage_timer.track('derivative-transfer'):
        derivative = derivative_transfer(h_planted)
    report.results['derivative_ladder'] = derivative.ladder
    report.results['derivative_ladder_converged'] = derivative.converged
    report.check('derivative transfer residual', derivative.residual, 1e-5)

    with stage_timer.track('translation-conjugates'):
        v = scenario.get_literal(p, 'translation', [0.3, 0.1])
        points = rng.random((scenario.get_int(p, 'translation_points', 4), f.dimension))
        conjugates = translation_conjugates(h_planted, v, points)
        residual = metric_isometry_residual(conjugates, pushed_metric(h_planted))
    report.check('translation isometry residual', residual, 1e-5)


BUNCHING_EXAMPLES = [
    ('bunched', RateTriple(nu=0.2, gamma=0.9, gamma_hat=1.05), 0.5, True),
    ('unbunched', RateTriple(nu=0.2, gamma=0.9, gamma_hat=1.2), 0.5, False),
]


def run_linearization_demo(scenario: Scenario, rng: np.random.Generator, report: Report,
                           writer: ArtifactWriter) -> None:
    """Leaf charts, foliation holonomy and the holonomy-derivative ladder."""
    f = _require_toral(scenario, build_base(scenario))
    p = 'pipeline'
    x = np.asarray(scenario.get_literal(p, 'point', [0.21, 0.37]), dtype=float) % 1.0
    R = scenario.get_float(p, 'radius', 0.05)

    with stage_timer.track('linearization'):
        for leaf in (UNSTABLE, STABLE):
            chart = nonstationary_linearization(f, x, leaf, R)
            report.results[f'{leaf}_multiplier'] = chart.multiplier
            report.check(f'{leaf} chart residual', chart.residual, 1e-7)
            report.check(f'{leaf} chart derivative', chart.derivative_error, 1e-6)
            report.check(f'{leaf} chart uniqueness', chart.uniqueness, chart.certificate, '<=')

    with stage_timer.track('foliation-holonomy'):
        offset = np.asarray(scenario.get_literal(p, 'offset', [0.01, 0.004]), dtype=float)
        y = f.local_product(x, (x + offset) % 1.0)
        radius = scenario.get_float(p, 'holonomy_radius', 0.02)
        leaf_map = foliation_holonomy(f, x, y, R=radius)
        rerun = foliation_holonomy(f, x, y, R=radius, tol=config.leaf_tol / 2.0)
        spread = float(np.max(np.abs(leaf_map.targets - rerun.targets)))
    report.results['holonomy_targets'] = leaf_map.targets
    report.check('foliation holonomy stability', spread, leaf_map.accuracy, '<=')

    with stage_timer.track('holonomy-derivative'):
        derivative = holonomy_derivative_check(f, x, y)
    report.results['derivative_deviations'] = derivative.deviations
    report.results['cocycle_holonomy'] = derivative.cocycle_holonomy
    report.check('holonomy derivative ladder', derivative.deviations[-1], 1e-3, passed=derivative.passed)

    for label, rates, beta, expected in BUNCHING_EXAMPLES:
        result = bunching_check(rates, beta)
        report.results[f'bunching_{label}'] = [result.first, result.second]
        report.check(f'bunching example {label}', result.holds, expected, '==')
    report.results['bunching_map'] = bunching_check(f.rates, 1.0)


def run_t4_skew(scenario: Scenario, rng: np.random.Generator, report: Report, writer: ArtifactWriter) -> None:
    """Periodic spectra of the skew product and the failed derivative transfer."""
    f = _require_toral(scenario, build_base(scenario))
    p = 'pipeline'
    epsilon = scenario.get_float('base', 'epsilon')
    n_max = scenario.get_int(p, 'n_max', 6)

    with stage_timer.track('periodic-spectra'):
        demo = t4_skew_periodic_demo(epsilon, n_max)
        flat = t4_skew_periodic_demo(0.0, min(n_max, 4))
    writer.table('spectra', ['period', 'points', 'relative_error', 'conjugator_condition'], demo.rows)
    report.results['points_checked'] = demo.points_checked
    report.check('periodic eigenvalues', demo.max_relative_error, 1e-8)
    report.check('unperturbed periodic eigenvalues', flat.max_relative_error, 1e-12)
    report.check('weak irreducibility of the linear part', demo.weakly_irreducible, False, '==')

    with stage_timer.track('derivative-transfer'):
        try:
            h = franks_manning(f, scenario.get_int(p, 'grid', 3), rng=rng)
        except NotContracting as e:
            report.results['franks_manning'] = str(e)
        else:
            derivative = derivative_transfer(h, points=list(rng.random((2, f.dimension))))
            report.results['franks_manning_residual'] = h.residual
            report.results['derivative_ladder'] = derivative.ladder
            report.results['derivative_ladder_converged'] = derivative.converged
            report.check('derivative ladder diverges', derivative.converged, False, '==')


def run_weak_irreducibility(scenario: Scenario, rng: np.random.Generator, report: Report,
                            writer: ArtifactWriter) -> None:
    """Weak irreducibility of each ``matrix.<case>`` against ``expect.<case>``."""
    p = 'pipeline'
    cases = sorted(key[len('matrix.'):] for key in scenario.sections.get(p, {}) if key.startswith('matrix.'))
    if not cases:
        raise ConfigError("no matrix.<case> fields", p)
    for case in cases:
        try:
            L = ToralAutomorphism(scenario.get_matrix(p, f'matrix.{case}'))
        except ValueError as e:
            raise scenario.error(p, f'matrix.{case}', str(e))
        result = weak_irreducibility_check(L)
        report.results[case] = [factor.polynomial for factor in result.factors]
        report.check(f'weak irreducibility {case}', result.weakly_irreducible,
                     scenario.get_bool(p, f'expect.{case}'), '==')


PIPELINES: Dict[str, Callable[[Scenario, np.random.Generator, Report, ArtifactWriter], None]] = {
    'sft-holonomy': run_sft_holonomy,
    'planted-coboundary': run_planted_coboundary,
    'delta-narrow-splitting': run_delta_narrow_splitting,
    'unipotent-criterion': run_unipotent_criterion,
    'coprime-combine': run_coprime_combine,
    'catmap-rigidity': run_catmap_rigidity,
    'linearization-demo': run_linearization_demo,
    't4-skew': run_t4_skew,
    'weak-irreducibility': run_weak_irreducibility,
}


# =============================================================================
# RUNNER
# =============================================================================

def run_scenario(path, out_dir: Optional[str] = None, seed: Optional[int] = None) -> Report:
    """
    Execute a scenario and write its JSON report and CSV side files.

    Args:
        path: Scenario file, gallery name or parsed Scenario
        out_dir: Output directory (defaults to the configured one)
        seed: Seed overriding the scenario's own

    Returns:
        Report whose checks all passed

    Raises:
        ConfigError: If the scenario is malformed
        UnknownScenario: If path is neither a file nor a gallery name
        CheckFailed: If a check fails (the report is still written)
    """
    scenario = path if isinstance(path, Scenario) else load_scenario(path)
    effective_seed = scenario.seed if seed is None else seed
    config.override(seed=effective_seed)
    out_dir = out_dir or config.output_directory
    FileHandler.ensure_directory(out_dir)

    report = Report(scenario.echo(effective_seed), scenario.budget)
    writer = ArtifactWriter(out_dir, scenario.name, report)
    rng = np.random.default_rng(effective_seed)
    if config.verbose_logging:
        print(f"🔄 Running scenario {scenario.name} ({scenario.pipeline}, seed {effective_seed})")

    stage_timer.reset()
    PIPELINES[scenario.pipeline](scenario, rng, report, writer)
    report.timings = stage_timer.rows()
    elapsed = stage_timer.total()
    if elapsed > scenario.budget:
        print(f"⚠️  Scenario {scenario.name} took {elapsed:.1f}s, over its {scenario.budget:.0f}s budget")

    timing_path = writer.path(".timings.csv")
    report.files.append(os.path.basename(timing_path))
    FileHandler.save_csv(timing_path, ['stage', 'seconds'], report.timings + [('total', elapsed)])
    report.path = writer.path(".json")
    FileHandler.save_json(report.path, report.to_document())
    if config.verbose_logging:
        print(f"💾 Report saved to {report.path}")

    if not report.passed:
        names = ", ".join(check.name for check in report.failed_checks())
        raise CheckFailed(f"Scenario {scenario.name} failed checks: {names}", report.path, report)
    return report
