"""Tests for scenario parsing, the gallery and report writing."""

import json
import os

import numpy as np
import pytest

from src.base import PeriodicOrbit, SymbolicPoint
from src.config import config
from src.gallery import GALLERY, list_gallery
from src.scenario import (PIPELINES, SCHEMA, CheckFailed, ConfigError, Report, UnknownScenario, build_base,
                          build_cocycle, load_scenario, parse_matrix, parse_scenario, rotation_matrix, run_scenario)

BROKEN_TRANSITION = """[scenario]
name = broken
pipeline = unipotent-criterion

[base]
kind = sft
transition = [[1, 1], [1]]
"""

FILE_MATRIX = """[scenario]
name = from-file
pipeline = weak-irreducibility
budget = 5

[pipeline]
matrix.cat = @cat.txt
expect.cat = true
"""


LARGE_PERTURBATION = """[scenario]
name = large
pipeline = linearization-demo

[base]
kind = perturbed
matrix = [[2, 1], [1, 1]]
terms = [([1, 0], [0.1, 0], [0, 0])]
"""

PASSING = sorted(name for name in GALLERY if name != "unipotent-negative")


@pytest.fixture(autouse=True)
def clean_config():
    config.reset_overrides()
    yield
    config.reset_overrides()


def read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


# =============================================================================
# Matrix values
# =============================================================================

def test_parse_rotation_with_a_fraction():
    assert np.allclose(parse_matrix("rotation(1/4)"), [[0.0, -1.0], [1.0, 0.0]])
    assert np.allclose(parse_matrix("rotation(0.1)"), rotation_matrix(0.1))


def test_parse_diag_and_literal_rows():
    assert np.array_equal(parse_matrix("diag(4, 1, 1/4)"), np.diag([4.0, 1.0, 0.25]))
    assert np.array_equal(parse_matrix("[[2, 1], [1, 1]]"), np.array([[2.0, 1.0], [1.0, 1.0]]))
    assert parse_matrix([[1, 2, 3]], square=False).shape == (1, 3)


@pytest.mark.parametrize("text, message", [
    ("[[1, 1], [1]]", "row 2"),
    ("[[1, 'a'], [1, 1]]", "non-numeric"),
    ("[[1, 2, 3], [4, 5, 6]]", "square"),
    ("[]", "nonempty"),
    ("[[1, 2", "cannot read"),
])
def test_parse_matrix_errors(text, message):
    with pytest.raises(ValueError, match=message):
        parse_matrix(text)


# =============================================================================
# Scenario files
# =============================================================================

def test_malformed_matrix_names_section_field_and_line():
    scenario = parse_scenario(BROKEN_TRANSITION)
    with pytest.raises(ConfigError) as info:
        build_base(scenario)
    error = info.value
    assert (error.section, error.field, error.line) == ('base', 'transition', 7)
    assert str(error).startswith("[base] transition (line 7): ")
    assert "row 2" in str(error)


def test_duplicate_field_is_reported_with_its_line():
    text = BROKEN_TRANSITION.replace("kind = sft", "kind = sft\nkind = sft")
    with pytest.raises(ConfigError) as info:
        parse_scenario(text)
    assert info.value.section == 'base'
    assert info.value.field == 'kind'
    assert info.value.line == 7


def test_unknown_pipeline():
    with pytest.raises(ConfigError) as info:
        parse_scenario(BROKEN_TRANSITION.replace("unipotent-criterion", "no-such-pipeline"))
    assert info.value.field == 'pipeline'
    assert info.value.line == 3


def test_missing_required_field():
    with pytest.raises(ConfigError, match="missing required field"):
        parse_scenario("[scenario]\npipeline = t4-skew\n")


def test_defaults_and_echo():
    scenario = parse_scenario(BROKEN_TRANSITION)
    assert scenario.seed == 0
    assert scenario.budget == 60.0
    echo = scenario.echo(5)
    assert echo['seed'] == 5
    assert 'scenario' not in echo['sections']
    assert echo['sections']['base']['kind'] == 'sft'


def test_perturbation_outside_the_cone_bound():
    scenario = parse_scenario(LARGE_PERTURBATION)
    with pytest.raises(ConfigError) as info:
        build_base(scenario)
    assert (info.value.section, info.value.field) == ('base', 'terms')
    assert "cone" in str(info.value)


def test_unknown_scenario_name():
    with pytest.raises(UnknownScenario):
        load_scenario("no-such-scenario")


def test_matrix_from_a_side_file(tmp_path):
    (tmp_path / "cat.txt").write_text("# cat map\n2 1\n1 1\n", encoding='utf-8')
    path = tmp_path / "from-file.ini"
    path.write_text(FILE_MATRIX, encoding='utf-8')
    report = run_scenario(str(path), out_dir=str(tmp_path / "out"))
    assert report.passed
    assert os.path.exists(tmp_path / "out" / "from-file.json")


def test_missing_side_file(tmp_path):
    path = tmp_path / "from-file.ini"
    path.write_text(FILE_MATRIX, encoding='utf-8')
    with pytest.raises(ConfigError) as info:
        run_scenario(str(path), out_dir=str(tmp_path / "out"))
    assert info.value.field == 'matrix.cat'


def test_cocycle_builder_reads_tables():
    scenario = load_scenario("planted-coboundary")
    A = build_cocycle(scenario, build_base(scenario))
    q = SymbolicPoint((0,), (), (0,), 0)
    assert A.dimension == 2
    assert np.allclose(A.value(q), rotation_matrix(0.2))


# =============================================================================
# Gallery runs
# =============================================================================

def test_gallery_listing():
    entries = list_gallery()
    names = [name for name, _ in entries]
    assert len(entries) >= 9
    assert names == sorted(names)
    for name, (_, text) in GALLERY.items():
        assert parse_scenario(text).pipeline in PIPELINES


@pytest.mark.slow
@pytest.mark.parametrize("name", PASSING)
def test_gallery_scenarios_pass(tmp_path, name):
    report = run_scenario(name, out_dir=str(tmp_path))
    assert isinstance(report, Report)
    assert report.passed
    with open(report.path, 'r', encoding='utf-8') as f:
        document = json.load(f)
    assert document['schema'] == SCHEMA
    assert document['passed'] is True
    assert 'timings' not in document
    for file_name in document['files']:
        assert os.path.exists(tmp_path / file_name)
    assert f"{name}.timings.csv" in document['files']


def test_planted_coboundary_recurrences(tmp_path):
    report = run_scenario("planted-coboundary", out_dir=str(tmp_path))
    checks = {check.name: check for check in report.checks}
    assert report.results['recurrence_times'] == [5, 10, 15, 20]
    assert checks['homoclinic consistency'].passed
    assert checks['closing orbit consistency'].passed


@pytest.mark.slow
def test_skew_product_derivative_ladder_diverges(tmp_path):
    report = run_scenario("t4-skew", out_dir=str(tmp_path))
    checks = {check.name: check for check in report.checks}
    assert checks['derivative ladder diverges'].passed
    assert not report.results['derivative_ladder_converged']


def test_coprime_combination_results(tmp_path):
    report = run_scenario("coprime-combine", out_dir=str(tmp_path))
    checks = {check.name: check for check in report.checks}
    assert checks['bezout coefficients'].value == [-1, 1]
    assert checks['negative control rejected'].passed
    assert report.results['combination'].K == 3


def test_failed_scenario_still_writes_its_report(tmp_path):
    with pytest.raises(CheckFailed) as info:
        run_scenario("unipotent-negative", out_dir=str(tmp_path))
    error = info.value
    assert os.path.exists(error.report_path)
    witness = PeriodicOrbit(SymbolicPoint((0, 1), (), (0, 1), 0), 2).label()
    assert error.report.results['witness'] == witness
    with open(error.report_path, 'r', encoding='utf-8') as f:
        document = json.load(f)
    assert document['passed'] is False
    assert document['results']['witness'] == witness


def test_seed_override_is_echoed(tmp_path):
    report = run_scenario("weak-irreducibility", out_dir=str(tmp_path), seed=42)
    assert report.scenario['seed'] == 42


@pytest.mark.slow
@pytest.mark.parametrize("name", PASSING)
def test_reports_do_not_depend_on_the_thread_count(tmp_path, name):
    config.override(threads=1)
    first = run_scenario(name, out_dir=str(tmp_path / "one"))
    config.override(threads=8)
    second = run_scenario(name, out_dir=str(tmp_path / "eight"))
    assert read_bytes(first.path) == read_bytes(second.path)
