"""Tests for report, table and matrix file handling."""

import math
from fractions import Fraction

import numpy as np
import pytest

from src.base import SymbolicPoint
from src.file_handler import FileHandler, ReportFormatter


def test_matrix_file_round_trip(tmp_path):
    M = np.array([[2.0, 1.0], [1.0, 1.0 / 3.0]])
    path = tmp_path / "m.txt"
    FileHandler.save_text_file(str(path), "# cat map\n" + FileHandler.format_matrix(M))
    np.testing.assert_array_equal(FileHandler.read_matrix_file(str(path)), M)


@pytest.mark.parametrize("content, fragment", [
    ("1 2\n3\n", ":2:"),
    ("1 x\n", "non-numeric"),
    ("# nothing\n", "no matrix rows"),
])
def test_read_matrix_file_rejects_bad_input(tmp_path, content, fragment):
    path = tmp_path / "bad.txt"
    path.write_text(content)
    with pytest.raises(ValueError, match=fragment):
        FileHandler.read_matrix_file(str(path))


def test_save_json_is_sorted_and_strict(tmp_path):
    path = tmp_path / "r.json"
    FileHandler.save_json(str(path), {'b': np.float64(1.5), 'a': [np.int64(2), math.inf]})
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert FileHandler.load_json(str(path)) == {'a': [2, 'inf'], 'b': 1.5}
    assert text.endswith("\n")


def test_to_jsonable_converts_domain_values():
    point = SymbolicPoint((0,), (1,), (0,), 0)
    converted = ReportFormatter.to_jsonable({
        'point': point,
        'fraction': Fraction(2, 5),
        'array': np.eye(2),
        'flag': np.bool_(True),
        'nan': float('nan'),
    })
    assert converted == {
        'point': point.to_text(),
        'fraction': "2/5",
        'array': [[1.0, 0.0], [0.0, 1.0]],
        'flag': True,
        'nan': "nan",
    }


def test_csv_cells_use_full_precision(tmp_path):
    path = tmp_path / "t.csv"
    FileHandler.save_csv(str(path), ['value', 'point'], [[0.1, (Fraction(1, 3), Fraction(0))]])
    lines = path.read_text().splitlines()
    assert lines[0] == "value,point"
    assert lines[1] == "0.10000000000000001,1/3 0/1"


def test_pretty_lines_mark_failed_checks():
    report = {
        'schema': 'periodic-rigidity-report/1',
        'scenario': {'name': 'demo'},
        'checks': [{'name': 'residual', 'passed': False, 'value': 0.5, 'threshold': 0.1, 'detail': ''}],
        'results': {'orbits': [1, 2, 3]},
        'files': ['demo.json'],
        'passed': False,
    }
    lines = ReportFormatter.pretty_lines(report)
    assert any(line.startswith("✗ residual") for line in lines)
    assert "  orbits: <list of 3>" in lines
    assert lines[-1] == "\nOverall: FAILED"
