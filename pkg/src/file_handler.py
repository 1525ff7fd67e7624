"""File handling utilities for rigidity reports, tables and matrices."""

import csv
import dataclasses
import json
import math
import os
from fractions import Fraction
from typing import Any, Dict, List, Sequence

import numpy as np

from .base import SymbolicPoint, format_torus_point


class FileHandler:
    """Handles file operations for reports, CSV side files and matrix input."""

    @staticmethod
    def generate_output_filename(name: str, out_dir: str, suffix: str = ".json") -> str:
        """Output path for a scenario artifact, e.g. ``<out_dir>/<name>.json``."""
        return os.path.join(out_dir, f"{name}{suffix}")

    @staticmethod
    def ensure_directory(path: str) -> None:
        os.makedirs(path, exist_ok=True)

    @staticmethod
    def save_text_file(file_path: str, content: str) -> None:
        """Save text content to file with UTF-8 encoding."""
        with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(content)

    @staticmethod
    def save_json(file_path: str, data: Dict[str, Any]) -> None:
        """Save a JSON document with sorted keys, so equal data give equal bytes."""
        text = json.dumps(ReportFormatter.to_jsonable(data), indent=2, sort_keys=True, allow_nan=False)
        FileHandler.save_text_file(file_path, text + "\n")

    @staticmethod
    def load_json(file_path: str) -> Dict[str, Any]:
        with open(file_path, 'r', encoding='utf-8') as f:
            return json.load(f)

    @staticmethod
    def save_csv(file_path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
        """Save a table; floats are written with 17 significant digits."""
        with open(file_path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([ReportFormatter.format_cell(value) for value in row])

    @staticmethod
    def get_file_size_kb(file_path: str) -> float:
        """Get file size in kilobytes."""
        return os.path.getsize(file_path) / 1024

    @staticmethod
    def validate_file_exists(file_path: str) -> bool:
        return os.path.exists(file_path)

    @staticmethod
    def read_matrix_file(file_path: str) -> np.ndarray:
        """
        Read a whitespace-separated matrix, one row per line ('#' starts a comment).

        Raises:
            ValueError: If rows have different lengths or the file holds no rows
        """
        rows = []
        with open(file_path, 'r', encoding='utf-8') as f:
            for line_number, line in enumerate(f, start=1):
                content = line.split('#', 1)[0].strip()
                if not content:
                    continue
                try:
                    rows.append([float(token) for token in content.split()])
                except ValueError:
                    raise ValueError(f"{file_path}:{line_number}: non-numeric entry in {content!r}")
                if len(rows[-1]) != len(rows[0]):
                    raise ValueError(f"{file_path}:{line_number}: row has {len(rows[-1])} entries, "
                                     f"expected {len(rows[0])}")
        if not rows:
            raise ValueError(f"{file_path}: no matrix rows")
        return np.array(rows)

    @staticmethod
    def format_matrix(M: np.ndarray) -> str:
        """Whitespace matrix text with 17 significant digits, readable by read_matrix_file."""
        return "\n".join(" ".join(format(float(v), '.17g') for v in row) for row in np.atleast_2d(M)) + "\n"


class ReportFormatter:
    """Converts results to JSON-ready data and formats reports for display."""

    @staticmethod
    def format_cell(value: Any) -> str:
        if isinstance(value, (float, np.floating)):
            return format(float(value), '.17g')
        if isinstance(value, SymbolicPoint):
            return value.to_text()
        if isinstance(value, tuple) and value and isinstance(value[0], Fraction):
            return format_torus_point(value)
        if isinstance(value, np.ndarray):
            return " ".join(format(float(v), '.17g') for v in value.ravel())
        return str(value)

    @staticmethod
    def to_jsonable(value: Any) -> Any:
        """Recursively convert numpy values, points and dataclasses; non-finite floats become strings."""
        if isinstance(value, dict):
            return {str(k): ReportFormatter.to_jsonable(v) for k, v in value.items()}
        if dataclasses.is_dataclass(value) and not isinstance(value, type):
            return {f.name: ReportFormatter.to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
        if isinstance(value, SymbolicPoint):
            return value.to_text()
        if isinstance(value, Fraction):
            return f"{value.numerator}/{value.denominator}"
        if isinstance(value, np.ndarray):
            return ReportFormatter.to_jsonable(value.tolist())
        if isinstance(value, (list, tuple)):
            return [ReportFormatter.to_jsonable(v) for v in value]
        if isinstance(value, (bool, np.bool_)):
            return bool(value)
        if isinstance(value, (int, np.integer)):
            return int(value)
        if isinstance(value, (float, np.floating)):
            value = float(value)
            if math.isfinite(value):
                return value
            return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
        if isinstance(value, complex):
            return [value.real, value.imag]
        return value

    @staticmethod
    def transfer_map_document(C) -> Dict[str, Any]:
        """JSON document of a sampled transfer map: anchor, certificate and matrices."""
        return {
            'anchor': C.anchor,
            'anchor_matrix': C.anchor_matrix,
            'certificate': C.certificate,
            'conjugacy_residual': C.conjugacy_residual,
            'homoclinic_residual': C.homoclinic_residual,
            'samples': [{'point': x, 'matrix': M} for x, M in C.sample_items()],
        }

    @staticmethod
    def splitting_rows(S, points: Sequence[Any]) -> List[List[Any]]:
        """Rows (point, block, column, frame entries) of a splitting field."""
        rows = []
        for x in points:
            for block, Q in enumerate(S.frames(x)):
                for column in range(Q.shape[1]):
                    rows.append([x, block + 1, column + 1] + [float(v) for v in Q[:, column]])
        return rows

    @staticmethod
    def pretty_lines(report: Dict[str, Any]) -> List[str]:
        """Human-readable summary of a saved report."""
        scenario = report.get('scenario', {})
        lines = [f"📊 Scenario: {scenario.get('name', '?')} ({report.get('schema', '?')})"]
        if scenario.get('description'):
            lines.append(f"   {scenario['description']}")
        lines.append("")
        for check in report.get('checks', []):
            mark = "✓" if check.get('passed') else "✗"
            threshold = check.get('threshold')
            bound = f" (threshold {threshold})" if threshold is not None else ""
            lines.append(f"{mark} {check.get('name')}: {check.get('value')}{bound}")
            if check.get('detail'):
                lines.append(f"    {check['detail']}")
        lines.append("")
        for key in sorted(report.get('results', {})):
            value = report['results'][key]
            if isinstance(value, (list, dict)):
                value = f"<{type(value).__name__} of {len(value)}>"
            lines.append(f"  {key}: {value}")
        for name in report.get('files', []):
            lines.append(f"💾 {name}")
        status = "passed" if report.get('passed') else "FAILED"
        lines.append(f"\nOverall: {status}")
        return lines
