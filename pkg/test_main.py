"""Tests for the command-line entry point."""

import sys

import pytest

import main
from src.config import config


@pytest.fixture(autouse=True)
def clean_config():
    config.reset_overrides()
    yield
    config.reset_overrides()


def run_cli(monkeypatch, *args):
    monkeypatch.setattr(sys, 'argv', ['main.py', *args])
    try:
        main.main()
    except SystemExit as e:
        return e.code
    return 0


def test_gallery_command(monkeypatch, capsys):
    assert run_cli(monkeypatch, 'gallery') == 0
    out = capsys.readouterr().out
    assert "planted-coboundary" in out
    assert "weak-irreducibility" in out


def test_run_and_report(monkeypatch, capsys, tmp_path):
    assert run_cli(monkeypatch, 'run', 'weak-irreducibility', '--out-dir', str(tmp_path)) == 0
    assert "Scenario completed successfully" in capsys.readouterr().out
    report = str(tmp_path / 'weak-irreducibility.json')
    assert run_cli(monkeypatch, 'report', report, '--pretty') == 0
    out = capsys.readouterr().out
    assert "weak irreducibility cat" in out
    assert run_cli(monkeypatch, 'report', report) == 0
    assert '"schema"' in capsys.readouterr().out


def test_failed_checks_exit_with_two(monkeypatch, capsys, tmp_path):
    assert run_cli(monkeypatch, 'run', 'unipotent-negative', '--out-dir', str(tmp_path)) == 2
    assert "Report saved to" in capsys.readouterr().out


def test_unknown_scenario_exits_with_one(monkeypatch, capsys):
    assert run_cli(monkeypatch, 'run', 'no-such-scenario') == 1
    assert "no-such-scenario" in capsys.readouterr().out


def test_thread_count_must_be_positive(monkeypatch):
    assert run_cli(monkeypatch, '--threads', '0', 'gallery') == 1
