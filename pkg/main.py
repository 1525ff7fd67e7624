"""Main CLI application for the periodic-data rigidity laboratory."""

import sys
import argparse
from pathlib import Path

# Add src directory to Python path
sys.path.insert(0, str(Path(__file__).parent / 'src'))

from src.config import config
from src.file_handler import FileHandler, ReportFormatter
from src.gallery import list_gallery
from src.scenario import CheckFailed, Report, ScenarioError, run_scenario
from src.base import BaseSystemError
from src.cocycle import CocycleError
from src.holonomy import HolonomyError
from src.rigidity import RigidityError
from src.spectrum import SpectrumError
from src.transfer import TransferError

LAB_ERRORS = (ValueError, ScenarioError, BaseSystemError, CocycleError, HolonomyError, SpectrumError,
              TransferError, RigidityError)


class RigidityLab:
    """Main orchestrator for scenario runs and report inspection."""

    def __init__(self):
        self.file_handler = FileHandler()

    def run(self, scenario: str, out_dir: str = None, seed: int = None) -> Report:
        """
        Run a scenario file or gallery entry and display its checks.

        Args:
            scenario: Scenario file path or gallery name
            out_dir: Output directory (optional)
            seed: Seed overriding the scenario's own (optional)

        Returns:
            Report of the run

        Raises:
            CheckFailed: If a check fails; the report is written first
            ScenarioError: For malformed or unknown scenarios
        """
        self._display_run_info(scenario, out_dir or config.output_directory, seed)
        try:
            report = run_scenario(scenario, out_dir=out_dir, seed=seed)
        except CheckFailed as e:
            self._display_results(e.report)
            raise
        self._display_results(report)
        return report

    def show_gallery(self) -> None:
        print("Built-in scenarios:")
        for name, description in list_gallery():
            print(f"  {name:<24} {description}")

    def show_report(self, report_path: str, pretty: bool = False) -> None:
        """Print a saved report, as JSON or as a readable summary."""
        if not self.file_handler.validate_file_exists(report_path):
            raise ValueError(f"Report file not found: {report_path}")
        document = self.file_handler.load_json(report_path)
        if pretty:
            for line in ReportFormatter.pretty_lines(document):
                print(line)
        else:
            with open(report_path, 'r', encoding='utf-8') as f:
                print(f.read(), end="")

    def _display_run_info(self, scenario: str, out_dir: str, seed: int) -> None:
        print(f"Scenario: {scenario}")
        print(f"Output: {out_dir}")
        print(f"Threads: {config.threads}")
        if seed is not None:
            print(f"Seed: {seed}")

    def _display_results(self, report: Report) -> None:
        """Display check outcomes and the written files."""
        print(f"\n--- Checks ---")
        for check in report.checks:
            mark = "✓" if check.passed else "✗"
            print(f"{mark} {check.name}: {ReportFormatter.format_cell(check.value)}")
        if report.path:
            print(f"\n✓ Report saved to: {report.path}")
            print(f"✓ File size: {self.file_handler.get_file_size_kb(report.path):.2f} KB")
        for timing in report.timings:
            print(f"⏱️  {timing[0]}: {timing[1]:.2f}s")


def create_argument_parser():
    """Create and configure command line argument parser."""
    parser = argparse.ArgumentParser(
        description='Periodic-data rigidity laboratory for linear cocycles over hyperbolic systems',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # List the built-in scenarios
  python main.py gallery

  # Run a gallery scenario
  python main.py run planted-coboundary

  # Run a scenario file with a different seed and output directory
  python main.py run my_scenario.ini --seed 42 --out-dir results

  # Use eight worker threads (reports are identical for any thread count)
  python main.py --threads 8 run sft-holonomy

  # Show a saved report as a readable summary
  python main.py report output/planted-coboundary.json --pretty

Exit codes:
  0  all checks passed
  1  malformed scenario or numerical failure
  2  at least one check failed (the report is still written)
        """
    )
    parser.add_argument('--threads', type=int, help='Worker threads for sample and orbit loops')
    parser.add_argument('--verbose', action='store_true', help='Print progress of every stage')

    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', help='Run a scenario file or gallery entry')
    run_parser.add_argument('scenario', help='Scenario file path or gallery name')
    run_parser.add_argument('--seed', type=int, help='Seed overriding the scenario seed')
    run_parser.add_argument('--out-dir', help='Directory for the report and side files')

    subparsers.add_parser('gallery', help='List built-in scenarios')

    report_parser = subparsers.add_parser('report', help='Print a saved report')
    report_parser.add_argument('report_file', help='Report JSON path')
    report_parser.add_argument('--pretty', action='store_true', help='Readable summary instead of raw JSON')

    return parser


def main():
    """Main application entry point."""
    parser = create_argument_parser()
    args = parser.parse_args()

    if args.threads is not None and args.threads < 1:
        print("Error: --threads must be at least 1")
        sys.exit(1)
    config.override(threads=args.threads, verbose_logging=True if args.verbose else None)

    try:
        lab = RigidityLab()
        if args.command == 'gallery':
            lab.show_gallery()
        elif args.command == 'report':
            lab.show_report(args.report_file, args.pretty)
        else:
            lab.run(args.scenario, args.out_dir, args.seed)
            print(f"\n🎉 Scenario completed successfully!")
    except CheckFailed as e:
        print(f"\n❌ {e}")
        print(f"📊 Report saved to: {e.report_path}")
        sys.exit(2)
    except LAB_ERRORS as e:
        print(f"\n❌ {e}")
        sys.exit(1)
    except KeyboardInterrupt:
        print("\n\n⏸️  Processing interrupted by user")
        sys.exit(1)
    except Exception as e:
        print(f"\n❌ Unexpected error: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
