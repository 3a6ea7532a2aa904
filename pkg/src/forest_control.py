"""
Main entry point for Honest Forest Lab.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from loguru import logger
from rich.console import Console
from rich.table import Table

from src.core.config import settings
from src.core.exceptions import ConfigurationError
from src.orchestration.experiment_runner import RunReport, load_config, run_experiment

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def setup_logging():
    """Configure logging."""
    logger.remove()
    logger.add(
        sys.stderr,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>",
        level=settings.log_level
    )

    if settings.log_file:
        settings.log_file.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            settings.log_file,
            rotation="100 MB",
            retention="30 days",
            level=settings.log_level
        )


def build_parser() -> argparse.ArgumentParser:
    """Subcommands with the shared run flags."""
    parser = argparse.ArgumentParser(
        description="Honest Forest Lab - honest random forests and multi-point inference"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    helps = {
        "simulate": "Fit the forest on one simulated dataset at the query points",
        "sweep": "Correlation-vs-distance curve and heuristic comparison",
        "coverage": "Empirical coverage of contrast intervals",
        "stability": "Coupled split disagreement and stability verdicts",
        "cooccur": "Co-occurrence frequency across subsample sizes",
        "run": "Every experiment listed under 'experiments' in the config",
    }
    for command, text in helps.items():
        sub = subparsers.add_parser(command, help=text)
        sub.add_argument("--config", type=Path, help="Flat JSON config file")
        sub.add_argument("--seed", type=int, required=True, help="Master seed")
        sub.add_argument("--out", type=Path, default=None, help="Output directory")
        sub.add_argument("--threads", type=int, default=None, help="Worker count (-1 uses every core)")
        sub.add_argument(
            "--log-level",
            type=str,
            default=None,
            choices=["DEBUG", "INFO", "WARNING", "ERROR"],
            help="Logging level"
        )
    return parser


def print_summary(report: RunReport, console: Console) -> None:
    """One table row per written output."""
    table = Table(title="Outputs")
    table.add_column("File", style="cyan")
    table.add_column("Bytes", justify="right")
    for path in report.outputs:
        table.add_row(str(path), str(path.stat().st_size))
    console.print(table)

    for name, message in report.errors.items():
        console.print(f"[red]✗ {name}[/red]: {message}")


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)

    if args.log_level:
        settings.log_level = args.log_level
    if args.threads is not None:
        settings.n_jobs = args.threads

    setup_logging()
    console = Console(stderr=True)

    overrides = {"seed": args.seed}
    if args.command != "run":
        overrides["experiments"] = [args.command]

    try:
        config = load_config(args.config, **overrides)
    except ConfigurationError as e:
        logger.error(f"Invalid config: {e}")
        console.print(f"[red]config error[/red] {e}")
        return EXIT_CONFIG

    out_dir = args.out or settings.output_dir
    report = run_experiment(config, out_dir)
    print_summary(report, console)

    if report.errors:
        logger.error(f"{len(report.errors)} experiment(s) failed; finished outputs kept in {out_dir}")
        return EXIT_PARTIAL
    logger.info(f"✓ {', '.join(config.experiments)} complete")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
