"""Command-line entry point for the federated simulator.

    sim run [--config <file>] [--preset <name>] [--key value]...
    sim presets
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from config.config import RuntimeSettings, load_presets, parse_config
from src.app.simulator_app import run
from src.utils.errors import ConfigError
from src.utils.logger import log_error, setup_logging


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Preset settings worth a column in `sim presets`
_PRESET_COLUMNS = ["n_clients", "participation_rate", "rounds", "partition", "alpha", "shards_per_client"]

console = Console()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="Deterministic federated-learning simulator (FedAvg, FedProx, pFedSD, FedCKD).",
        allow_abbrev=False,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser(
        "run",
        help="Run an experiment",
        description="Run an experiment. Any other --key value pair overrides a config field.",
        allow_abbrev=False,
    )
    run_parser.add_argument("--config", type=Path, default=None, help="Flat JSON/YAML config file")
    run_parser.add_argument("--preset", default=None, help="Named preset (see `sim presets`)")

    commands.add_parser("presets", help="List the available presets", allow_abbrev=False)
    return parser


def _format_setting(value: Any) -> str:
    if value is None:
        return "-"
    return str(value)


def show_presets() -> int:
    """Print the preset table."""
    table = Table(title="Presets")
    table.add_column("Name", style="bold", no_wrap=True)
    table.add_column("Description")
    for column in _PRESET_COLUMNS:
        table.add_column(column, justify="right")

    for name, preset in sorted(load_presets().items()):
        table.add_row(name, preset.description,
                      *(_format_setting(preset.settings.get(column)) for column in _PRESET_COLUMNS))
    console.print(table)
    return EXIT_OK


def show_summary(aggregate: Dict[str, Any], output_dir: Path) -> None:
    """Print the headline numbers of a finished run."""
    table = Table(title=f"Results ({aggregate.get('evaluation') or 'n/a'} evaluation)")
    table.add_column("Metric", no_wrap=True)
    table.add_column("Mean", justify="right")
    table.add_column("Std", justify="right")
    for key in ("final_mean_acc", "final_std_acc", "final_personalized_mean_acc", "final_personalized_std_acc",
                "final_global_mean_acc", "final_global_std_acc"):
        stats = aggregate.get(key) or {}
        table.add_row(key, _format_setting(stats.get("mean")), _format_setting(stats.get("std")))
    console.print(table)
    console.print(f"{aggregate.get('repeats', 0)} repeat(s) written to {output_dir}")


def run_command(config_file: Optional[Path], preset: Optional[str], overrides: Sequence[str]) -> int:
    try:
        cfg = parse_config(config_file, overrides, preset)
    except ConfigError as exc:
        log_error(f"Invalid configuration: {exc}")
        return EXIT_USAGE

    return run(cfg, on_complete=lambda report: show_summary(report.aggregate(), report.output_dir))


def main(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv`` and dispatch; returns the process exit status."""
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)

    try:
        settings = RuntimeSettings()
    except ValidationError as exc:
        first = exc.errors()[0]
        key = "SIM_" + "_".join(str(part) for part in first["loc"]).upper()
        log_error(f"Invalid environment setting {key}: {first['msg']}")
        return EXIT_USAGE
    setup_logging(settings.log_level)

    if args.command == "presets":
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        return show_presets()
    return run_command(args.config, args.preset, extra)


if __name__ == "__main__":
    sys.exit(main())
