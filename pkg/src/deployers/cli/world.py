"""World subcommand: lockstep multi-country run from an inter-country table."""

import argparse
import json
import logging
import time
from typing import Any

from pydantic import ValidationError

from deployers.cli.options import (
    EXIT_FAILURE,
    EXIT_INVALID,
    EXIT_IO,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    add_common_options,
    exit_code_for,
    output_location,
    setup_logging,
    setup_storage,
    write_frame,
)
from deployers.errors import DeployersError
from deployers.lib.artifacts import csv_text
from deployers.models.world import WorldConfig
from deployers.services.analysis import series_frame, world_summary_frame
from deployers.services.fetcher import resolve_input
from deployers.services.figaro import read_figaro
from deployers.services.multicountry import WorldRunner, WorldState, build_world
from deployers.services.snapshot import save_snapshot
from deployers.services.storage import StorageBackend


def setup_world_parser(subparsers: Any) -> None:
    """Setup world subcommand parser.

    Args:
        subparsers: Subparsers object from argparse
    """
    parser = subparsers.add_parser("world", help="Run several countries in lockstep")
    parser.add_argument("world_config", help="World configuration JSON file")
    parser.add_argument("--figaro", help="FIGARO table file or URL (overrides the configuration)")
    parser.add_argument("--months", "-n", type=int, help="Free-run months (overrides the configuration)")
    parser.add_argument("--workers", "-w", type=int, help="Worker threads (overrides the configuration)")
    parser.add_argument("--no-deploy", action="store_true", help="Skip lockstep deployment and calibration")
    parser.add_argument("--snapshots", action="store_true", help="Snapshot every member at the end")
    parser.add_argument("--cache-dir", default=".deployers-cache", help="Download cache for URL inputs")
    add_common_options(parser)


def load_world_config(path: str, args: argparse.Namespace, logger: logging.Logger) -> WorldConfig | None:
    """Load a world configuration with command-line overrides.

    Returns:
        WorldConfig or None if loading or validation fails
    """
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        for key in ("figaro", "months", "workers"):
            value = getattr(args, key, None)
            if value is not None:
                data[key] = value
        return WorldConfig.model_validate(data)
    except FileNotFoundError:
        logger.error(f"World configuration not found: {path}")
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in world configuration: {e}")
    except ValidationError as e:
        logger.error(f"Invalid world configuration: {e}")
    return None


def handle_world(args: argparse.Namespace) -> int:
    """Handle world subcommand.

    Returns:
        Exit code (0=success, 1=not converged, 2=failure, 3=invalid args, 4=table error, 5=IO error)
    """
    logger = setup_logging(args)
    config = load_world_config(args.world_config, args, logger)
    if config is None:
        return EXIT_INVALID
    if not config.figaro:
        logger.error("No FIGARO table: set figaro in the configuration or pass --figaro")
        return EXIT_INVALID

    storage = setup_storage(output_location(args, config.run), logger)
    if storage is None:
        return EXIT_IO

    try:
        started = time.perf_counter()
        icio = read_figaro(resolve_input(config.figaro, args.cache_dir), config.run.balance_tol)
        world = build_world(icio, config, logger)
        runner = WorldRunner(world, logger=logger)
        converged = runner.deploy() if not args.no_deploy else {c: True for c in world.members}
        deployed_reports = {c: len(r) for c, r in world.reports.items()}
        runner.run(config.months)

        write_world_artifacts(storage, world, deployed_reports, args.snapshots)
        print_summary(world, converged, time.perf_counter() - started, args.log_format)
        return EXIT_OK if all(converged.values()) else EXIT_NOT_CONVERGED

    except KeyboardInterrupt:
        logger.warning("World run interrupted by user")
        return EXIT_FAILURE
    except (DeployersError, OSError) as e:
        logger.error(str(e))
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return exit_code_for(e)


def write_world_artifacts(
    storage: StorageBackend, world: WorldState, skip: dict[str, int], snapshots: bool
) -> None:
    """Per-country series of the free run plus a world summary."""
    free = {c: reports[skip.get(c, 0) :] for c, reports in world.reports.items()}
    for country, reports in free.items():
        state = world.states[country]
        write_frame(storage, f"{country}/series.csv", series_frame(reports), state.config)
        if snapshots:
            save_snapshot(state, storage, f"{country}/snapshot.dsnap", source=world.config.figaro)
    storage.write_text(
        csv_text(world_summary_frame(free), world.config.config_hash(), world.config.run.seed),
        "world_summary.csv",
    )


def print_summary(world: WorldState, converged: dict[str, bool], seconds: float, log_format: str) -> None:
    """Print world run summary."""
    rows = {
        country: {
            "converged": converged.get(country, True),
            "month": state.month,
            "firms": len(state.firms),
            "unemployment_rate": state.unemployment_rate(),
        }
        for country, state in world.states.items()
    }
    if log_format == "json":
        print(json.dumps({"status": "success", "countries": rows, "seconds": round(seconds, 1)}, indent=2))
        return
    print("\n" + "=" * 60)
    print(f"World Summary ({len(rows)} countries, {world.epoch} lockstep months):")
    for country, row in rows.items():
        flag = "" if row["converged"] else "  (not converged)"
        print(f"  {country}: {row['firms']} firms, unemployment {row['unemployment_rate']:.1%}{flag}")
    print(f"  Duration: {seconds:.1f}s")
    print("=" * 60)
