"""Options and setup shared by every subcommand."""

import argparse
import json
import logging
import os
import warnings
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from deployers.errors import (
    ConvergenceWarning,
    ExtractionError,
    ScalingError,
    ScenarioError,
    SnapshotError,
    TableBalanceError,
    TableFormatError,
)
from deployers.lib.artifacts import csv_text
from deployers.lib.logging_config import configure_logging
from deployers.models.config import RunConfig
from deployers.services.storage import StorageBackend, open_storage

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_FAILURE = 2
EXIT_INVALID = 3
EXIT_TABLE = 4
EXIT_IO = 5

DEFAULT_RUN_CONFIG = Path(__file__).parent.parent.parent.parent / "config" / "default_run.json"


def add_common_options(parser: argparse.ArgumentParser, output: bool = True) -> None:
    """Logging, configuration and output options."""
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default=None,
        help="Logging level (default: DEPLOYERS_LOG_LEVEL or INFO)",
    )
    parser.add_argument(
        "--log-format",
        choices=["text", "json"],
        default="text",
        help="Log output format (default: text)",
    )
    if output:
        parser.add_argument(
            "--output-folder",
            "-o",
            help="Output folder, local path or abfss:// URI (default: DEPLOYERS_OUTPUT_DIR or the config's output_dir)",
        )


def add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", help="Run configuration JSON file (default: built-in defaults)")
    parser.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a configuration value by dotted path, e.g. --set household.kappa=0.2 (repeatable)",
    )


def setup_logging(args: argparse.Namespace) -> logging.Logger:
    """Logger for a subcommand; -vv forces DEBUG and -q forces ERROR."""
    log_level = args.log_level or os.getenv("DEPLOYERS_LOG_LEVEL", "INFO").upper()
    if getattr(args, "verbose", 0) >= 2:
        log_level = "DEBUG"
    if getattr(args, "quiet", False):
        log_level = "ERROR"
    # Non-convergence is reported through the log and the exit code.
    warnings.simplefilter("ignore", ConvergenceWarning)
    return configure_logging(log_level, args.log_format, "deployers")


def parse_assignments(items: list[str]) -> dict[str, Any]:
    """Parse `key=value` items; values are JSON when they parse as JSON, else strings.

    Raises:
        ValueError: If an item has no `=`
    """
    assignments: dict[str, Any] = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"Expected KEY=VALUE, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        assignments[key.strip()] = value
    return assignments


def load_run_config(
    config_path: str | None, assignments: list[str], logger: logging.Logger
) -> RunConfig | None:
    """Load a run configuration and apply `--set` overrides.

    Precedence is command line over file over model defaults.

    Returns:
        RunConfig or None if loading or validation fails
    """
    try:
        if config_path:
            with open(config_path, encoding="utf-8") as f:
                config = RunConfig.model_validate(json.load(f))
        elif DEFAULT_RUN_CONFIG.exists():
            with open(DEFAULT_RUN_CONFIG, encoding="utf-8") as f:
                config = RunConfig.model_validate(json.load(f))
        else:
            config = RunConfig()
        overrides = parse_assignments(assignments)
        if overrides:
            config = config.with_overrides(overrides)
        return config
    except FileNotFoundError:
        logger.error(f"Configuration file not found: {config_path}")
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in configuration file: {e}")
    except KeyError as e:
        logger.error(f"Unknown configuration key: {e.args[0]}")
    except (ValidationError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
    return None


def output_location(args: argparse.Namespace, config: RunConfig | None = None) -> str:
    """Command line, then DEPLOYERS_OUTPUT_DIR, then the configuration."""
    if getattr(args, "output_folder", None):
        return str(args.output_folder)
    env = os.getenv("DEPLOYERS_OUTPUT_DIR")
    if env:
        return env
    return config.output_dir if config else "./output"


def setup_storage(location: str, logger: logging.Logger) -> StorageBackend | None:
    """Open the output folder.

    Returns:
        Storage backend or None if setup fails
    """
    try:
        storage = open_storage(location)
        if not location.startswith("abfss://"):
            marker = Path(location) / ".deployers_test"
            marker.write_text("test")
            marker.unlink()
        logger.info(f"Output folder: {storage.get_full_path('')}")
        return storage
    except PermissionError:
        logger.error(f"Output folder not writable: {location}")
    except ImportError as e:
        logger.error(str(e))
    except (OSError, ValueError) as e:
        logger.error(f"Error setting up storage: {e}")
    return None


def write_frame(
    storage: StorageBackend,
    path: str,
    frame: Any,
    config: RunConfig,
    index: bool = False,
    **extra: Any,
) -> str:
    """Write a frame as a headed CSV artifact; returns its location."""
    storage.write_text(csv_text(frame, config.config_hash(), config.seed, index=index, **extra), path)
    return storage.get_full_path(path)


def exit_code_for(error: Exception) -> int:
    """Exit code of a failed command."""
    if isinstance(error, TableFormatError | TableBalanceError | ExtractionError | ScalingError):
        return EXIT_TABLE
    if isinstance(error, SnapshotError | OSError):
        return EXIT_IO
    if isinstance(error, ScenarioError | ValidationError):
        return EXIT_INVALID
    return EXIT_FAILURE
