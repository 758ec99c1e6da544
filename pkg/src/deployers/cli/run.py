"""Run subcommand: free what-if run from a snapshot."""

import argparse
import json
import logging
from typing import Any

import pandas as pd

from deployers.cli.options import (
    EXIT_FAILURE,
    EXIT_INVALID,
    EXIT_IO,
    EXIT_OK,
    add_common_options,
    exit_code_for,
    output_location,
    setup_logging,
    setup_storage,
    write_frame,
)
from deployers.errors import DeployersError
from deployers.lib.artifacts import jsonl_text
from deployers.models.config import ScenarioOverride
from deployers.services.analysis import long_series_frame, ratio_frame, sam_frame, series_frame
from deployers.services.scenario import ScenarioResult, run_scenario
from deployers.services.snapshot import load_snapshot, save_snapshot
from deployers.services.storage import StorageBackend, open_storage


def setup_run_parser(subparsers: Any) -> None:
    """Setup run subcommand parser.

    Args:
        subparsers: Subparsers object from argparse
    """
    parser = subparsers.add_parser("run", help="Free run from a snapshot with optional overrides")
    parser.add_argument("snapshot", help="Snapshot file (local path or abfss:// URI)")
    parser.add_argument("--months", "-n", type=int, default=12, help="Months to simulate (default: 12)")
    parser.add_argument(
        "--override",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE[@MONTH]",
        help="Parameter change at a scenario month, e.g. tax.T13_TaxProducts.scale=1.1@12 (repeatable)",
    )
    parser.add_argument("--scenario", help="JSON file with a list of {key, value, month} overrides")
    parser.add_argument("--save-snapshot", metavar="NAME", help="Also snapshot the final state under this name")
    add_common_options(parser)


def parse_override(text: str) -> ScenarioOverride:
    """Parse `key=value[@month]`.

    Raises:
        ValueError: Malformed item or non-numeric value
    """
    key, sep, rest = text.partition("=")
    if not sep:
        raise ValueError(f"Expected KEY=VALUE[@MONTH], got {text!r}")
    value, _, month = rest.partition("@")
    return ScenarioOverride(key=key, value=float(value), month=int(month) if month else 0)


def load_overrides(args: argparse.Namespace) -> list[ScenarioOverride]:
    overrides: list[ScenarioOverride] = []
    if args.scenario:
        with open(args.scenario, encoding="utf-8") as f:
            overrides.extend(ScenarioOverride.model_validate(item) for item in json.load(f))
    overrides.extend(parse_override(item) for item in args.overrides)
    return overrides


def split_location(location: str) -> tuple[str, str]:
    """Folder and file name of a snapshot location."""
    folder, sep, name = location.rstrip("/").rpartition("/")
    return (folder or "/", name) if sep else (".", name)


def handle_run(args: argparse.Namespace) -> int:
    """Handle run subcommand.

    Returns:
        Exit code (0=success, 2=failure, 3=invalid args, 5=IO or snapshot error)
    """
    logger = setup_logging(args)
    if args.months < 0:
        logger.error("Months must be a nonnegative integer")
        return EXIT_INVALID
    try:
        overrides = load_overrides(args)
    except FileNotFoundError:
        logger.error(f"Scenario file not found: {args.scenario}")
        return EXIT_INVALID
    except (ValueError, json.JSONDecodeError) as e:
        logger.error(f"Invalid override: {e}")
        return EXIT_INVALID

    try:
        folder, name = split_location(args.snapshot)
        state = load_snapshot(open_storage(folder), name)
        logger.info(f"Loaded {state.name} at month {state.month} from {args.snapshot}")
    except (DeployersError, OSError, ValueError) as e:
        logger.error(str(e))
        return EXIT_IO

    storage = setup_storage(output_location(args, state.config), logger)
    if storage is None:
        return EXIT_IO

    try:
        result = run_scenario(state, overrides, args.months, logger)
        write_run_artifacts(storage, result, logger)
        if args.save_snapshot:
            save_snapshot(result.state, storage, args.save_snapshot, source=args.snapshot)
        print_summary(result, args.log_format)
        return EXIT_OK

    except KeyboardInterrupt:
        logger.warning("Run interrupted by user")
        return EXIT_FAILURE
    except (DeployersError, OSError) as e:
        logger.error(str(e))
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return exit_code_for(e)


def write_run_artifacts(storage: StorageBackend, result: ScenarioResult, logger: logging.Logger) -> None:
    """Series, plot-ready series, survey and wealth distribution."""
    state = result.state
    config = state.config
    write_frame(storage, "series.csv", series_frame(result.reports), config)
    write_frame(storage, "series_long.csv", long_series_frame(result.reports), config)
    postings = state.ledger.drain()
    if postings:
        storage.write_text(
            jsonl_text((p.to_json() for p in postings), config.config_hash(), config.seed), "postings.jsonl"
        )
    survey = result.survey
    if survey is None:
        logger.info("No recorded history, survey skipped")
        return
    write_frame(storage, "survey_sam.csv", sam_frame(survey.sim_sam), config, index=True, window=survey.window)
    write_frame(storage, "ratio.csv", ratio_frame(survey.ratio, survey.sim_sam.codes), config, index=True)
    edges = survey.wealth_bins
    wealth = pd.DataFrame({"lower": edges[:-1], "upper": edges[1:], "households": survey.wealth_counts})
    write_frame(storage, "wealth.csv", wealth, config, skewness=round(survey.wealth_skewness, 6))


def print_summary(result: ScenarioResult, log_format: str) -> None:
    """Print run summary."""
    last = result.reports[-1] if result.reports else None
    summary = {
        "country": result.state.name,
        "month": result.state.month,
        "months_simulated": len(result.reports),
        "overrides_applied": [f"{o.key}={o.value}@{o.month}" for o in result.applied],
        "gdp": last.gdp_income if last else None,
        "unemployment_rate": last.unemployment_rate if last else result.state.unemployment_rate(),
        "firms": len(result.state.firms),
    }
    if log_format == "json":
        print(json.dumps({"status": "success", "summary": summary}, indent=2))
        return
    print("\n" + "=" * 60)
    print(f"Run Summary ({summary['country']}):")
    print(f"  Months simulated: {summary['months_simulated']} (now at month {summary['month']})")
    if result.applied:
        print(f"  Overrides: {', '.join(summary['overrides_applied'])}")
    if last:
        print(f"  GDP (last month): {last.gdp_income}")
    print(f"  Unemployment: {summary['unemployment_rate']:.1%}")
    print(f"  Firms: {summary['firms']}")
    print("=" * 60)
