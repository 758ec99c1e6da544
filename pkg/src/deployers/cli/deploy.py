"""Deploy subcommand: grow and calibrate an economy, then snapshot it."""

import argparse
import json
import logging
import time
from typing import Any

import pandas as pd

from deployers.cli.options import (
    EXIT_FAILURE,
    EXIT_INVALID,
    EXIT_IO,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    add_common_options,
    add_config_options,
    exit_code_for,
    load_run_config,
    output_location,
    setup_logging,
    setup_storage,
    write_frame,
)
from deployers.errors import DeployersError
from deployers.lib.artifacts import jsonl_text
from deployers.models.config import RunConfig
from deployers.models.tables import CountrySamSpec, SamTable
from deployers.services.analysis import deviation_frame, ratio_frame, sam_frame, series_frame, survey_report
from deployers.services.deployment import deploy_and_calibrate, deviation_report, run_deployment
from deployers.services.economy import CountryState, build_country_state
from deployers.services.extraction import extract_country_sam
from deployers.services.fetcher import resolve_input
from deployers.services.figaro import read_figaro
from deployers.services.sam_format import read_sam
from deployers.services.snapshot import save_snapshot
from deployers.services.storage import StorageBackend
from deployers.services.targets import scale_to_agents, targets_frame

SNAPSHOT_NAME = "snapshot.dsnap"
SURVEY_MONTHS = 12


def setup_deploy_parser(subparsers: Any) -> None:
    """Setup deploy subcommand parser.

    Args:
        subparsers: Subparsers object from argparse
    """
    parser = subparsers.add_parser("deploy", help="Deploy and calibrate an economy from a SAM")
    parser.add_argument("--sam", help="SAM file or URL (overrides inputs.sam)")
    parser.add_argument("--figaro", help="FIGARO table to extract a country from (overrides inputs.figaro)")
    parser.add_argument("--country", help="Country to extract (overrides inputs.country)")
    parser.add_argument("--partners", help='Explicit partners, e.g. "FR:dis,DE:agg" (overrides inputs.partners)')
    parser.add_argument("--snapshot-name", default=SNAPSHOT_NAME, help=f"Snapshot file name (default: {SNAPSHOT_NAME})")
    parser.add_argument("--no-calibrate", action="store_true", help="Stop after the deployment stage")
    parser.add_argument("--cache-dir", default=".deployers-cache", help="Download cache for URL inputs")
    add_config_options(parser)
    add_common_options(parser)


def handle_deploy(args: argparse.Namespace) -> int:
    """Handle deploy subcommand.

    Returns:
        Exit code (0=success, 1=not converged, 2=failure, 3=invalid args, 4=table error, 5=IO error)
    """
    logger = setup_logging(args)
    config = load_run_config(args.config, args.assignments, logger)
    if config is None:
        return EXIT_INVALID
    config = apply_input_flags(config, args)
    if not (config.inputs.sam or (config.inputs.figaro and config.inputs.country)):
        logger.error("No input table: give --sam, or --figaro with --country")
        return EXIT_INVALID

    storage = setup_storage(output_location(args, config), logger)
    if storage is None:
        return EXIT_IO

    try:
        started = time.perf_counter()
        sam = load_source_sam(config, args.cache_dir, logger)
        targets = scale_to_agents(
            sam,
            config.n_active,
            config.engine.min_active,
            config.engine.base_units_per_currency,
            config.engine.reference_price,
        )
        state = build_country_state(targets, config, name=sam.region or sam.name)
        logger.info(f"Deploying {sam.name} with {config.n_active} agents (seed {config.seed})")

        if args.no_calibrate:
            deployed = run_deployment(state, logger=logger)
            result, converged = deployed, deployed.converged
        else:
            deployed, result = deploy_and_calibrate(state, logger=logger)
            converged = deployed.converged and result.converged

        write_deploy_artifacts(storage, result.state, config, args.snapshot_name, sam, logger)
        if result.kappa_path:
            write_frame(storage, "kappa.csv", pd.DataFrame({"kappa": result.kappa_path}), config)
        write_frame(storage, "targets.csv", targets_frame(targets), config)

        print_summary(result.state, deployed.months, result.months, converged, time.perf_counter() - started, args.log_format)
        return EXIT_OK if converged else EXIT_NOT_CONVERGED

    except KeyboardInterrupt:
        logger.warning("Deployment interrupted by user")
        return EXIT_FAILURE
    except (DeployersError, OSError) as e:
        logger.error(str(e))
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return exit_code_for(e)


def apply_input_flags(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Input flags given on the command line replace the configured inputs."""
    updates = {
        name: getattr(args, name)
        for name in ("sam", "figaro", "country", "partners")
        if getattr(args, name, None)
    }
    if not updates:
        return config
    return config.model_copy(update={"inputs": config.inputs.model_copy(update=updates)})


def load_source_sam(config: RunConfig, cache_dir: str, logger: logging.Logger) -> SamTable:
    """Read the configured SAM, or extract it from the configured FIGARO table."""
    inputs = config.inputs
    if inputs.sam:
        sam = read_sam(resolve_input(inputs.sam, cache_dir), config.balance_tol)
        logger.info(f"Loaded {sam.name}: {sam.size} accounts")
        return sam
    icio = read_figaro(resolve_input(inputs.figaro or "", cache_dir), config.balance_tol)
    spec = CountrySamSpec(
        home=inputs.country or "",
        partners=CountrySamSpec.parse_partners(inputs.partners or ""),
        population=inputs.population or inputs.active_population,
        active_population=inputs.active_population,
    )
    return extract_country_sam(icio, spec, config.labor_share, config.balance_tol)


def write_deploy_artifacts(
    storage: StorageBackend,
    state: CountryState,
    config: RunConfig,
    snapshot_name: str,
    sam: SamTable,
    logger: logging.Logger,
) -> None:
    """Snapshot, deviation report, survey and series of a deployed state."""
    postings = state.ledger.drain()
    if postings:
        storage.write_text(
            jsonl_text((p.to_json() for p in postings), config.config_hash(), config.seed), "postings.jsonl"
        )
    location = save_snapshot(state, storage, snapshot_name, source=sam.name)
    write_frame(storage, "deviation.csv", deviation_frame(deviation_report(state, config.deployment.match_window)), config)
    write_frame(storage, "series.csv", series_frame(state.reports), config)
    history = len(state.recorder.history)
    if history:
        survey = survey_report(state, min(SURVEY_MONTHS, history))
        write_frame(storage, "survey_sam.csv", sam_frame(survey.sim_sam), config, index=True)
        write_frame(storage, "ratio.csv", ratio_frame(survey.ratio, sam.codes), config, index=True)
    logger.info(f"Snapshot: {location}")


def print_summary(
    state: CountryState, deploy_months: int, calib_months: int, converged: bool, seconds: float, log_format: str
) -> None:
    """Print deployment summary."""
    if log_format == "json":
        summary = {
            "status": "converged" if converged else "not_converged",
            "summary": {
                "country": state.name,
                "month": state.month,
                "deployment_months": deploy_months,
                "calibration_months": calib_months,
                "firms": len(state.firms),
                "banks": len(state.banks),
                "unemployment_rate": state.unemployment_rate(),
                "kappa": state.config.household.kappa,
                "seconds": round(seconds, 1),
            },
        }
        print(json.dumps(summary, indent=2))
        return
    print("\n" + "=" * 60)
    print(f"Deployment Summary ({state.name}):")
    print(f"  Status: {'converged' if converged else 'NOT converged'}")
    print(f"  Months: {deploy_months} deployment + {calib_months} calibration")
    print(f"  Firms: {len(state.firms)}  Banks: {len(state.banks)}")
    print(f"  Unemployment: {state.unemployment_rate():.1%}")
    print(f"  Kappa: {state.config.household.kappa:.4f}")
    print(f"  Duration: {seconds:.1f}s")
    print("=" * 60)
