"""Ingest subcommand: validate a SAM or FIGARO table, optionally extract a country SAM."""

import argparse
import logging
from pathlib import Path
from typing import Any

from deployers.cli.options import (
    EXIT_INVALID,
    EXIT_OK,
    add_common_options,
    exit_code_for,
    setup_logging,
)
from deployers.errors import DeployersError
from deployers.models.config import LaborShareRule
from deployers.models.tables import CountrySamSpec
from deployers.services.extraction import extract_country_sam
from deployers.services.fetcher import resolve_input
from deployers.services.figaro import icio_summary, read_figaro
from deployers.services.sam_format import balance_summary, emit_sam, read_sam


def setup_ingest_parser(subparsers: Any) -> None:
    """Setup ingest subcommand parser.

    Args:
        subparsers: Subparsers object from argparse
    """
    parser = subparsers.add_parser("ingest", help="Validate a SAM or FIGARO table and print a summary")
    parser.add_argument("path", help="Table file or http(s) URL")
    parser.add_argument(
        "--format",
        choices=["auto", "sam", "figaro"],
        default="auto",
        help="Table format (default: auto, .csv is FIGARO)",
    )
    parser.add_argument("--balance-tol", type=float, default=1e-3, help="Relative balance tolerance (default: 1e-3)")
    parser.add_argument("--extract", metavar="COUNTRY", help="Extract the SAM of this country from a FIGARO table")
    parser.add_argument("--partners", default="", help='Explicit partners, e.g. "FR:dis,DE:agg,US:agg"')
    parser.add_argument("--residual-name", default="RoW", help="Label of the rest-of-world account (default: RoW)")
    parser.add_argument("--population", type=float, default=0.0, help="Population recorded in the extracted SAM")
    parser.add_argument("--active-population", type=float, default=0.0, help="Active population of the extracted SAM")
    parser.add_argument("--labor-share", type=float, default=0.5, help="Labor share for unsplit value added (default: 0.5)")
    parser.add_argument("--out", help="Write the extracted SAM to this file (default: stdout)")
    parser.add_argument("--cache-dir", default=".deployers-cache", help="Download cache for URL inputs")
    add_common_options(parser, output=False)


def table_format(path: str, requested: str) -> str:
    if requested != "auto":
        return requested
    return "figaro" if Path(path.split("?")[0]).suffix.lower() == ".csv" else "sam"


def handle_ingest(args: argparse.Namespace) -> int:
    """Handle ingest subcommand.

    Returns:
        Exit code (0=success, 3=invalid args, 4=table error, 5=IO error)
    """
    logger = setup_logging(args)
    fmt = table_format(args.path, args.format)
    if args.extract and fmt != "figaro":
        logger.error("--extract needs a FIGARO table")
        return EXIT_INVALID

    try:
        path = resolve_input(args.path, args.cache_dir)
        if fmt == "sam":
            table = read_sam(path, args.balance_tol)
            print(f"{args.path}: {balance_summary(table)}")
            return EXIT_OK

        icio = read_figaro(path, args.balance_tol)
        print(f"{args.path}: {icio_summary(icio)}")
        if args.extract:
            return extract(args, icio, logger)
        return EXIT_OK

    except FileNotFoundError as e:
        logger.error(f"Table not found: {e.filename or args.path}")
        return exit_code_for(e)
    except (DeployersError, OSError) as e:
        logger.error(f"{args.path}: {e}")
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return exit_code_for(e)


def extract(args: argparse.Namespace, icio: Any, logger: logging.Logger) -> int:
    """Extract one country SAM and write it out."""
    try:
        spec = CountrySamSpec(
            home=args.extract,
            partners=CountrySamSpec.parse_partners(args.partners),
            residual_name=args.residual_name,
            population=args.population,
            active_population=args.active_population,
        )
        rule = LaborShareRule(default=args.labor_share)
    except ValueError as e:
        logger.error(f"Invalid extraction options: {e}")
        return EXIT_INVALID

    sam = extract_country_sam(icio, spec, rule, args.balance_tol)
    text = emit_sam(sam)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"{sam.name}: {balance_summary(sam)} -> {args.out}")
    else:
        print(text, end="")
    return EXIT_OK
