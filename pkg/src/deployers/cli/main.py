"""Main CLI entry point for Deployers."""

import argparse
import sys

from deployers import __version__


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deployers",
        description="Agent-based macroeconomic simulator that self-deploys from SAM and FIGARO tables",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "exit codes: 0 success, 1 not converged, 2 runtime failure, "
            "3 invalid arguments or configuration, 4 table error, 5 storage or snapshot error"
        ),
    )

    # Global options
    parser.add_argument(
        "--version", action="version", version=f"Deployers {__version__}\nPython {sys.version}"
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Increase verbosity (-vv for debug output)",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="Suppress non-error output")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    from deployers.cli.deploy import setup_deploy_parser
    from deployers.cli.ingest import setup_ingest_parser
    from deployers.cli.run import setup_run_parser
    from deployers.cli.world import setup_world_parser

    setup_ingest_parser(subparsers)
    setup_deploy_parser(subparsers)
    setup_run_parser(subparsers)
    setup_world_parser(subparsers)
    return parser


def main(argv: list[str] | None = None) -> None:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        sys.exit(0)

    if args.command == "ingest":
        from deployers.cli.ingest import handle_ingest

        sys.exit(handle_ingest(args))
    elif args.command == "deploy":
        from deployers.cli.deploy import handle_deploy

        sys.exit(handle_deploy(args))
    elif args.command == "run":
        from deployers.cli.run import handle_run

        sys.exit(handle_run(args))
    elif args.command == "world":
        from deployers.cli.world import handle_world

        sys.exit(handle_world(args))
    else:
        parser.print_help()
        sys.exit(3)


if __name__ == "__main__":
    main()
