"""Command line entry point: ``python -m magmod <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .catalog import load_catalog
from .commands import CommandContext, registry
from .config import CatalogError, ConfigError, load_config
from .database import DatabaseManager
from .evaluator import EvalContext
from .scalars import DomainError, MagmodError, ResourceError, TruncationError

logger = logging.getLogger("magmod")

USAGE_ERRORS = (DomainError, TruncationError, ResourceError, ConfigError, CatalogError)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prec", type=int, default=None, help="Working precision in bits")
    common.add_argument("--order", type=int, default=10, help="Number of q-expansion terms to show")
    common.add_argument("--nmax", type=int, default=None, help="Coefficient bound for magneticity checks")
    common.add_argument("--json", action="store_true", help="Print the run report as JSON")
    common.add_argument("--catalog", type=Path, default=None, help="Catalog file replacing the packaged one")
    common.add_argument("--config", type=Path, default=None, help="Configuration file")
    common.add_argument("--no-cache", action="store_true", help="Bypass the expansion cache and run log")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="magmod", description="Workbench for magnetic modular forms")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("list", parents=[common], help="List the form catalog")

    sub = commands.add_parser("expand", parents=[common], help="Exact q-expansion of a catalog entry")
    sub.add_argument("name")

    sub = commands.add_parser("magnetic", parents=[common], help="Check the divisibility a_n * n^-d")
    sub.add_argument("name")
    sub.add_argument("--depth", type=int, default=None)

    sub = commands.add_parser("hecke", parents=[common], help="Apply the Hecke operator T_n")
    sub.add_argument("name")
    sub.add_argument("n", type=int)

    sub = commands.add_parser("slash", parents=[common], help="Expansion of f|gamma at infinity")
    sub.add_argument("name")
    sub.add_argument("gamma", help="Matrix entries a,b,c,d")

    sub = commands.add_parser("al", parents=[common], help="Apply the Atkin-Lehner involution W_Q")
    sub.add_argument("name")
    sub.add_argument("Q", type=int)
    sub.add_argument("--level", type=int, default=None)

    sub = commands.add_parser("coset-orbit", parents=[common], help="Images of f under SL2(Z) cosets")
    sub.add_argument("name")

    sub = commands.add_parser("eval", parents=[common], help="Evaluate f at a point")
    sub.add_argument("name")
    sub.add_argument("tau", help="x,y with tau = x + iy")

    sub = commands.add_parser("residues", parents=[common], help="Residues of tau^m f(tau) at every pole")
    sub.add_argument("name")

    sub = commands.add_parser("periods", parents=[common], help="Period polynomials and omega")
    sub.add_argument("name")
    sub.add_argument("--gamma", action="append", default=None, help="Matrix a,b,c,d (repeatable)")

    sub = commands.add_parser("magnetic-period-test", parents=[common], help="Vanishing of the period cocycle")
    sub.add_argument("name")

    sub = commands.add_parser("frs", parents=[common], help="The real-analytic modular form f_(r,s)")
    sub.add_argument("name")
    sub.add_argument("--tau", default=None, help="x,y")
    sub.add_argument("--check", default=None, help="Matrix a,b,c,d for a modularity check")
    sub.add_argument("--grid", default=None, help="x0,x1,y0,y1,n")
    sub.add_argument("--csv", type=Path, default=None, help="Write the grid samples here")

    sub = commands.add_parser("search", parents=[common], help="Search for magnetic candidates")
    sub.add_argument("group", help="Gamma(2) or Gamma1(6)")
    sub.add_argument("weight", type=int)
    sub.add_argument("pole", help="Pole polynomial in the Hauptmodul x, e.g. 'x+1'")
    sub.add_argument("depth", type=int)
    sub.add_argument("--denominator", type=int, default=None)
    sub.add_argument("--constraints", type=int, default=None)

    sub = commands.add_parser("reproduce", parents=[common], help="Recompute a stored table")
    sub.add_argument("table", help="Table id or 'all'")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="[%(asctime)s] %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(args.verbose)

    database = None
    try:
        config = load_config(args.config)
        if args.prec is not None:
            config.precision.bits = args.prec
        if config.database.enabled and not args.no_cache:
            database = DatabaseManager(config.database.path)
        catalog = load_catalog(config.catalog_path(args.catalog), compute=config.compute, store=database)
        ctx = EvalContext(precision=config.precision.bits, workers=config.compute.workers)
        report = registry.execute(args.command, CommandContext(config, catalog, ctx, args, database))
    except USAGE_ERRORS as exc:
        logger.error("%s", exc)
        return 2
    except MagmodError as exc:
        logger.error("%s", exc)
        return 1
    finally:
        if database is not None:
            database.close()

    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        print(report.render())
    return 0 if report.ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
