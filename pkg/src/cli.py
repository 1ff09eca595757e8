"""shellspectra command line

Each subcommand resolves a RunConfig from an optional config file plus flags,
runs one computation and writes CSV/JSON results into the output directory.
Exit codes: 0 success, 2 invalid parameters, 3 numerical failure, 1 anything else.
"""

import argparse
import sys
from typing import Any, Optional, Sequence

from . import __version__
from .commands import HANDLERS
from .commands.utils.error_handler import handle_error
from .commands.utils.run_config import COMMANDS, resolve_run_config
from .utils.config import config
from .utils.logging import setup_logger

logger = setup_logger(__name__)

HELP = {
    "modes-1d": "ground state of the one-dimensional Dirichlet/Robin model",
    "sphere-spectrum": "exact gap eigenvalues for a spherical shell",
    "effective-spectrum": "lowest eigenvalues of the effective surface operator",
    "bs-scan": "Birman-Schwinger scan of sigma_min(I + tau*beta*C_lambda)",
    "asymptotics-check": "compare sphere eigenvalues with the large-mass expansion",
    "weyl-count": "count gap eigenvalues on a sphere against the Weyl law",
}


def _surface_param(raw: str) -> tuple[str, float]:
    key, sep, value = raw.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {raw!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"surface parameter {key!r} must be numeric, got {value!r}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file; flags override its values")
    parser.add_argument("--output-dir", help=f"result directory (default {config.output_dir})")
    parser.add_argument("--strict", action="store_true", default=None,
                        help="treat a missing bound state as a numerical failure")
    parser.add_argument("--m", help="mass, or comma-separated masses for sweeps")
    parser.add_argument("--tau", help="coupling, or comma-separated couplings")
    parser.add_argument("--R", type=float, help="sphere radius")
    parser.add_argument("--delta", type=float, help="slab half-width of the 1D model")
    parser.add_argument("--c", type=float, help="Robin coefficient of the 1D model")
    parser.add_argument("--dirichlet", action="store_true", default=None,
                        help="use the Dirichlet 1D model instead of Robin")
    parser.add_argument("--surface", dest="surface_name", help="sphere, ellipsoid or torus")
    parser.add_argument("--surface-param", dest="surface_params", action="append", type=_surface_param,
                        metavar="KEY=VALUE", help="surface parameter, repeatable (e.g. a=1.2)")
    parser.add_argument("--order", type=int, help="quadrature and basis order")
    parser.add_argument("--count", type=int, help="number of effective eigenvalues")
    parser.add_argument("--nodes", type=int, help="minimum number of Nystrom nodes")
    parser.add_argument("--kappa-max", type=int, help="largest |kappa| channel to scan")
    parser.add_argument("--lambda-grid", type=int, help="points in each channel's lambda scan")
    parser.add_argument("--interval", help="lambda interval lo,hi for bs-scan")
    parser.add_argument("--steps", type=int, help="lambda steps for bs-scan")
    parser.add_argument("--levels", type=int, help="eigenvalue levels in asymptotics-check")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shellspectra",
                                     description="Spectral toolkit for Dirac operators with shell interactions")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_common(sub.add_parser(name, help=HELP[name], description=HELP[name]))
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    values = vars(args).copy()
    for key in ("command", "config"):
        values.pop(key, None)
    if values.get("surface_params"):
        values["surface_params"] = dict(values["surface_params"])
    return values


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help/--version
        return int(exc.code or 0)

    try:
        cfg = resolve_run_config(args.command, args.config, _overrides(args))
    except Exception as e:
        return handle_error(args.command, e, None)

    logger.debug(f"Resolved configuration for {args.command}: {cfg.echo()}")
    return HANDLERS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
