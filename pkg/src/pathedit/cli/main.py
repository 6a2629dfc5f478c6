"""Main entry point for the PathEdit harness."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import argparse
import logging
from pathlib import Path
from typing import List, Optional

from .. import __version__
from ..config.experiment import load_config
from ..config.settings import EXIT_CODES
from ..core.errors import PathEditError
from ..core.store import RunStore
from ..ui.display import display_error
from .commands import COMMANDS, RunOptions


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subcommand per harness action."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="Experiment config file (JSON); the packaged default when omitted")
    common.add_argument("--seed", type=int, default=None, help="Override the config's seed")
    common.add_argument("--out", type=Path, default=None, help="Override the config's output_dir")
    common.add_argument("--no-trace", action="store_true", help="Do not write trajectory traces")
    common.add_argument("--quiet", action="store_true", help="Only log warnings; no console tables")

    parser = argparse.ArgumentParser(
        prog="pathedit",
        description="Inversion-free direct-path editing over analytic denoisers",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "edit": "Edit one benchmark instance and write its trace",
        "sweep": "Sweep regularized steps and strength over the benchmark",
        "bench": "Compare regularized, unregularized and DDIM-inversion editing",
        "verify": "Run the gradient, Monte-Carlo, adapter and shared-noise checks",
        "plot": "Draw an edit as SVG (2-D) or PGM images (grids)",
    }
    for name, text in helps.items():
        subparsers.add_parser(name, parents=[common], help=text)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the subcommand and map failures to exit codes.

    Returns:
        0 on success, 2 for config errors, 3 for numeric errors, 4 for failed
        verification and 5 for I/O errors
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, seed=args.seed, out=args.out)
        store = RunStore(config.output_dir)
        options = RunOptions(trace=not args.no_trace, quiet=args.quiet)
        return COMMANDS[args.command](config, store, options)
    except PathEditError as e:
        display_error(str(e))
        return e.exit_code
    except OSError as e:
        display_error(str(e))
        return EXIT_CODES["io"]
    except Exception as e:
        display_error(f"An unexpected error occurred: {e}")
        return 1
