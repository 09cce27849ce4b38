"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric/simulation error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import __version__
from .config import load_config
from .errors import ConfigError, NumericError
from .runner import run

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kitwpa",
        description="Kinetic-inductance traveling-wave parametric amplifier "
                    "design and simulation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_ in (
        ("design", "expand the design and emit its netlist"),
        ("dispersion", "Bloch dispersion curve and stopband report"),
        ("linear", "small-signal S-parameters (Touchstone + CSV)"),
        ("gain", "four-wave-mixing gain profile and metrics"),
        ("harmonics", "third-harmonic power along the line"),
        ("sweep", "metric sweep over a design or pump parameter"),
        ("calibrate", "fit the nonlinearity scale I* to a target peak gain"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", default=None, help="output directory "
                       "(default: from the config)")
        p.add_argument("--format", choices=("csv", "touchstone", "all"),
                       default=None, help="restrict emitted file formats")
        p.add_argument("--threads", type=int, default=1,
                       help="concurrent sweep evaluations")
        p.add_argument("--seed-level-db", type=float, default=None,
                       help="signal seed level relative to the pump")
        p.add_argument("--strict", dest="strict", action="store_true",
                       default=True, help="reject unknown config keys (default)")
        p.add_argument("--no-strict", dest="strict", action="store_false",
                       help="ignore unknown config keys")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, strict=args.strict)
        if args.format is not None:
            formats = (("csv", "touchstone", "netlist") if args.format == "all"
                       else (args.format, "netlist"))
            config = replace(config, formats=formats)
        if args.seed_level_db is not None:
            config = replace(config, integrator=replace(
                config.integrator, seed_level_db=args.seed_level_db))
        manifest = run(args.subcommand, config, out_dir=args.out,
                       threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for entry in manifest["files"]:
        print(f"wrote {entry['name']}  sha256 {entry['sha256'][:12]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
