"""Command-line experiment driver.

Subcommands map one-to-one onto the experiment drivers; a declarative INI
config file supplies the settings and individual flags override config
fields.  Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, MpvmcError
from .experiments import COMMANDS, DISPATCH, ExperimentConfig, load_config

_FLAG_TARGETS = {
    "seed": ("experiment", "seed"),
    "out": ("experiment", "output_dir"),
    "chains": ("sampler", "chains"),
    "samples": ("sampler", "samples"),
    "burn_in_sweeps": ("sampler", "burn_in_sweeps"),
    "thin_sweeps": ("sampler", "thin_sweeps"),
    "proposal": ("sampler", "proposal"),
    "format": ("precision", "format"),
    "r": ("bounds", "r"),
    "r_source": ("bounds", "r_source"),
    "steps": ("train", "steps"),
    "eta": ("train", "eta"),
    "reference": ("train", "reference"),
    "timings": ("train", "timings"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpvmc",
        description="Finite-precision Metropolis-Hastings experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="INI experiment configuration file")
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--out", help="output directory")
        cmd.add_argument("--chains", type=int)
        cmd.add_argument("--samples", type=int)
        cmd.add_argument("--burn-in-sweeps", type=int, dest="burn_in_sweeps")
        cmd.add_argument("--thin-sweeps", type=int, dest="thin_sweeps")
        cmd.add_argument("--proposal", choices=["flip", "exchange", "auto"])
        cmd.add_argument("--format", help="sampling format name")
        cmd.add_argument("--r", type=float, help="user-supplied contraction constant")
        cmd.add_argument("--r-source", dest="r_source", choices=["spectral", "user", "zero"])
        cmd.add_argument("--steps", type=int)
        cmd.add_argument("--eta", type=float)
        cmd.add_argument("--reference", choices=["none", "exact"])
        cmd.add_argument("--timings", action="store_const", const=True)
        cmd.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override any config field",
        )
    return parser


def resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    for flag, (section, key) in _FLAG_TARGETS.items():
        value = getattr(args, flag, None)
        if value is not None:
            config.set(section, key, value)
    for item in args.set:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        config.set(section, key, value)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        outputs = DISPATCH[args.command](config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except MpvmcError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
