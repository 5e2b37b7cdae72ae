#!/usr/bin/env python3
"""
vgan - Volumetric progressive-growing GAN

Trains a progressive generator/discriminator pair on 3D MR volumes, from 4^3
up to the configured resolution, and samples synthetic volumes from it.

Usage:
    python vgan.py <command> [--config config.toml] [--seed N] [--out DIR]

Commands:
    synthdata    write synthetic phantom volumes (no external data needed)
    preprocess   downsample x2, center crop, normalize; write split.tsv
    augment      k random 3D rotations per training volume
    train        run the progressive schedule (--dry-run validates only)
    generate     sample volumes from a checkpoint (.nii.gz + PGM slices)
    selftest     gradient, conv oracle, NIfTI and rotation checks
    info         print checkpoint metadata

Exit codes: 0 ok, 1 usage or configuration, 2 data, 3 numeric failure.
"""

import argparse
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from termcolor import colored


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def validate_config(path: str) -> str:
    """Validate that the config file exists and is readable"""
    if not os.path.exists(path):
        raise argparse.ArgumentTypeError(f"Config file '{path}' does not exist.")

    if not os.path.isfile(path):
        raise argparse.ArgumentTypeError(f"'{path}' is not a file.")

    if not os.access(path, os.R_OK):
        raise argparse.ArgumentTypeError(f"Config file '{path}' is not readable.")

    return os.path.abspath(path)


def validate_directory(path: str) -> str:
    """Validate that the directory path exists and is accessible"""
    if not os.path.isdir(path):
        raise argparse.ArgumentTypeError(f"Directory '{path}' does not exist.")
    if not os.access(path, os.R_OK):
        raise argparse.ArgumentTypeError(f"Directory '{path}' is not readable.")
    return os.path.abspath(path)


def validate_seed(value: str) -> int:
    """Unsigned 64-bit integer"""
    try:
        seed = int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed '{value}' is not an integer.")
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed {seed} is outside the unsigned 64-bit range.")
    return seed


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' is not an integer.")
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {number}.")
    return number


def print_banner():
    """Print the vgan banner"""
    banner = """
════════════════════════════════════════════════════════════════════════
                        _   _ __ _  __ _ _ __
                        \\ \\ / / _` |/ _` | '_ \\
                         \\ V / (_| | (_| | | | |
                          \\_/ \\__, |\\__,_|_| |_|  Volumetric progressive GAN
                              |___/
════════════════════════════════════════════════════════════════════════
"""
    print(colored(banner, "cyan", attrs=['bold']))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=validate_config, metavar="PATH",
                        help="Configuration file (default: $VGAN_CONFIG or config/config.toml)")
    common.add_argument("--preset", metavar="NAME",
                        help="Packaged preset merged under the config file (e.g. 'fullscale')")
    common.add_argument("--seed", type=validate_seed, metavar="U64", help="Run seed (overrides the config)")
    common.add_argument("--out", metavar="DIR", help="Output directory (overrides paths.out_dir)")
    common.add_argument("--dry-run", action="store_true", help="Validate and describe, do not run")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="Errors only, no banner")
    verbosity.add_argument("--verbose", action="store_true", help="Debug output")

    parser = argparse.ArgumentParser(
        description="vgan - volumetric progressive-growing GAN for 3D MR volumes",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    python vgan.py synthdata --config config/desk.toml
    python vgan.py preprocess --config config/desk.toml
    python vgan.py augment --config config/desk.toml
    python vgan.py train --config config/desk.toml
    python vgan.py generate --config config/desk.toml --count 3
    python vgan.py train --preset fullscale --seed 1 --dry-run
        """
    )
    parser.add_argument("--version", action="version", version="vgan 1.0.0")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    synthdata = commands.add_parser("synthdata", parents=[common], help="Write synthetic phantom volumes")
    synthdata.add_argument("--count", type=positive_int, help="Number of phantoms")
    synthdata.add_argument("--dims", type=positive_int, nargs=3, metavar=("X", "Y", "Z"), help="Raw extents")

    preprocess = commands.add_parser("preprocess", parents=[common], help="Downsample, crop and normalize")
    preprocess.add_argument("--in", dest="in_dir", type=validate_directory, metavar="DIR",
                            help="Raw volume directory (default: paths.data_dir)")
    preprocess.add_argument("--eval-count", type=int, metavar="N", help="Volumes held out for evaluation")

    augment = commands.add_parser("augment", parents=[common], help="Rotated copies of the training set")
    augment.add_argument("--k", type=positive_int, help="Rotations per volume (default 10)")
    augment.add_argument("--sigma", type=float, help="Angle standard deviation in degrees (default 10)")
    augment.add_argument("--workers", type=positive_int, help="Parallel worker processes")

    train = commands.add_parser("train", parents=[common], help="Run the progressive schedule")
    train.add_argument("--resume", nargs="?", const="latest", metavar="CHECKPOINT",
                       help="Continue from a checkpoint (default: latest.vgan)")
    train.add_argument("--max-steps", type=int, metavar="N", help="Stop after N steps (0 = whole schedule)")

    generate = commands.add_parser("generate", parents=[common], help="Sample volumes from a checkpoint")
    generate.add_argument("--checkpoint", metavar="PATH", help="Checkpoint (default: latest.vgan)")
    generate.add_argument("--count", type=positive_int, help="Volumes to generate")
    generate.add_argument("--upsample", type=int, metavar="N", help="Nearest upsample to N^3 (0 = off)")

    commands.add_parser("selftest", parents=[common], help="Run the self-test suites")

    info = commands.add_parser("info", parents=[common], help="Print checkpoint metadata")
    info.add_argument("checkpoint", metavar="CHECKPOINT")
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flags that were given, as nested config sections"""
    overrides: Dict[str, Any] = {}

    def put(section: str, key: str, value):
        if value is not None:
            overrides.setdefault(section, {})[key] = value

    if args.seed is not None:
        overrides["seed"] = args.seed
    put("paths", "out_dir", args.out or os.environ.get("VGAN_OUT_DIR"))
    if args.command == "synthdata":
        put("synthdata", "count", args.count)
        put("synthdata", "dims", list(args.dims) if args.dims else None)
    elif args.command == "preprocess":
        put("data", "eval_count", args.eval_count)
    elif args.command == "augment":
        put("augment", "k", args.k)
        put("augment", "sigma", args.sigma)
        put("augment", "workers", args.workers)
    elif args.command == "train":
        put("training", "max_steps", args.max_steps)
    elif args.command == "generate":
        put("generate", "count", args.count)
        put("generate", "upsample_target", args.upsample)
    return overrides


def run_command(args: argparse.Namespace) -> int:
    from vgan_cli import PipelineCLI

    cli = PipelineCLI(args.config, collect_overrides(args), args.preset,
                      require_seed=args.command not in ("selftest", "info"))

    if args.dry_run and args.command != "train":
        cli._log_success(f"Dry run: configuration for '{args.command}' is valid")
        return EXIT_OK
    if args.command == "synthdata":
        cli.cmd_synthdata()
    elif args.command == "preprocess":
        cli.cmd_preprocess(args.in_dir)
    elif args.command == "augment":
        cli.cmd_augment()
    elif args.command == "train":
        cli.cmd_train(dry_run=args.dry_run, resume=args.resume)
    elif args.command == "generate":
        cli.cmd_generate(args.checkpoint)
    elif args.command == "selftest":
        if not cli.cmd_selftest()["passed"]:
            return EXIT_NUMERIC
    elif args.command == "info":
        cli.cmd_info(args.checkpoint)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    from vgan.core.base import set_verbosity
    from vgan.core.errors import VganError

    set_verbosity("quiet" if args.quiet else "debug" if args.verbose else "normal")
    if not args.quiet:
        print_banner()

    try:
        return run_command(args)
    except KeyboardInterrupt:
        print(colored("\nInterrupted.", "yellow"))
        return EXIT_USAGE
    except VganError as e:
        print(colored(f"❌ {type(e).__name__}: {e}", "red"))
        return e.exit_code
    except ImportError as e:
        print(colored(f"❌ Import error: {e}", "red"))
        print(colored("   Make sure all dependencies are installed: pip install -r requirements.txt", "yellow"))
        return EXIT_USAGE
    except Exception as e:
        print(colored(f"❌ Error running '{args.command}': {e}", "red"))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
