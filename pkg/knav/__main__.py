import logging

# the linter will complain about this, but the logging must be configured before importing all the other modules
# loglevel will be adjusted later, INFO is just for the startup

logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)

from knav.commands import SimGenCommand, LearnCommand, ForecastCommand, NavigateCommand, VerifyCommand, ReplayCommand
from knav.config import Config
from knav.config.error import ConfigError
from knav.formats import FormatError
from knav.property import PropertyError
from knav.version import knav_version
from pathlib import Path
import argparse
import os
import sys

OUTPUT_ENVIRONMENT = "KNAV_OUTPUT_DIR"

# global options that take a value; "--out" is stripped from recorded arguments
VALUE_OPTIONS = ("-c", "--config", "-o", "--out", "--seed", "--threads")


def recorded_arguments(argv, commands):
    """
    argv without the output directory option, which a manifest records separately
    """
    result = []
    skip = False
    for index, token in enumerate(argv):
        if skip:
            skip = False
            continue
        if token in commands:
            return result + list(argv[index:])
        if token in ("-o", "--out"):
            skip = True
            continue
        if token.startswith("--out=") or (token.startswith("-o") and token != "-o"):
            continue
        result.append(token)
    return result


def build_parser():
    parser = argparse.ArgumentParser(description="KoopNav - distributed Koopman learning for navigation among moving obstacles")
    parser.add_argument(
        "-c",
        "--config",
        action="store",
        help="Read configuration from specified file",
        metavar="configfile",
        type=Path,
    )
    parser.add_argument("-o", "--out", action="store", help="Output directory", metavar="directory", type=Path)
    parser.add_argument("--seed", action="store", type=int, help="Override the configured seed")
    parser.add_argument("--threads", action="store", type=int, help="Worker threads for agent rounds and mixture fits")
    parser.add_argument("-v", "--version", action="store_true", help="Show the software version")
    parser.add_argument("--debug", action="store_true", help="Set loglevel to DEBUG")

    subparsers = parser.add_subparsers(title="Commands", dest="command")

    simgen_parser = subparsers.add_parser("simgen", help="Generate a synthetic density snapshot sequence")
    simgen_parser.set_defaults(cls=SimGenCommand)

    learn_parser = subparsers.add_parser("learn", help="Learn the operator with the distributed algorithm")
    learn_parser.add_argument("data", nargs="?", type=Path, help="Snapshot file (generated from the scenario if omitted)")
    learn_parser.set_defaults(cls=LearnCommand)

    forecast_parser = subparsers.add_parser("forecast", help="Forecast densities and derive obstacle polytopes")
    forecast_parser.add_argument("operator", type=Path, help="Operator matrix file")
    forecast_parser.add_argument("data", type=Path, help="Snapshot file")
    forecast_parser.add_argument("--horizon", type=int, help="Forecast horizon (default: forecast.horizon)")
    forecast_parser.add_argument("--origin", type=int, help="0-based frame to forecast from (default: the last one)")
    forecast_parser.set_defaults(cls=ForecastCommand)

    navigate_parser = subparsers.add_parser("navigate", help="Run the closed-loop navigation scenario")
    navigate_parser.set_defaults(cls=NavigateCommand)

    verify_parser = subparsers.add_parser("verify", help="Run the invariant suite on a data set")
    verify_parser.add_argument("data", nargs="?", type=Path, help="Snapshot file (generated from the scenario if omitted)")
    verify_parser.set_defaults(cls=VerifyCommand)

    replay_parser = subparsers.add_parser("replay", help="Re-run a recorded command and compare its outputs")
    replay_parser.add_argument("manifest", type=Path, help="Run manifest")
    replay_parser.add_argument("--into", type=Path, help="Output directory (default: the recorded one)")
    replay_parser.set_defaults(cls=ReplayCommand)

    return parser, subparsers.choices


def load_config(args) -> Config:
    config = Config(args.config)
    if args.out is not None:
        config.override("core", "output_directory", str(args.out))
    elif OUTPUT_ENVIRONMENT in os.environ:
        config.override("core", "output_directory", os.environ[OUTPUT_ENVIRONMENT])
    if args.seed is not None:
        config.override("core", "seed", args.seed)
    if args.threads is not None:
        config.override("core", "threads", args.threads)
    return config.validateConfig()


def run_command(parser, args):
    if not hasattr(args, "cls"):
        parser.print_help()
        return 2

    try:
        config = load_config(args)
        if not args.debug:
            logging.getLogger().setLevel(config.section("core")["log_level"])
        command = args.cls(config)
        return command.run(args)
    except (ConfigError, PropertyError, FormatError) as e:
        logger.error("%s", e)
        return 2
    except FileNotFoundError as e:
        logger.error("input file missing: %s", e.filename)
        return 2
    except Exception as e:
        logger.error("Error running command: %s", e)
        logger.debug("traceback", exc_info=True)
        return 1


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    parser, commands = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code

    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)

    if args.version:
        print("KoopNav version {version}".format(version=knav_version))
        return 0

    args.arguments = recorded_arguments(argv, commands)
    return run_command(parser, args)


if __name__ == "__main__":
    sys.exit(main())
