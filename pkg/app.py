import argparse
import json
import sys
from datetime import datetime

import yaml
from loguru import logger
from pydantic import ValidationError

from src.config import load_experiment_configs, preset_path, read_config
from src.diagnose_workflow import run_diagnostics
from src.oracle import evaluate_event_file
from src.report import ReportWriteError
from src.workflow import run_experiment

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_WRITE = 3


def block_rule(value: str):
    if value == "sqrt":
        return value
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"blocks must be 'sqrt' or an integer, got '{value}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--replicates", type=int, help="number of simulated windows R")
    common.add_argument("--n", type=int, help="window length")
    common.add_argument("--blocks", type=block_rule, help="block count k or 'sqrt'")
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument("--format", dest="formats", action="append", choices=["json", "csv"],
                        help="report format; repeat for several")
    common.add_argument("--workers", dest="num_workers", type=int, help="replicate worker threads")

    parser = argparse.ArgumentParser(description="Simulate and estimate the multivariate upcrossings index")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("run", parents=[common], help="run the experiments of a config file").add_argument("config")
    commands.add_parser("preset", parents=[common], help="run a shipped preset").add_argument("name")
    commands.add_parser("diagnose", parents=[common], help="side-condition diagnostics").add_argument("config")
    commands.add_parser("oracle", help="exact probability of an event file").add_argument("event_file")
    return parser


def overrides_from(args) -> dict:
    keys = ("seed", "replicates", "n", "blocks", "output_dir", "formats", "num_workers")
    return {key: getattr(args, key, None) for key in keys}


def dispatch(args) -> None:
    if args.command == "oracle":
        result = evaluate_event_file(read_config(args.event_file))
        print(json.dumps(result, indent=2))
        return

    config_path = preset_path(args.name) if args.command == "preset" else args.config
    configs = load_experiment_configs(config_path, overrides_from(args))
    for cfg in configs:
        logger.info(f"\n{json.dumps(cfg.model_dump(), indent=4)}")
        if args.command == "diagnose":
            _, written = run_diagnostics(cfg)
        else:
            _, written = run_experiment(cfg)
        logger.info(f"Results of '{cfg.name}' in {cfg.output_dir} ({len(written)} files)")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        dispatch(args)
    except ReportWriteError as e:
        logger.error(str(e))
        return EXIT_WRITE
    except (ValidationError, ValueError, FileNotFoundError, yaml.YAMLError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    log_file = f"logs/{datetime.now().strftime('%Y-%m-%d')}.log"
    logger.add(log_file, rotation="1 day", mode="a")

    sys.exit(main())
