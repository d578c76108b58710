"""Command line: ``dicke-feedback run|list-recipes|validate``."""
import argparse
import asyncio
import sys
from typing import List, Optional

from .config import ExperimentConfig
from .display import Color, DisplayConfig
from .errors import ConfigError, DickeFeedbackError
from .recipes import list_recipes, resolve
from .runner import EXIT_CONFIG, EXIT_IO, ExperimentRunner


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dicke-feedback",
        description="Feedback-controlled Dicke model: spectra, exponents, trajectories and mean-field scans")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a config file or a bundled recipe")
    run.add_argument("config", help="path to a .yaml/.json config, or a recipe name such as fig2")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--out", default=None, help="override the output directory")
    run.add_argument("--quiet", action="store_true", help="no console output; events.log is still written")

    sub.add_parser("list-recipes", help="show the bundled figure recipes")

    validate = sub.add_parser("validate", help="check a config against the schema")
    validate.add_argument("config")
    return parser


def _load(name: str) -> ExperimentConfig:
    try:
        return ExperimentConfig(str(resolve(name)))
    except OSError as e:
        raise ConfigError(f"cannot read {name}: {e}") from e


def _error(message: str) -> None:
    print(f"{Color.RED}[ERROR] {message}{Color.RESET}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        runner = ExperimentRunner(_load(args.config), out_dir=args.out, seed=args.seed,
                                  threads=args.threads, quiet=args.quiet)
    except DickeFeedbackError as e:
        _error(str(e))
        return EXIT_CONFIG
    result = asyncio.run(runner.run())
    if result.exit_code and result.error:
        _error(result.error)
    if not args.quiet and result.out_dir is not None:
        print(f"artifacts in {result.out_dir}")
    return result.exit_code


def cmd_list(args) -> int:
    rows = list_recipes()
    print(DisplayConfig(colored_output=sys.stdout.isatty()).format_table(
        rows, ["name", "kind", "expected_runtime", "acceptance"]))
    return 0


def cmd_validate(args) -> int:
    try:
        config = _load(args.config)
        config.validate_config()
        ExperimentRunner.check(config)
    except DickeFeedbackError as e:
        _error(str(e))
        return EXIT_CONFIG
    print(f"{args.config}: ok ({config.kind.value})")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "list-recipes": cmd_list, "validate": cmd_validate}
    try:
        return handlers[args.command](args)
    except OSError as e:
        _error(str(e))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
