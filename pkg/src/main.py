"""
The main module of the experiment harness.
"""

import argparse
import importlib
import logging
import pkgutil
import sys
from dataclasses import dataclass, field
from pathlib import Path
from time import perf_counter
from typing import Any, Dict, List, Optional, Sequence

import decouple

from src.client.config import Config, ExperimentConfig
from src.client.errors import EDLError, InvariantError
from src.client.logging import InterceptHandler, Logging
from src.utils.report import ResultTable, write_summary


@dataclass
class CommandResult:
    """
    What a command hands back to the harness.

    :ivar table: The CSV rows.
    :ivar summary: Aggregate statistics for the JSON summary.
    :ivar violation: Set when a verified invariant failed; the harness exits with status 4.
    """

    table: ResultTable
    summary: Dict[str, Any] = field(default_factory=dict)
    violation: Optional[str] = None


class Harness:
    """
    Loads the settings, the logger and every command module, then dispatches ``edl <command>``.
    """

    def __init__(self) -> None:
        self.config = Config()
        harness = self.config["harness"]
        self.debug_mode = decouple.config("EDL_DEBUG", default=harness["debug-mode"], cast=bool)
        self.workers = decouple.config("EDL_WORKERS", default=harness["workers"], cast=int)
        self.progress = bool(harness.get("progress", False))
        self.logger = Logging(
            debug_mode=self.debug_mode,
            format=self.config["log"]["format"],
        ).get_logger()
        logging.basicConfig(
            handlers=[InterceptHandler(self.logger)],
            level=0 if self.debug_mode else logging.INFO,
            force=True,
        )
        logging.captureWarnings(True)
        self.commands: Dict[str, "BaseCommand"] = {}
        self.load_commands("src.commands")

    def load_commands(self, package: str) -> None:
        """
        Import every module of ``package`` and call its ``setup`` function.

        :param package: The dotted package name.
        :type package: str
        """
        module = importlib.import_module(package)
        for info in pkgutil.iter_modules(module.__path__):
            name = f"{package}.{info.name}"
            try:
                importlib.import_module(name).setup(self)
            except Exception as e:
                self.logger.error(f"Failed to load command module {name} with exception: {e}")
            else:
                self.logger.debug(f"Loaded command module {name}")

    def add_command(self, command: "BaseCommand") -> None:
        self.commands[command.name] = command

    def parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog="edl", description="Elastic dictionary learning experiments."
        )
        subparsers = parser.add_subparsers(dest="command", required=True)
        for name in sorted(self.commands):
            sub = subparsers.add_parser(name, help=self.commands[name].help)
            sub.add_argument("--config", type=Path, help="experiment config (JSON)")
            sub.add_argument("--out", type=Path, help="CSV output path (stdout if omitted)")
            sub.add_argument("--seed", type=int, help="override the config seed")
            sub.add_argument("--workers", type=int, help="thread-pool size for trials")
        return parser

    def load_experiment(self, path: Optional[Path], seed: Optional[int]) -> ExperimentConfig:
        experiment = (
            ExperimentConfig.from_file(path) if path is not None else ExperimentConfig.from_mapping({})
        )
        if seed is not None:
            experiment = experiment.with_seed(seed)
        return experiment

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """
        Parse ``argv``, run one command and write its outputs.

        :return: The process exit status: 0 on success, 2 for configuration errors,
            3 for solver divergence, 4 for a failed invariant.
        :rtype: int
        """
        args = self.parser().parse_args(argv)
        command = self.commands[args.command]
        if args.workers is not None:
            command.workers = max(1, args.workers)
        try:
            experiment = self.load_experiment(args.config, args.seed)
            self.logger.info(f"Running {command.name} (seed {experiment.seed})")
            start = perf_counter()
            result = command.execute(experiment)
            end = perf_counter()
            result.table.write(args.out)
            summary = write_summary(args.out, result.summary)
            self.logger.info(
                f"Finished {command.name} in {end - start:.2f} seconds, {len(result.table.rows)} rows."
            )
            if summary is not None:
                self.logger.info(f"Summary written to {summary}")
            else:
                self.logger.info(f"Summary: {result.summary}")
            if result.violation:
                raise InvariantError(result.violation)
        except EDLError as e:
            self.logger.error(f"{type(e).__name__}: {e}")
            return e.exit_code
        return 0


class BaseCommand:
    """
    The base command class.
    """

    name: str = ""
    help: str = ""

    def __init__(self, harness: Harness) -> None:
        self.harness = harness
        self.config = harness.config
        self.logger = harness.logger
        self.workers = harness.workers
        self.progress = harness.progress

    def execute(self, experiment: ExperimentConfig) -> CommandResult:
        raise NotImplementedError

    def trials_kwargs(self) -> Dict[str, Any]:
        return {"workers": self.workers, "progress": self.progress, "label": self.name}


def main(argv: Optional[List[str]] = None) -> int:
    return Harness().run(argv)


if __name__ == "__main__":
    sys.exit(main())
