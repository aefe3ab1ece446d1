"""
Command module for the adjointness check of the convolution operator pair.
"""

from typing import Callable

import numpy as np

from src.client.config import ExperimentConfig
from src.main import BaseCommand, CommandResult, Harness
from src.utils.conv_ops import apply, apply_adjoint, flip_kernels
from src.utils.report import ResultTable
from src.utils.trials import run_trials

TOLERANCE = 1e-8


def mismatched_adjoint(A: np.ndarray, z: np.ndarray) -> np.ndarray:
    """
    A deliberately wrong adjoint (kernels not flipped), used as a negative control.
    """
    return apply_adjoint(flip_kernels(A), z)


class AdjointCheck(BaseCommand):
    """
    Random ``(A, x, z)`` triples; each reports ``|<A(x), z> - <x, A*(z)>| / (1 + |<A(x), z>|)``.
    Shapes are drawn per trial with ``problem`` as the upper bounds.
    """

    name = "adjoint-check"
    help = "verify <A(x), z> = <x, A*(z)> on random instances"

    def __init__(self, harness: Harness) -> None:
        super().__init__(harness)
        self.adjoint: Callable[[np.ndarray, np.ndarray], np.ndarray] = apply_adjoint

    def trial(self, experiment: ExperimentConfig, trial: int, rng: np.random.Generator) -> tuple:
        problem = experiment.problem
        H = int(rng.integers(1, problem.H + 1))
        W = int(rng.integers(1, problem.W + 1))
        C = int(rng.integers(1, problem.C + 1))
        D = int(rng.integers(1, problem.D + 1))
        k = int(rng.choice(np.arange(1, problem.k + 1, 2)))
        A = rng.standard_normal((D, C, k, k))
        x = rng.standard_normal((H, W, C))
        z = rng.standard_normal((H, W, D))
        forward = float(np.vdot(apply(A, x), z))
        backward = float(np.vdot(x, self.adjoint(A, z)))
        discrepancy = abs(forward - backward) / (1.0 + abs(forward))
        return trial, H, W, C, D, k, forward, backward, discrepancy

    def execute(self, experiment: ExperimentConfig) -> CommandResult:
        rows = run_trials(
            lambda trial, rng: self.trial(experiment, trial, rng),
            experiment.trials,
            experiment.seed,
            **self.trials_kwargs(),
        )
        table = ResultTable(
            ("trial", "H", "W", "C", "D", "k", "forward", "backward", "discrepancy"),
            experiment.canonical(),
        )
        table.extend(rows)
        worst = max(row[-1] for row in rows)
        failures = [row[0] for row in rows if row[-1] > TOLERANCE]
        summary = {
            "trials": len(rows),
            "max_discrepancy": worst,
            "failures": len(failures),
            "claims": {"adjointness": not failures},
        }
        violation = None
        if failures:
            violation = (
                f"adjointness failed on {len(failures)} trial(s), first {failures[0]}, "
                f"max discrepancy {worst:.3e}"
            )
        return CommandResult(table, summary, violation)


def setup(harness: Harness) -> None:
    """
    The setup function of the command module.
    """
    harness.add_command(AdjointCheck(harness))
