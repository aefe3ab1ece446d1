"""
Command module for per-iteration convergence traces on the synthetic benchmark.
"""

from typing import List, Tuple

import numpy as np

from src.client.config import ExperimentConfig
from src.main import BaseCommand, CommandResult, Harness
from src.utils.noise import NoiseSpec, generate_impulse_noise, planted_problem
from src.utils.solver import IterationTrace, check_descent, solve
from src.utils.report import ResultTable
from src.utils.trials import run_trials

EARLY_STEPS = 3
EARLY_SHARE = 0.9


def early_share(values: List[float], early: int = EARLY_STEPS) -> float:
    """
    Fraction of the total decrease reached after ``early`` steps (1 when nothing decreases).
    """
    total = values[0] - values[-1]
    if total <= 0:
        return 1.0
    return (values[0] - values[min(early, len(values) - 1)]) / total


def mode_of(beta: float) -> str:
    if beta == 1.0:
        return "vanilla"
    if beta == 0.0:
        return "robust"
    return "elastic"


class Convergence(BaseCommand):
    """
    Solve planted instances and emit every iterate's objective components.
    The signal is corrupted at the first configured noise level.
    """

    name = "convergence"
    help = "per-step objective traces (fidelities, sparsity, upper bound)"

    def trial(
        self, experiment: ExperimentConfig, trial: int, rng: np.random.Generator
    ) -> Tuple[int, IterationTrace]:
        A, _, x = planted_problem(experiment.problem, rng)
        noise = NoiseSpec(experiment.levels[0], seed=int(rng.integers(2**31)))
        _, trace = solve(generate_impulse_noise(x, noise), A, experiment.solver)
        self.logger.debug(f"[convergence] trial {trial}: {trace.obj_elastic[0]:.6g} -> {trace.obj_elastic[-1]:.6g}")
        return trial, trace

    def execute(self, experiment: ExperimentConfig) -> CommandResult:
        results = run_trials(
            lambda trial, rng: self.trial(experiment, trial, rng),
            experiment.trials,
            experiment.seed,
            **self.trials_kwargs(),
        )
        table = ResultTable(("trial", "step") + IterationTrace.COLUMNS, experiment.canonical())
        mode = mode_of(experiment.solver.beta)
        shares, descents, sandwiches = [], [], []
        for trial, trace in results:
            for step, row in enumerate(trace.rows()):
                table.add(trial, step, *row)
            shares.append(early_share(trace.obj_elastic))
            descents.append(check_descent(trace, mode).ok)
            sandwiches.append(
                all(
                    trace.fid_l1[t] <= trace.upper_bound[t] + 1e-8
                    for t in range(1, len(trace))
                )
            )
        fast = float(np.mean([share >= EARLY_SHARE for share in shares]))
        summary = {
            "trials": len(results),
            "mode": mode,
            "early_share_mean": float(np.mean(shares)),
            "fast_convergence_fraction": fast,
            "descent_fraction": float(np.mean(descents)),
            "sandwich_fraction": float(np.mean(sandwiches)),
            "claims": {
                "fast_convergence": fast >= 0.9,
                "descent": all(descents),
                "sandwich": all(sandwiches),
            },
        }
        return CommandResult(table, summary)


def setup(harness: Harness) -> None:
    """
    The setup function of the command module.
    """
    harness.add_command(Convergence(harness))
