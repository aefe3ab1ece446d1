"""
Command module sweeping the sparsity weight on planted instances.
"""

from dataclasses import replace
from typing import List

import numpy as np

from src.client.config import ExperimentConfig
from src.main import BaseCommand, CommandResult, Harness
from src.utils.conv_ops import apply_adjoint
from src.utils.noise import NoiseSpec, generate_impulse_noise, planted_problem
from src.utils.report import ResultTable
from src.utils.solver import resolve_step, solve
from src.utils.trials import run_trials


class LambdaSweep(BaseCommand):
    """
    Solve each instance once per ``sweep.lambdas`` entry. The step size is resolved once
    per instance and shared across the grid.
    """

    name = "lambda-sweep"
    help = "code density, sparsity and fidelity along a grid of lambda values"

    def trial(self, experiment: ExperimentConfig, trial: int, rng: np.random.Generator) -> List[tuple]:
        A, _, x = planted_problem(experiment.problem, rng)
        noisy = generate_impulse_noise(x, NoiseSpec(experiment.levels[0], seed=int(rng.integers(2**31))))
        base = resolve_step(noisy, A, experiment.solver)
        rows = []
        for lam in experiment.sweep.lambdas:
            z, trace = solve(noisy, A, replace(base, lam=lam))
            recon = float(np.linalg.norm(apply_adjoint(A, z) - x) / max(np.linalg.norm(x), 1e-300))
            rows.append(
                (trial, lam, trace.density[-1], trace.sparsity_l1[-1], trace.fid_l2[-1], trace.fid_l1[-1], recon)
            )
        return rows

    def execute(self, experiment: ExperimentConfig) -> CommandResult:
        results = run_trials(
            lambda trial, rng: self.trial(experiment, trial, rng),
            experiment.trials,
            experiment.seed,
            **self.trials_kwargs(),
        )
        table = ResultTable(
            ("trial", "lambda", "density", "sparsity_l1", "fid_l2", "fid_l1", "recon_error"),
            experiment.canonical(),
        )
        monotone = []
        for rows in results:
            table.extend(rows)
            densities = [row[2] for row in rows]
            monotone.append(all(b <= a for a, b in zip(densities, densities[1:])))
        fraction = float(np.mean(monotone))
        if fraction < 1.0:
            self.logger.warning(f"[lambda-sweep] density increased along the grid in {1 - fraction:.0%} of trials")
        grid = experiment.sweep.lambdas
        summary = {
            "trials": len(results),
            "lambdas": list(grid),
            "mean_density": [
                float(np.mean([rows[i][2] for rows in results])) for i in range(len(grid))
            ],
            "monotone_fraction": fraction,
            "claims": {"density_non_increasing": fraction == 1.0},
        }
        return CommandResult(table, summary)


def setup(harness: Harness) -> None:
    """
    The setup function of the command module.
    """
    harness.add_command(LambdaSweep(harness))
