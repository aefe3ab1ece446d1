"""
Command module comparing closed-form and numeric influence functions.
"""

import math
from typing import Dict, List

import numpy as np

from src.client.config import ExperimentConfig
from src.client.errors import ConfigError
from src.main import BaseCommand, CommandResult, Harness
from src.utils.analysis import (
    Kind,
    OperatorKind,
    convergence_slope,
    influence_closed_form,
    influence_numeric,
    relative_error,
    residual_operator,
)
from src.utils.conv_ops import random_dictionary
from src.utils.report import ResultTable
from src.utils.trials import run_trials

VANILLA_TOLERANCE = 1e-10
INTERPOLATION_TOLERANCE = 1e-12
MIN_SLOPE = 0.9


class Influence(BaseCommand):
    """
    For every trial draw ``A`` (scaled atoms), a clean point ``x`` in ``[0.5, 1.5]`` and a
    contamination target ``delta``, then sweep the kinds over the contamination sizes.
    """

    name = "influence"
    help = "closed-form vs numeric influence functions and their convergence order"

    def kinds(self, experiment: ExperimentConfig) -> List[OperatorKind]:
        settings = experiment.influence
        return [
            OperatorKind(Kind.VANILLA, epsilon=settings.epsilon),
            OperatorKind(Kind.ROBUST, epsilon=settings.epsilon),
            OperatorKind(Kind.ELASTIC, beta=settings.beta, epsilon=settings.epsilon),
        ]

    def trial(self, experiment: ExperimentConfig, trial: int, rng: np.random.Generator) -> Dict:
        problem, settings = experiment.problem, experiment.influence
        A = settings.scale * random_dictionary(problem.D, problem.C, problem.k, rng)
        x = rng.uniform(0.5, 1.5, size=(problem.H, problem.W, problem.C))
        delta = rng.standard_normal(x.shape)

        rows, closed, slopes = [], {}, {}
        for kind in self.kinds(experiment):
            closed[kind.kind] = influence_closed_form(kind, A, x, delta)
            norm = float(np.linalg.norm(closed[kind.kind]))
            errors = []
            for t in settings.ts:
                estimate = influence_numeric(kind, A, x, delta, t)
                error = relative_error(estimate, closed[kind.kind])
                errors.append(error)
                rows.append(
                    [trial, kind.kind.value, t, norm, float(np.linalg.norm(estimate.values)),
                     error, int(estimate.sign_flips.sum())]
                )
            slope = math.nan
            if kind.kind is not Kind.VANILLA and len(errors) > 1:
                try:
                    slope = convergence_slope(settings.ts, errors)
                except ConfigError:
                    self.logger.warning(f"[influence] trial {trial}: no slope for {kind.kind.value}")
            slopes[kind.kind.value] = slope
            for row in rows[-len(settings.ts):]:
                row.append(slope)

        beta = settings.beta
        mixed = beta * closed[Kind.VANILLA] + (1.0 - beta) * closed[Kind.ROBUST]
        scale = max(1.0, float(np.max(np.abs(closed[Kind.ELASTIC]))))
        interpolation = float(np.max(np.abs(closed[Kind.ELASTIC] - mixed))) / scale

        large = np.abs(residual_operator(A, x)) >= 1.0
        robust, elastic, vanilla = (np.abs(closed[k][large]) for k in (Kind.ROBUST, Kind.ELASTIC, Kind.VANILLA))
        damping = bool(np.all(robust <= elastic + 1e-12) and np.all(elastic <= vanilla + 1e-12))
        return {
            "rows": [tuple(row) for row in rows],
            "slopes": slopes,
            "interpolation": interpolation,
            "damping": damping,
        }

    def execute(self, experiment: ExperimentConfig) -> CommandResult:
        results = run_trials(
            lambda trial, rng: self.trial(experiment, trial, rng),
            experiment.trials,
            experiment.seed,
            **self.trials_kwargs(),
        )
        table = ResultTable(
            ("trial", "kind", "t", "closed_norm", "numeric_norm", "rel_error", "sign_flips", "slope"),
            experiment.canonical(),
        )
        for result in results:
            table.extend(result["rows"])

        vanilla = max(row[5] for result in results for row in result["rows"] if row[1] == "vanilla")
        slopes = {
            kind: [r["slopes"][kind] for r in results if not math.isnan(r["slopes"][kind])]
            for kind in ("robust", "elastic")
        }
        interpolation = max(r["interpolation"] for r in results)
        summary = {
            "trials": len(results),
            "vanilla_max_rel_error": vanilla,
            "min_slope": {kind: min(values) if values else None for kind, values in slopes.items()},
            "interpolation_max_error": interpolation,
            "damping_fraction": float(np.mean([r["damping"] for r in results])),
            "claims": {
                "vanilla_exact": vanilla <= VANILLA_TOLERANCE,
                "convergence_order": all(
                    values and min(values) >= MIN_SLOPE for values in slopes.values()
                ),
                "interpolation": interpolation <= INTERPOLATION_TOLERANCE,
                "damping_ordering": all(r["damping"] for r in results),
            },
        }
        violation = None
        if interpolation > INTERPOLATION_TOLERANCE:
            violation = f"elastic influence is not the beta-mixture of vanilla and robust ({interpolation:.3e})"
        return CommandResult(table, summary, violation)


def setup(harness: Harness) -> None:
    """
    The setup function of the command module.
    """
    harness.add_command(Influence(harness))
