"""
Seeded trial runner. Trial ``i`` always draws from ``default_rng([seed, i])``, so the
results do not depend on the worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

import numpy as np
from tqdm import tqdm

T = TypeVar("T")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def run_trials(
    fn: Callable[[int, np.random.Generator], T],
    count: int,
    seed: int,
    workers: int = 1,
    progress: bool = False,
    label: str = "trials",
) -> List[T]:
    """
    Run ``fn(trial, rng)`` for every trial and return the results in trial order.

    :param fn: The trial body; it must not share mutable state across trials.
    :type fn: Callable[[int, np.random.Generator], T]
    :param count: The number of trials.
    :type count: int
    :param seed: The master seed.
    :type seed: int
    :param workers: Thread-pool size; 1 runs serially.
    :type workers: int
    :param progress: Show a progress bar on stderr.
    :type progress: bool
    :param label: The progress-bar description.
    :type label: str

    :return: One result per trial.
    :rtype: List[T]
    """

    def body(trial: int) -> T:
        return fn(trial, trial_rng(seed, trial))

    with tqdm(total=count, desc=label, disable=not progress, leave=False) as bar:
        if workers <= 1:
            results = []
            for trial in range(count):
                results.append(body(trial))
                bar.update(1)
            return results
        results = []
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(body, range(count)):
                results.append(result)
                bar.update(1)
        return results
