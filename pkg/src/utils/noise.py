"""
Synthetic benchmark instances and impulse-noise corruption.
"""

from dataclasses import dataclass
from typing import Any, Dict, Iterable, Mapping, Tuple, Union

import numpy as np

from src.client.errors import ConfigError
from src.utils.conv_ops import Code, Dictionary, Signal, apply_adjoint, random_dictionary


@dataclass(frozen=True)
class NoiseSpec:
    """
    Impulse corruption: a ``rate`` fraction of entries become 0 or 1.
    """

    rate: float
    seed: int = 0
    kind: str = "impulse"

    def __post_init__(self) -> None:
        if self.kind != "impulse":
            raise ConfigError(f"Unsupported noise kind '{self.kind}'.")
        if not 0.0 <= self.rate <= 1.0:
            raise ConfigError(f"Noise rate must lie in [0, 1], got {self.rate}.")


def noise_levels(presets: Mapping[str, Any]) -> Dict[str, float]:
    """
    Validate the named impulse-noise presets (``L1`` .. ``L5``).

    :raises ConfigError: Raised on a rate outside [0, 1] or when the rates do not grow with the level.

    :return: The presets as ``name -> rate``, in level order.
    :rtype: Dict[str, float]
    """
    levels: Dict[str, float] = {}
    for name in sorted(presets):
        rate = presets[name]
        if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not 0.0 <= rate <= 1.0:
            raise ConfigError(f"Noise preset '{name}' must be a rate in [0, 1], got {rate!r}.")
        levels[name] = float(rate)
    rates = list(levels.values())
    if rates != sorted(rates):
        raise ConfigError("Noise presets must not decrease with the level.")
    return levels


def resolve_levels(
    levels: Iterable[Union[float, str]], presets: Mapping[str, float]
) -> Tuple[float, ...]:
    """
    Turn a list of rates and preset names (``"L1"`` .. ``"L5"``) into rates.

    :raises ConfigError: Raised on an unknown preset or a rate outside [0, 1].

    :return: The rates, in the given order.
    :rtype: Tuple[float, ...]
    """
    rates = []
    for level in levels:
        if isinstance(level, str):
            if level not in presets:
                raise ConfigError(f"Unknown noise preset '{level}'.")
            level = presets[level]
        if isinstance(level, bool) or not isinstance(level, (int, float)):
            raise ConfigError(f"Noise level must be a rate or a preset name, got {level!r}.")
        if not 0.0 <= level <= 1.0:
            raise ConfigError(f"Noise rate must lie in [0, 1], got {level}.")
        rates.append(float(level))
    if not rates:
        raise ConfigError("At least one noise level is required.")
    return tuple(rates)


def generate_impulse_noise(x: Signal, spec: NoiseSpec) -> Signal:
    """
    Replace ``round(rate * x.size)`` entries, drawn without replacement, by 0 or 1 with
    equal probability. The other entries are untouched.

    :param x: The clean signal.
    :type x: Signal
    :param spec: The corruption to apply.
    :type spec: NoiseSpec

    :return: A corrupted copy of ``x``.
    :rtype: Signal
    """
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(spec.seed)
    count = int(round(spec.rate * x.size))
    out = x.copy().reshape(-1)
    if count:
        index = rng.choice(x.size, size=count, replace=False)
        out[index] = rng.integers(0, 2, size=count).astype(np.float64)
    return out.reshape(x.shape)


def planted_problem(problem, rng: np.random.Generator) -> Tuple[Dictionary, Code, Signal]:
    """
    Draw a unit-normalized Gaussian dictionary and a sparse code, and synthesize the signal.

    :param problem: The shapes and planted-code statistics.
    :type problem: src.client.config.ProblemConfig
    :param rng: The trial's random generator.
    :type rng: np.random.Generator

    :return: The dictionary, the planted code and the clean signal.
    :rtype: Tuple[Dictionary, Code, Signal]
    """
    A = random_dictionary(problem.D, problem.C, problem.k, rng)
    size = problem.H * problem.W * problem.D
    count = int(round(problem.density * size))
    z = np.zeros(size)
    support = rng.choice(size, size=count, replace=False)
    low, high = problem.magnitude
    z[support] = rng.uniform(low, high, size=count) * rng.choice((-1.0, 1.0), size=count)
    z = z.reshape(problem.H, problem.W, problem.D)
    return A, z, apply_adjoint(A, z)
