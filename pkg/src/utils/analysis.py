"""
Influence-function analysis of the single-step vanilla, robust and elastic operators.

Every operator acts on the residual ``E(x) = x - A*(A(x))`` with weights
``w = 1 / (2 (|E(x)| + epsilon))`` taken at the clean point.
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from src.client.errors import ConfigError, ShapeError
from src.utils.conv_ops import Dictionary, Signal, apply, apply_adjoint
from src.utils.proximal import check_beta, weights_from_residual


class Kind(Enum):
    VANILLA = "vanilla"
    ROBUST = "robust"
    ELASTIC = "elastic"


@dataclass(frozen=True)
class OperatorKind:
    """
    Which operator to analyse; ``beta`` only matters for :attr:`Kind.ELASTIC`.
    """

    kind: Kind
    beta: float = 0.5
    epsilon: float = 0.01

    def __post_init__(self) -> None:
        check_beta(self.beta)
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}.")

    @property
    def mix(self) -> float:
        """
        Weight of the unweighted residual: 1 for vanilla, 0 for robust, ``beta`` for elastic.
        """
        return {Kind.VANILLA: 1.0, Kind.ROBUST: 0.0, Kind.ELASTIC: self.beta}[self.kind]


class InfluenceEstimate(NamedTuple):
    """
    A difference quotient and the entries where the residual sign flipped between
    ``x`` and the contaminated point (the closed form is not guaranteed there).
    """

    values: Signal
    sign_flips: np.ndarray

    @property
    def stable(self) -> np.ndarray:
        return ~self.sign_flips


def residual_operator(A: Dictionary, x: Signal) -> Signal:
    """
    ``E(x) = x - A*(A(x))``.
    """
    x = np.asarray(x, dtype=np.float64)
    return x - apply_adjoint(A, apply(A, x))


def apply_operator(kind: OperatorKind, A: Dictionary, x: Signal) -> Signal:
    """
    Vanilla gives ``E(x)``, robust ``w * E(x)``, elastic ``(beta + (1 - beta) w) * E(x)``.
    """
    e = residual_operator(A, x)
    if kind.kind is Kind.VANILLA:
        return e
    w = weights_from_residual(e, kind.epsilon)
    return (kind.mix + (1.0 - kind.mix) * w) * e


def influence_closed_form(
    kind: OperatorKind, A: Dictionary, x: Signal, delta: Signal
) -> Signal:
    """
    The exact influence function at ``x`` towards ``delta``:
    ``E(delta - x)`` scaled by 1 (vanilla), ``2 epsilon w^2`` (robust) or
    ``beta + 2 (1 - beta) epsilon w^2`` (elastic).

    :raises ShapeError: Raised when ``delta`` and ``x`` differ in shape.
    """
    x = np.asarray(x, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if x.shape != delta.shape:
        raise ShapeError(f"delta shape {delta.shape} does not match x shape {x.shape}.")
    direction = residual_operator(A, delta - x)
    if kind.kind is Kind.VANILLA:
        return direction
    w = weights_from_residual(residual_operator(A, x), kind.epsilon)
    return (kind.mix + 2.0 * (1.0 - kind.mix) * kind.epsilon * w * w) * direction


def influence_numeric(
    kind: OperatorKind, A: Dictionary, x: Signal, delta: Signal, t: float
) -> InfluenceEstimate:
    """
    The difference quotient ``(P(t delta + (1 - t) x) - P(x)) / t``.

    :param t: The contamination size, in ``(0, 0.1]``.
    :type t: float

    :raises ConfigError: Raised when ``t`` is out of range.

    :return: The quotient with the sign-flip mask.
    :rtype: InfluenceEstimate
    """
    if not 0.0 < t <= 0.1:
        raise ConfigError(f"t must lie in (0, 0.1], got {t}.")
    x = np.asarray(x, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if x.shape != delta.shape:
        raise ShapeError(f"delta shape {delta.shape} does not match x shape {x.shape}.")
    x_t = t * delta + (1.0 - t) * x
    quotient = (apply_operator(kind, A, x_t) - apply_operator(kind, A, x)) / t
    flips = np.sign(residual_operator(A, x_t)) != np.sign(residual_operator(A, x))
    return InfluenceEstimate(quotient, flips)


def relative_error(estimate: InfluenceEstimate, closed: Signal) -> float:
    """
    ``||numeric - closed|| / ||closed||`` over the sign-stable entries.
    """
    mask = estimate.stable
    denominator = np.linalg.norm(closed[mask])
    numerator = np.linalg.norm(estimate.values[mask] - closed[mask])
    if denominator == 0.0:
        return float(numerator)
    return float(numerator / denominator)


def convergence_slope(ts: Sequence[float], errors: Sequence[float]) -> float:
    """
    Least-squares slope of ``log(error)`` against ``log(t)``.

    :raises ConfigError: Raised with fewer than two points or a non-positive value.
    """
    ts = np.asarray(ts, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if ts.size < 2 or ts.size != errors.size:
        raise ConfigError("convergence_slope needs two or more matching (t, error) pairs.")
    if np.any(ts <= 0) or np.any(errors <= 0):
        raise ConfigError("convergence_slope needs positive t and error values.")
    slope, _ = np.polyfit(np.log(ts), np.log(errors), 1)
    return float(slope)
