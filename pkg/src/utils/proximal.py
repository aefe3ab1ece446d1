"""
Soft thresholding, residual reweighting, and the objectives the solver family works with.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.client.errors import ConfigError, ShapeError
from src.utils.conv_ops import Code, Dictionary, Signal, apply_adjoint

STEP_RULES = ("adaptive", "initial", "guarded")


@dataclass(frozen=True)
class SolverConfig:
    """
    Parameters of the reweighted shrinkage iteration.

    :ivar lam: Sparsity weight.
    :ivar beta: Balance between the squared-l2 (1) and l1 (0) fidelities.
    :ivar gamma: Step size; ``None`` means derive it from the dictionary with ``step_rule``.
    :ivar steps: Number of iterations.
    :ivar epsilon: Guard added to residual magnitudes before reweighting.
    :ivar step_rule: ``"adaptive"`` rescales the step to the current weights and backtracks on the
        smoothed objective, ``"initial"`` bounds the weights by their first value, ``"guarded"`` by
        ``1/(2 epsilon)``.
    :ivar power_iters: Power iterations used to estimate the operator norm.
    """

    lam: float = 0.05
    beta: float = 0.5
    gamma: Optional[float] = None
    steps: int = 10
    epsilon: float = 1e-3
    step_rule: str = "adaptive"
    power_iters: int = 50

    def __post_init__(self) -> None:
        if not self.lam >= 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}.")
        check_beta(self.beta)
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}.")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}.")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}.")
        if self.step_rule not in STEP_RULES:
            raise ConfigError(
                f"step-rule must be one of {', '.join(STEP_RULES)}, got {self.step_rule!r}."
            )
        if self.power_iters < 1:
            raise ConfigError(f"power-iters must be >= 1, got {self.power_iters}.")


def check_beta(beta: float) -> float:
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must lie in [0, 1], got {beta}.")
    return float(beta)


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """
    Elementwise ``sign(v) * max(|v| - tau, 0)``.

    :raises ConfigError: Raised when ``tau`` is negative.
    """
    if tau < 0:
        raise ConfigError(f"threshold must be >= 0, got {tau}.")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def residual(x: Signal, A: Dictionary, z: Code) -> Signal:
    x = np.asarray(x, dtype=np.float64)
    synthesized = apply_adjoint(A, z)
    if synthesized.shape != x.shape:
        raise ShapeError(f"signal shape {x.shape} does not match synthesis {synthesized.shape}.")
    return x - synthesized


def weights_from_residual(r: Signal, epsilon: float) -> Signal:
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}.")
    return 1.0 / (2.0 * (np.abs(r) + epsilon))


def residual_weights(x: Signal, A: Dictionary, z: Code, epsilon: float) -> Signal:
    """
    ``w = 1 / (2 (|x - A*(z)| + epsilon))``; every entry lies in ``(0, 1/(2 epsilon)]``.
    """
    return weights_from_residual(residual(x, A, z), epsilon)


def elastic_reweight(w: Signal, beta: float) -> Signal:
    """
    ``beta + (1 - beta) w`` elementwise.

    :raises ConfigError: Raised when ``beta`` lies outside [0, 1].
    """
    beta = check_beta(beta)
    return beta + (1.0 - beta) * np.asarray(w, dtype=np.float64)


def l1_norm(v: np.ndarray) -> float:
    return float(np.sum(np.abs(v)))


def l2_fidelity(x: Signal, A: Dictionary, z: Code) -> float:
    r = residual(x, A, z)
    return float(np.vdot(r, r))


def robust_fidelity(x: Signal, A: Dictionary, z: Code) -> float:
    """
    The l1 norm of the residual, ``R(z)``.
    """
    return l1_norm(residual(x, A, z))


def vanilla_objective(x: Signal, A: Dictionary, z: Code, lam: float) -> float:
    """
    ``||x - A*(z)||_2^2 + lam ||z||_1``, without a 1/2 factor.
    """
    return l2_fidelity(x, A, z) + lam * l1_norm(z)


def robust_objective(x: Signal, A: Dictionary, z: Code, lam: float) -> float:
    return robust_fidelity(x, A, z) + lam * l1_norm(z)


def elastic_objective(x: Signal, A: Dictionary, z: Code, lam: float, beta: float) -> float:
    """
    ``(beta/2) ||r||_2^2 + ((1 - beta)/2) ||r||_1 + lam ||z||_1`` with ``r = x - A*(z)``.

    :raises ConfigError: Raised when ``beta`` lies outside [0, 1].
    """
    beta = check_beta(beta)
    r = residual(x, A, z)
    return 0.5 * beta * float(np.vdot(r, r)) + 0.5 * (1.0 - beta) * l1_norm(r) + lam * l1_norm(z)


def smoothed_fidelity(x: Signal, A: Dictionary, z: Code, epsilon: float) -> float:
    """
    ``sum(|r| - epsilon log(1 + |r|/epsilon))``: the guarded l1 fidelity whose quadratic
    majorizer at ``z*`` has exactly the curvature ``residual_weights(x, A, z*, epsilon)``.
    It never exceeds ``R(z)``.
    """
    a = np.abs(residual(x, A, z))
    return float(np.sum(a - epsilon * np.log1p(a / epsilon)))


def smoothed_objective(
    x: Signal, A: Dictionary, z: Code, lam: float, beta: float, epsilon: float
) -> float:
    """
    The elastic objective with ``||r||_1`` replaced by :func:`smoothed_fidelity`.
    This is the quantity a safe solver step can only decrease.
    """
    beta = check_beta(beta)
    r = residual(x, A, z)
    a = np.abs(r)
    smooth = float(np.sum(a - epsilon * np.log1p(a / epsilon)))
    return 0.5 * beta * float(np.vdot(r, r)) + 0.5 * (1.0 - beta) * smooth + lam * l1_norm(z)


def local_upper_bound(
    x: Signal, A: Dictionary, z: Code, z_star: Code, epsilon: float
) -> float:
    """
    The localized upper bound ``U(z, z*)`` of ``R(z)``.

    With ``w`` the guarded weights at ``z*`` this is
    ``||w^{1/2} (x - A*(z))||_2^2 + sum(1/(4w))``, i.e. the quadratic term plus
    ``(R(z*) + epsilon * x.size) / 2``. Then ``U(z, z*) >= R(z)`` for every ``z`` and
    ``0 <= U(z*, z*) - R(z*) <= epsilon * x.size / 2``.

    :return: The bound value.
    :rtype: float
    """
    w = residual_weights(x, A, z_star, epsilon)
    r = residual(x, A, z)
    return float(np.sum(w * r * r) + np.sum(0.25 / w))
