"""
The reweighted iterative shrinkage-thresholding solver for vanilla, robust and elastic coding.
"""

from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from src.client.errors import ConfigError, ShapeError, SolverDivergenceError
from src.utils.conv_ops import Code, Dictionary, Signal, apply, operator_norm_sq
from src.utils.proximal import (
    SolverConfig,
    elastic_reweight,
    l1_norm,
    local_upper_bound,
    residual,
    smoothed_objective,
    soft_threshold,
    weights_from_residual,
)

MODES = ("vanilla", "robust", "elastic")
DESCENT_TOLERANCE = 1e-8
WEIGHT_QUANTILE = 0.1


@dataclass
class IterationTrace:
    """
    Per-iterate diagnostics; index 0 is the initial code, so a full trace has ``steps + 1`` entries.

    ``upper_bound[t]`` is ``U(z_t, z_{t-1})`` (``U(z_0, z_0)`` at ``t = 0``) and
    ``tangent[t]`` is ``U(z_t, z_t)``.
    """

    lam: float
    beta: float
    epsilon: float
    obj_elastic: List[float] = field(default_factory=list)
    fid_l2: List[float] = field(default_factory=list)
    fid_l1: List[float] = field(default_factory=list)
    fid_smoothed: List[float] = field(default_factory=list)
    sparsity_l1: List[float] = field(default_factory=list)
    density: List[float] = field(default_factory=list)
    upper_bound: List[float] = field(default_factory=list)
    tangent: List[float] = field(default_factory=list)

    COLUMNS = (
        "obj_elastic",
        "fid_l2",
        "fid_l1",
        "sparsity_l1",
        "density",
        "upper_bound",
        "obj_smoothed",
        "tangent",
    )

    def __len__(self) -> int:
        return len(self.obj_elastic)

    def record(self, x: Signal, A: Dictionary, z: Code, z_prev: Optional[Code]) -> None:
        """
        Append the diagnostics of iterate ``z``, whose predecessor is ``z_prev``.
        """
        r = residual(x, A, z)
        a = np.abs(r)
        l2 = float(np.vdot(r, r))
        l1 = float(np.sum(a))
        sparsity = l1_norm(z)
        self.fid_l2.append(l2)
        self.fid_l1.append(l1)
        self.fid_smoothed.append(float(np.sum(a - self.epsilon * np.log1p(a / self.epsilon))))
        self.sparsity_l1.append(sparsity)
        self.density.append(float(np.count_nonzero(z)) / z.size)
        self.obj_elastic.append(
            0.5 * self.beta * l2 + 0.5 * (1.0 - self.beta) * l1 + self.lam * sparsity
        )
        anchor = z if z_prev is None else z_prev
        self.upper_bound.append(local_upper_bound(x, A, z, anchor, self.epsilon))
        self.tangent.append(local_upper_bound(x, A, z, z, self.epsilon))

    @property
    def obj_smoothed(self) -> List[float]:
        return [
            0.5 * self.beta * l2 + 0.5 * (1.0 - self.beta) * s + self.lam * sp
            for l2, s, sp in zip(self.fid_l2, self.fid_smoothed, self.sparsity_l1)
        ]

    def objective(self, mode: str) -> List[float]:
        """
        The objective a safe step decreases in ``mode``.

        :param mode: One of ``vanilla``, ``robust``, ``elastic``.
        :type mode: str

        :raises ConfigError: Raised on an unknown mode.
        """
        if mode == "vanilla":
            return [0.5 * l2 + self.lam * sp for l2, sp in zip(self.fid_l2, self.sparsity_l1)]
        if mode == "robust":
            return [0.5 * s + self.lam * sp for s, sp in zip(self.fid_smoothed, self.sparsity_l1)]
        if mode == "elastic":
            return self.obj_smoothed
        raise ConfigError(f"Unknown mode '{mode}', expected one of {', '.join(MODES)}.")

    def rows(self) -> List[Tuple[float, ...]]:
        smoothed = self.obj_smoothed
        return [
            (
                self.obj_elastic[t],
                self.fid_l2[t],
                self.fid_l1[t],
                self.sparsity_l1[t],
                self.density[t],
                self.upper_bound[t],
                smoothed[t],
                self.tangent[t],
            )
            for t in range(len(self))
        ]


class DescentReport(NamedTuple):
    ok: bool
    step: Optional[int]


def init_code(x: Signal, A: Dictionary) -> Code:
    """
    The starting code ``z_0 = A(x)``.
    """
    return apply(A, x)


def default_step_size(x: Signal, A: Dictionary, cfg: SolverConfig) -> float:
    """
    ``0.9 / L`` for ``beta = 1``; otherwise ``0.9 / (L * max(beta, (1 - beta) max(w_0) + beta))``
    where ``L`` estimates the squared operator norm and ``w_0`` are the weights at ``z_0``.
    """
    L = operator_norm_sq(A, x.shape[:2], cfg.power_iters)
    if L == 0.0:
        return 1.0
    if cfg.beta == 1.0:
        return 0.9 / L
    w0 = weights_from_residual(residual(x, A, init_code(x, A)), cfg.epsilon)
    return 0.9 / (L * max(cfg.beta, (1.0 - cfg.beta) * float(np.max(w0)) + cfg.beta))


def guarded_step_size(A: Dictionary, shape: Tuple[int, int], cfg: SolverConfig) -> float:
    """
    A step that keeps majorized descent at every iteration: it bounds the weights by
    their ceiling ``1/(2 epsilon)`` instead of their first value.
    """
    L = operator_norm_sq(A, shape, cfg.power_iters)
    if L == 0.0:
        return 1.0
    return 0.9 / (L * (cfg.beta + (1.0 - cfg.beta) / (2.0 * cfg.epsilon)))


def adaptive_step_size(
    x: Signal, A: Dictionary, z: Code, cfg: SolverConfig, L: Optional[float] = None
) -> float:
    """
    ``0.9 / (L * max(beta, (1 - beta) w_q))`` where ``w_q`` is the ``WEIGHT_QUANTILE``
    quantile of the weights at ``z``.

    Pixels the code already fits carry weights near ``1/(2 epsilon)``; taking a low
    quantile sizes the step to the residuals still being fitted instead.

    :param L: The squared operator norm, estimated when omitted.
    :type L: float, optional

    :return: The trial step at ``z`` (``0.9 / L`` for ``beta = 1``).
    :rtype: float
    """
    if L is None:
        L = operator_norm_sq(A, x.shape[:2], cfg.power_iters)
    if L == 0.0:
        return 1.0
    if cfg.beta == 1.0:
        return 0.9 / L
    w = weights_from_residual(residual(x, A, z), cfg.epsilon)
    w_q = float(np.quantile(w, WEIGHT_QUANTILE))
    return 0.9 / (L * max(cfg.beta, (1.0 - cfg.beta) * w_q))


def resolve_step(x: Signal, A: Dictionary, cfg: SolverConfig) -> SolverConfig:
    """
    Return ``cfg`` with a constant ``gamma`` filled in from its step rule when it was left unset.
    The ``adaptive`` rule contributes its trial step at ``z_0``.
    """
    if cfg.gamma is not None:
        return cfg
    if cfg.step_rule == "guarded":
        return replace(cfg, gamma=guarded_step_size(A, x.shape[:2], cfg))
    if cfg.step_rule == "adaptive":
        return replace(cfg, gamma=adaptive_step_size(x, A, init_code(x, A), cfg))
    return replace(cfg, gamma=default_step_size(x, A, cfg))


def rista_step(x: Signal, A: Dictionary, z_t: Code, cfg: SolverConfig) -> Code:
    """
    One iteration: weights, reweighted residual, gradient step, shrinkage.

    ``z_{t+1} = soft_threshold(z_t + gamma A((beta + (1 - beta) w_t) * (x - A*(z_t))), lam gamma)``

    :raises ConfigError: Raised when ``cfg.gamma`` is unset.
    """
    if cfg.gamma is None:
        raise ConfigError("rista_step needs an explicit gamma; call resolve_step first.")
    r = residual(x, A, z_t)
    w = weights_from_residual(r, cfg.epsilon)
    r_weighted = elastic_reweight(w, cfg.beta) * r
    return soft_threshold(z_t + cfg.gamma * apply(A, r_weighted), cfg.lam * cfg.gamma)


def backtracking_step(
    x: Signal, A: Dictionary, z_t: Code, cfg: SolverConfig, L: float, floor: float
) -> Tuple[Code, float]:
    """
    One ``adaptive`` iteration: start from :func:`adaptive_step_size` and halve the step
    until the smoothed objective does not increase. The step never drops below ``floor``,
    which is accepted as is.

    :param L: The squared operator norm.
    :type L: float
    :param floor: The guarded step for ``cfg``.
    :type floor: float

    :return: ``z_{t+1}`` and the step that produced it.
    :rtype: Tuple[Code, float]
    """
    gamma = max(adaptive_step_size(x, A, z_t, cfg, L), floor)
    current = smoothed_objective(x, A, z_t, cfg.lam, cfg.beta, cfg.epsilon)
    while True:
        z_next = rista_step(x, A, z_t, replace(cfg, gamma=gamma))
        if gamma <= floor or smoothed_objective(x, A, z_next, cfg.lam, cfg.beta, cfg.epsilon) <= current:
            return z_next, gamma
        gamma = max(0.5 * gamma, floor)


def solve(
    x: Signal, A: Dictionary, cfg: SolverConfig, trace: bool = True
) -> Tuple[Code, Optional[IterationTrace]]:
    """
    Run ``cfg.steps`` iterations from ``z_0 = A(x)``.

    An explicit ``gamma`` is used at every step. Otherwise the ``adaptive`` rule picks
    the step per iteration with :func:`backtracking_step` when ``beta < 1``, and the other
    rules fix one step up front with :func:`resolve_step`.

    :param x: The signal.
    :type x: Signal
    :param A: The dictionary.
    :type A: Dictionary
    :param cfg: The solver configuration.
    :type cfg: SolverConfig
    :param trace: Record diagnostics of every iterate.
    :type trace: bool

    :raises SolverDivergenceError: Raised when an iterate has non-finite entries.
    :raises ShapeError: Raised on incompatible shapes.

    :return: ``z_T`` and its trace (``None`` when ``trace`` is False).
    :rtype: Tuple[Code, Optional[IterationTrace]]
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"signal must be (H, W, C), got shape {x.shape}.")
    z = init_code(x, A)
    search = cfg.gamma is None and cfg.step_rule == "adaptive" and cfg.beta < 1.0
    if search:
        L = operator_norm_sq(A, x.shape[:2], cfg.power_iters)
        floor = guarded_step_size(A, x.shape[:2], cfg)
    else:
        cfg = resolve_step(x, A, cfg)
    history = IterationTrace(cfg.lam, cfg.beta, cfg.epsilon) if trace else None
    if history is not None:
        history.record(x, A, z, None)
    for step in range(1, cfg.steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            if search:
                z_next, _ = backtracking_step(x, A, z, cfg, L, floor)
            else:
                z_next = rista_step(x, A, z, cfg)
        if not np.all(np.isfinite(z_next)):
            raise SolverDivergenceError(step, "code")
        if history is not None:
            history.record(x, A, z_next, z)
        z = z_next
    return z, history


def check_descent(
    trace: IterationTrace, mode: str, tolerance: float = DESCENT_TOLERANCE
) -> DescentReport:
    """
    Check that the objective matching ``mode`` never increases by more than ``tolerance``.

    :return: ``(True, None)`` or ``(False, first step that increased)``.
    :rtype: DescentReport
    """
    values = trace.objective(mode)
    if not values:
        raise ConfigError("check_descent needs a non-empty trace.")
    for step in range(1, len(values)):
        if values[step] > values[step - 1] + tolerance:
            return DescentReport(False, step)
    return DescentReport(True, None)
