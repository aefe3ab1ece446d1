"""
Differentiable unrolled layer, dictionary updates, a linear head on codes and FGSM.

Reverse mode is written out by hand. Conventions at the kinks: the shrinkage
derivative is 0 on the closed band ``|v| <= tau`` and 1 outside it, and the
derivative of ``|r|`` inside the weights is ``sign(r)`` with ``sign(0) = 0``.
The step size is treated as a constant.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.client.errors import ConfigError, ShapeError, SolverDivergenceError
from src.utils.conv_ops import (
    Code,
    Dictionary,
    Signal,
    apply,
    apply_adjoint,
    identity_dictionary,
    kernel_vjp,
    normalize_dictionary,
    operator_norm_sq,
    random_dictionary,
    validate_dictionary,
)
from src.utils.proximal import SolverConfig, check_beta, soft_threshold, weights_from_residual
from src.utils.solver import init_code, resolve_step, solve


@dataclass
class LayerGradients:
    grad_x: Signal
    grad_A: Dictionary
    grad_beta: float


@dataclass
class ClassifierHead:
    """
    Linear classifier on the flattened code: ``logits = weights @ z.ravel() + bias``.
    """

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError("head weights must be (classes, features) with a (classes,) bias.")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ShapeError("head parameters must be finite.")

    @classmethod
    def initial(cls, classes: int, features: int, rng: np.random.Generator) -> "ClassifierHead":
        return cls(rng.normal(0.0, 0.01, size=(classes, features)), np.zeros(classes))


@dataclass(frozen=True)
class Architecture:
    """
    ``vanilla`` always codes with ``beta = 1``; ``elastic`` uses its own ``beta``.
    """

    name: str = "vanilla"
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.name not in ("vanilla", "elastic"):
            raise ConfigError(f"Unknown architecture '{self.name}'.")
        check_beta(self.beta)

    @classmethod
    def vanilla(cls) -> "Architecture":
        return cls("vanilla", 1.0)

    @classmethod
    def elastic(cls, beta: float) -> "Architecture":
        return cls("elastic", beta)


class _Step(NamedTuple):
    z: Code
    r: Signal
    w: Signal
    m: Signal
    s: Signal
    y: Code


class Tape(NamedTuple):
    """
    Forward intermediates of one unrolled pass, kept for the reverse pass.
    """

    x: Signal
    A: Dictionary
    cfg: SolverConfig
    steps: List[_Step]
    z_final: Code


def layer_forward(x: Signal, A: Dictionary, cfg: SolverConfig) -> Tape:
    """
    Run the unrolled solver and keep every intermediate. The layer uses one constant step
    from :func:`resolve_step`, so it matches :func:`solve` whenever ``cfg.gamma`` is set.

    :raises SolverDivergenceError: Raised on non-finite intermediates.
    """
    x = np.asarray(x, dtype=np.float64)
    A = validate_dictionary(A)
    cfg = resolve_step(x, A, cfg)
    tau = cfg.lam * cfg.gamma
    z = init_code(x, A)
    steps = []
    for step in range(1, cfg.steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            r = x - apply_adjoint(A, z)
            w = weights_from_residual(r, cfg.epsilon)
            m = cfg.beta + (1.0 - cfg.beta) * w
            s = m * r
            y = z + cfg.gamma * apply(A, s)
        if not np.all(np.isfinite(y)):
            raise SolverDivergenceError(step, "pre-threshold code")
        steps.append(_Step(z, r, w, m, s, y))
        z = soft_threshold(y, tau)
    return Tape(x, A, cfg, steps, z)


def tape_vjp(tape: Tape, cotangent: Code) -> LayerGradients:
    """
    Reverse pass over a recorded tape.

    :param tape: The forward intermediates.
    :type tape: Tape
    :param cotangent: The gradient of the loss with respect to ``z_T``.
    :type cotangent: Code

    :raises ShapeError: Raised when the cotangent does not match ``z_T``.
    :raises SolverDivergenceError: Raised on non-finite gradients.

    :return: Gradients with respect to ``x``, ``A`` and ``beta``.
    :rtype: LayerGradients
    """
    cotangent = np.asarray(cotangent, dtype=np.float64)
    if cotangent.shape != tape.z_final.shape:
        raise ShapeError(f"cotangent shape {cotangent.shape} != code shape {tape.z_final.shape}.")
    A, cfg = tape.A, tape.cfg
    k = A.shape[-1]
    tau = cfg.lam * cfg.gamma
    grad_x = np.zeros_like(tape.x)
    grad_A = np.zeros_like(A)
    grad_beta = 0.0
    grad_z = cotangent
    for index in range(len(tape.steps) - 1, -1, -1):
        z, r, w, m, s, y = tape.steps[index]
        grad_y = grad_z * (np.abs(y) > tau)
        # y = z + gamma A(s)
        grad_prev = grad_y.copy()
        grad_A += cfg.gamma * kernel_vjp(s, grad_y, k)
        grad_s = cfg.gamma * apply_adjoint(A, grad_y)
        # s = m r, m = beta + (1 - beta) w, w = 1 / (2 (|r| + eps))
        grad_m = grad_s * r
        grad_r = grad_s * m
        grad_beta += float(np.sum(grad_m * (1.0 - w)))
        grad_w = (1.0 - cfg.beta) * grad_m
        grad_r += grad_w * (-2.0 * w * w) * np.sign(r)
        # r = x - A*(z)
        grad_x += grad_r
        grad_prev -= apply(A, grad_r)
        grad_A -= kernel_vjp(grad_r, z, k)
        if not np.all(np.isfinite(grad_prev)):
            raise SolverDivergenceError(index + 1, "gradient")
        grad_z = grad_prev
    # z_0 = A(x)
    grad_x += apply_adjoint(A, grad_z)
    grad_A += kernel_vjp(tape.x, grad_z, k)
    return LayerGradients(grad_x, grad_A, grad_beta)


def layer_vjp(x: Signal, A: Dictionary, cfg: SolverConfig, cotangent: Code) -> LayerGradients:
    """
    Reverse-mode derivative of ``(x, A, beta) -> z_T`` contracted with ``cotangent``.
    The forward pass is recomputed.
    """
    return tape_vjp(layer_forward(x, A, cfg), cotangent)


def batch_step_size(batch: Sequence[Signal], A: Dictionary, cfg: SolverConfig) -> float:
    """
    One step size valid for a whole batch: the initial-weight rule with the largest
    first-iterate weight over the batch.
    """
    if cfg.gamma is not None:
        return cfg.gamma
    L = operator_norm_sq(A, np.shape(batch[0])[:2], cfg.power_iters)
    if L == 0.0:
        return 1.0
    if cfg.beta == 1.0:
        return 0.9 / L
    w_max = max(
        float(np.max(weights_from_residual(x - apply_adjoint(A, init_code(x, A)), cfg.epsilon)))
        for x in batch
    )
    return 0.9 / (L * ((1.0 - cfg.beta) * w_max + cfg.beta))


def batch_codes(batch: Sequence[Signal], A: Dictionary, cfg: SolverConfig) -> List[Code]:
    cfg = replace(cfg, gamma=batch_step_size(batch, A, cfg))
    return [solve(x, A, cfg, trace=False)[0] for x in batch]


def batch_objective(
    batch: Sequence[Signal], codes: Sequence[Code], A: Dictionary, cfg: SolverConfig
) -> float:
    """
    Mean elastic objective of a batch for fixed codes.
    """
    total = 0.0
    for x, z in zip(batch, codes):
        r = x - apply_adjoint(A, z)
        total += (
            0.5 * cfg.beta * float(np.vdot(r, r))
            + 0.5 * (1.0 - cfg.beta) * float(np.sum(np.abs(r)))
            + cfg.lam * float(np.sum(np.abs(z)))
        )
    return total / len(batch)


def dictionary_gradient(
    batch: Sequence[Signal], codes: Sequence[Code], A: Dictionary, cfg: SolverConfig
) -> Dictionary:
    """
    Gradient of :func:`batch_objective` with respect to ``A`` (``sign(0) = 0`` for the l1 part).
    """
    grad = np.zeros_like(A)
    for x, z in zip(batch, codes):
        r = x - apply_adjoint(A, z)
        grad_r = cfg.beta * r + 0.5 * (1.0 - cfg.beta) * np.sign(r)
        grad -= kernel_vjp(grad_r, z, A.shape[-1])
    return grad / len(batch)


def dictionary_update_step(
    batch: Sequence[Signal], A: Dictionary, cfg: SolverConfig, lr: float
) -> Dictionary:
    """
    One gradient step on the batch-mean elastic objective with codes fixed at their
    solver outputs, then per-output-channel renormalization.

    :raises ConfigError: Raised on an empty batch or a negative learning rate.

    :return: The updated dictionary.
    :rtype: Dictionary
    """
    if not batch:
        raise ConfigError("dictionary_update_step needs a non-empty batch.")
    if lr < 0:
        raise ConfigError(f"learning rate must be >= 0, got {lr}.")
    A = validate_dictionary(A)
    codes = batch_codes(batch, A, cfg)
    return normalize_dictionary(A - lr * dictionary_gradient(batch, codes, A, cfg))


def classify(z: Code, head: ClassifierHead) -> np.ndarray:
    """
    ``head.weights @ z.ravel() + head.bias``.

    :raises ShapeError: Raised when the code size does not match the head.
    """
    flat = np.asarray(z, dtype=np.float64).reshape(-1)
    if flat.size != head.weights.shape[1]:
        raise ShapeError(f"code has {flat.size} entries, head expects {head.weights.shape[1]}.")
    return head.weights @ flat + head.bias


def cross_entropy(logits: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
    """
    Softmax cross-entropy and its gradient with respect to the logits.
    """
    shifted = logits - np.max(logits)
    log_norm = np.log(np.sum(np.exp(shifted)))
    probabilities = np.exp(shifted - log_norm)
    grad = probabilities.copy()
    grad[label] -= 1.0
    return float(log_norm - shifted[label]), grad


def fgsm_perturb(
    x: Signal, grad_x: Signal, budget: float, low: float = 0.0, high: float = 1.0
) -> Signal:
    """
    ``clip(x + budget * sign(grad_x), low, high)``, with ``sign(0) = 0``.

    :raises ConfigError: Raised when ``budget`` is negative.
    """
    if budget < 0:
        raise ConfigError(f"budget must be >= 0, got {budget}.")
    return np.clip(np.asarray(x, dtype=np.float64) + budget * np.sign(grad_x), low, high)


def embedding_difference(z_clean: Code, z_adv: Code) -> float:
    """
    ``||z_adv - z_clean|| / ||z_clean||`` (the plain difference norm when ``z_clean`` vanishes).
    """
    denominator = np.linalg.norm(z_clean)
    numerator = np.linalg.norm(z_adv - z_clean)
    return float(numerator / denominator) if denominator > 0 else float(numerator)


def project_beta(beta: float) -> float:
    return float(np.clip(beta, 0.0, 1.0))


def make_blobs(
    n: int,
    classes: int,
    shape: Tuple[int, int, int],
    separation: float,
    noise_std: float,
    rng: np.random.Generator,
    centers: Optional[np.ndarray] = None,
) -> Tuple[List[Signal], List[int], np.ndarray]:
    """
    Balanced synthetic classes in ``[0, 1]``: each centre is ``0.5 +- separation`` per entry,
    and samples add Gaussian noise before clipping.

    :return: The signals, their labels and the class centres.
    :rtype: Tuple[List[Signal], List[int], np.ndarray]
    """
    if centers is None:
        centers = 0.5 + separation * rng.choice((-1.0, 1.0), size=(classes,) + tuple(shape))
    signals, labels = [], []
    for i in range(n):
        label = i % classes
        sample = centers[label] + noise_std * rng.standard_normal(shape)
        signals.append(np.clip(sample, 0.0, 1.0))
        labels.append(label)
    return signals, labels, centers


@dataclass
class PipelineResult:
    A: Dictionary
    head: ClassifierHead
    beta: float
    gamma: float
    metrics: Dict[str, float] = field(default_factory=dict)


def _loss_and_input_grad(
    x: Signal, label: int, A: Dictionary, head: ClassifierHead, cfg: SolverConfig
) -> Tuple[float, Code, np.ndarray, LayerGradients]:
    tape = layer_forward(x, A, cfg)
    logits = classify(tape.z_final, head)
    loss, grad_logits = cross_entropy(logits, label)
    grad_z = (head.weights.T @ grad_logits).reshape(tape.z_final.shape)
    return loss, tape.z_final, grad_logits, tape_vjp(tape, grad_z)


def evaluate(
    signals: Sequence[Signal],
    labels: Sequence[int],
    A: Dictionary,
    head: ClassifierHead,
    cfg: SolverConfig,
    budget: float,
) -> Dict[str, float]:
    """
    Clean and FGSM accuracy plus the mean embedding difference at one budget.
    """
    clean = attacked = 0
    differences = []
    for x, label in zip(signals, labels):
        _, z, _, grads = _loss_and_input_grad(x, label, A, head, cfg)
        x_adv = fgsm_perturb(x, grads.grad_x, budget)
        z_adv = solve(x_adv, A, cfg, trace=False)[0]
        clean += int(np.argmax(classify(z, head)) == label)
        attacked += int(np.argmax(classify(z_adv, head)) == label)
        differences.append(embedding_difference(z, z_adv))
    n = len(signals)
    return {
        "clean_accuracy": clean / n,
        "fgsm_accuracy": attacked / n,
        "embedding_difference": float(np.mean(differences)),
    }


def train_toy_pipeline(
    signals: Sequence[Signal],
    labels: Sequence[int],
    arch: Architecture,
    solver: SolverConfig,
    epochs: int,
    lr: float,
    seed: int,
    lr_dictionary: float = 0.0,
    pretrain_epochs: int = 0,
    learn_beta: bool = False,
    init: str = "identity",
    D: int = 4,
    k: int = 3,
    eval_signals: Optional[Sequence[Signal]] = None,
    eval_labels: Optional[Sequence[int]] = None,
    budget: float = 8 / 255,
    logger=None,
) -> PipelineResult:
    """
    Full-batch training of dictionary, head and (optionally) ``beta`` through the unrolled layer.

    Each epoch solves every sample, takes the cross-entropy gradient of the head, pulls it
    back through the layer and updates the parameters. The first ``pretrain_epochs`` code
    with ``beta = 1`` before the architecture's own ``beta`` takes over.

    :raises ConfigError: Raised with fewer than two classes or an empty dataset.
    :raises SolverDivergenceError: Raised when the epoch loss is non-finite.

    :return: The trained parameters and train/eval accuracies, clean and under FGSM.
    :rtype: PipelineResult
    """
    if not signals or len(signals) != len(labels):
        raise ConfigError("training needs matching, non-empty signals and labels.")
    classes = len(set(labels))
    if classes < 2:
        raise ConfigError("training needs at least two classes.")
    rng = np.random.default_rng(seed)
    height, width, channels = np.shape(signals[0])
    if init == "identity":
        A = identity_dictionary(D, channels, k)
    else:
        A = random_dictionary(D, channels, k, rng)
    head = ClassifierHead.initial(max(labels) + 1, height * width * D, rng)
    beta = arch.beta if arch.name == "elastic" else 1.0
    n = len(signals)

    for epoch in range(epochs):
        beta_now = 1.0 if epoch < pretrain_epochs else beta
        cfg = replace(solver, beta=beta_now, gamma=None)
        cfg = replace(cfg, gamma=batch_step_size(signals, A, cfg))
        grad_W = np.zeros_like(head.weights)
        grad_b = np.zeros_like(head.bias)
        grad_A = np.zeros_like(A)
        grad_beta = 0.0
        total = 0.0
        for x, label in zip(signals, labels):
            loss, z, grad_logits, grads = _loss_and_input_grad(x, label, A, head, cfg)
            total += loss
            grad_W += np.outer(grad_logits, z.reshape(-1))
            grad_b += grad_logits
            grad_A += grads.grad_A
            grad_beta += grads.grad_beta
        if not np.isfinite(total):
            raise SolverDivergenceError(epoch, "loss", where="epoch")
        head = ClassifierHead(head.weights - lr * grad_W / n, head.bias - lr * grad_b / n)
        A = normalize_dictionary(A - lr_dictionary * grad_A / n)
        if learn_beta and arch.name == "elastic" and epoch >= pretrain_epochs:
            beta = project_beta(beta - lr * grad_beta / n)
        if logger is not None:
            logger.debug(f"[{arch.name}] epoch {epoch + 1}/{epochs} loss {total / n:.6f} beta {beta:.4f}")

    cfg = replace(solver, beta=beta, gamma=None)
    cfg = replace(cfg, gamma=batch_step_size(signals, A, cfg))
    metrics = {f"train_{key}": value for key, value in evaluate(signals, labels, A, head, cfg, budget).items()}
    if eval_signals is not None and eval_labels is not None:
        metrics.update(
            {f"eval_{key}": value for key, value in evaluate(eval_signals, eval_labels, A, head, cfg, budget).items()}
        )
    return PipelineResult(A, head, beta, cfg.gamma, metrics)
