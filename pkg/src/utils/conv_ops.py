"""
Multi-channel convolution operator, its adjoint, and spectral-norm estimation.

Layouts: a signal is ``(H, W, C)``, a code is ``(H, W, D)`` and a dictionary is
``(D, C, k, k)`` with ``k`` odd. Kernel index ``(k0, k0)`` is the centre, so array
index ``p`` stands for the offset ``p - k0``. Borders are zero padded and the
output always keeps the input's spatial size.
"""

import warnings
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from src.client.errors import ShapeError

Signal = NDArray[np.float64]
Code = NDArray[np.float64]
Dictionary = NDArray[np.float64]


def _finite(name: str, array: np.ndarray) -> np.ndarray:
    array = np.asarray(array, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise ShapeError(f"{name} contains non-finite entries.")
    return array


def _odd_kernel(name: str, kernel: np.ndarray) -> int:
    k = kernel.shape[-1]
    if kernel.shape[-2] != k:
        raise ShapeError(f"{name} must be square, got {kernel.shape[-2:]}.")
    if k % 2 == 0:
        raise ShapeError(f"{name} size must be odd, got {k}.")
    return k


def validate_dictionary(A: Dictionary) -> Dictionary:
    """
    Check that ``A`` is a finite ``(D, C, k, k)`` bank with odd ``k``.

    :raises ShapeError: Raised when the bank is malformed.

    :return: The bank as a float64 array.
    :rtype: Dictionary
    """
    A = _finite("dictionary", A)
    if A.ndim != 4:
        raise ShapeError(f"dictionary must have 4 axes (D, C, k, k), got {A.ndim}.")
    _odd_kernel("dictionary kernel", A)
    return A


def _shifted_sum(data: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """
    ``out[i, j, o] = sum_{p, q, c} data[i + p, j + q, c] * kernels[o, c, p, q]``, zero padded.
    """
    height, width, _ = data.shape
    k = kernels.shape[-1]
    k0 = k // 2
    padded = np.pad(data, ((k0, k0), (k0, k0), (0, 0)))
    out = np.zeros((height, width, kernels.shape[0]))
    for p in range(k):
        for q in range(k):
            out += padded[p : p + height, q : q + width, :] @ kernels[:, :, p, q].T
    return out


def correlate2d(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """
    Single-plane correlation, ``out[i, j] = sum_{p, q} plane[i + p, j + q] * kernel[p, q]``.

    :param plane: A real ``H x W`` matrix.
    :type plane: np.ndarray
    :param kernel: A real ``k x k`` matrix with ``k`` odd.
    :type kernel: np.ndarray

    :raises ShapeError: Raised for an even kernel or non-finite inputs.

    :return: The ``H x W`` result.
    :rtype: np.ndarray
    """
    plane = _finite("plane", plane)
    kernel = _finite("kernel", kernel)
    if plane.ndim != 2 or kernel.ndim != 2:
        raise ShapeError("correlate2d expects 2-D plane and kernel.")
    _odd_kernel("kernel", kernel)
    return _shifted_sum(plane[:, :, None], kernel[None, None])[:, :, 0]


def transpose_convolve2d(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """
    Single-plane transposed convolution, ``out[i, j] = sum_{p, q} plane[i - p, j - q] * kernel[p, q]``.
    Equal to :func:`correlate2d` with the kernel flipped along both axes.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2:
        raise ShapeError("transpose_convolve2d expects a 2-D kernel.")
    return correlate2d(plane, kernel[::-1, ::-1])


def flip_kernels(A: Dictionary) -> Dictionary:
    """
    Reverse both spatial axes of every atom.
    """
    return np.ascontiguousarray(np.asarray(A)[:, :, ::-1, ::-1])


def apply(A: Dictionary, x: Signal) -> Code:
    """
    The convolution operator, channel ``d`` of the output is ``sum_c correlate2d(x_c, A[d, c])``.

    :param A: The dictionary ``(D, C, k, k)``.
    :type A: Dictionary
    :param x: The signal ``(H, W, C)``.
    :type x: Signal

    :raises ShapeError: Raised on a channel mismatch or malformed inputs.

    :return: The code ``(H, W, D)``.
    :rtype: Code
    """
    A = validate_dictionary(A)
    x = _finite("signal", x)
    if x.ndim != 3 or x.shape[2] != A.shape[1]:
        raise ShapeError(f"signal shape {x.shape} does not match dictionary with C={A.shape[1]}.")
    return _shifted_sum(x, A)


def apply_adjoint(A: Dictionary, z: Code) -> Signal:
    """
    The adjoint (transposed convolution) operator, channel ``c`` of the output is
    ``sum_d transpose_convolve2d(z_d, A[d, c])``.

    :raises ShapeError: Raised on a channel mismatch or malformed inputs.

    :return: The signal ``(H, W, C)``.
    :rtype: Signal
    """
    A = validate_dictionary(A)
    z = _finite("code", z)
    if z.ndim != 3 or z.shape[2] != A.shape[0]:
        raise ShapeError(f"code shape {z.shape} does not match dictionary with D={A.shape[0]}.")
    return _shifted_sum(z, flip_kernels(A).transpose(1, 0, 2, 3))


def kernel_vjp(inp: Signal, cot: Code, k: int) -> Dictionary:
    """
    Gradient of ``<cot, apply(A, inp)>`` with respect to ``A``.
    The same routine gives the gradient of ``<inp, apply_adjoint(A, cot)>``.

    :param inp: The operator input ``(H, W, C)``.
    :type inp: Signal
    :param cot: The cotangent on the output ``(H, W, D)``.
    :type cot: Code
    :param k: The kernel size.
    :type k: int

    :return: The gradient, shaped ``(D, C, k, k)``.
    :rtype: Dictionary
    """
    height, width, _ = inp.shape
    k0 = k // 2
    padded = np.pad(inp, ((k0, k0), (k0, k0), (0, 0)))
    grad = np.empty((cot.shape[2], inp.shape[2], k, k))
    for p in range(k):
        for q in range(k):
            window = padded[p : p + height, q : q + width, :]
            grad[:, :, p, q] = np.einsum("hwd,hwc->dc", cot, window)
    return grad


def operator_norm_sq(
    A: Dictionary, shape: Tuple[int, int], iters: int = 50, seed: int = 0
) -> float:
    """
    Power-iteration estimate of the largest eigenvalue of ``apply_adjoint(A, apply(A, .))``
    on ``(H, W, C)`` signals. The Rayleigh quotient it returns never decreases with ``iters``.

    :param A: The dictionary.
    :type A: Dictionary
    :param shape: The spatial shape ``(H, W)``.
    :type shape: Tuple[int, int]
    :param iters: The number of power iterations, at least 1.
    :type iters: int
    :param seed: Seed of the random starting signal.
    :type seed: int

    :raises ShapeError: Raised when ``iters`` < 1.

    :return: The estimate; ``0.0`` (with a ``RuntimeWarning``) when ``A`` vanishes.
    :rtype: float
    """
    if iters < 1:
        raise ShapeError(f"iters must be >= 1, got {iters}.")
    A = validate_dictionary(A)
    if not np.any(A):
        warnings.warn("operator_norm_sq: dictionary is identically zero.", RuntimeWarning)
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((shape[0], shape[1], A.shape[1]))
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iters):
        u = apply_adjoint(A, apply(A, v))
        estimate = float(np.vdot(v, u))
        norm = np.linalg.norm(u)
        if norm == 0.0:
            warnings.warn("operator_norm_sq: iterate fell in the null space.", RuntimeWarning)
            return 0.0
        v = u / norm
    return estimate


def normalize_dictionary(A: Dictionary) -> Dictionary:
    """
    Scale every output-channel block ``A[d]`` to unit Frobenius norm. Zero blocks stay zero.
    """
    A = validate_dictionary(A)
    norms = np.sqrt(np.sum(A * A, axis=(1, 2, 3), keepdims=True))
    return np.where(norms > 0, A / np.where(norms > 0, norms, 1.0), A)


def random_dictionary(D: int, C: int, k: int, rng: np.random.Generator) -> Dictionary:
    """
    Gaussian atoms with unit Frobenius norm per output channel.
    """
    if k % 2 == 0:
        raise ShapeError(f"kernel size must be odd, got {k}.")
    return normalize_dictionary(rng.standard_normal((D, C, k, k)))


def identity_dictionary(D: int, C: int, k: int) -> Dictionary:
    """
    Centred deltas: output channel ``d`` copies input channel ``d mod C``.
    """
    if k % 2 == 0:
        raise ShapeError(f"kernel size must be odd, got {k}.")
    A = np.zeros((D, C, k, k))
    for d in range(D):
        A[d, d % C, k // 2, k // 2] = 1.0
    return A
