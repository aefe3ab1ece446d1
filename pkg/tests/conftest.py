import numpy as np
import pytest

from src.utils.conv_ops import random_dictionary


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)


@pytest.fixture
def instance(rng):
    """
    A small random ``(A, x, z)`` triple with ``D=3, C=2, k=3`` on a 6x5 grid.
    """
    A = random_dictionary(3, 2, 3, rng)
    x = rng.standard_normal((6, 5, 2))
    z = rng.standard_normal((6, 5, 3))
    return A, x, z


def dense_operator(A: np.ndarray, height: int, width: int) -> np.ndarray:
    """
    The convolution operator as a matrix on C-ordered ``(H, W, C) -> (H, W, D)`` vectors,
    filled by direct summation.
    """
    D, C, k, _ = A.shape
    k0 = k // 2
    M = np.zeros((height * width * D, height * width * C))
    for d in range(D):
        for c in range(C):
            for p in range(k):
                for q in range(k):
                    for i in range(height):
                        for j in range(width):
                            ii, jj = i + p - k0, j + q - k0
                            if 0 <= ii < height and 0 <= jj < width:
                                row = (i * width + j) * D + d
                                col = (ii * width + jj) * C + c
                                M[row, col] += A[d, c, p, q]
    return M


@pytest.fixture
def dense():
    return dense_operator
