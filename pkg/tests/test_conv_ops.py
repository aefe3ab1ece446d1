import numpy as np
import pytest

from src.client.errors import ShapeError
from src.utils.conv_ops import (
    apply,
    apply_adjoint,
    correlate2d,
    flip_kernels,
    identity_dictionary,
    kernel_vjp,
    normalize_dictionary,
    operator_norm_sq,
    random_dictionary,
    transpose_convolve2d,
)


def loop_correlate(plane, kernel):
    height, width = plane.shape
    k0 = kernel.shape[0] // 2
    out = np.zeros_like(plane, dtype=np.float64)
    for i in range(height):
        for j in range(width):
            for p in range(-k0, k0 + 1):
                for q in range(-k0, k0 + 1):
                    if 0 <= i + p < height and 0 <= j + q < width:
                        out[i, j] += plane[i + p, j + q] * kernel[p + k0, q + k0]
    return out


def loop_transpose(plane, kernel):
    height, width = plane.shape
    k0 = kernel.shape[0] // 2
    out = np.zeros_like(plane, dtype=np.float64)
    for i in range(height):
        for j in range(width):
            for p in range(-k0, k0 + 1):
                for q in range(-k0, k0 + 1):
                    if 0 <= i - p < height and 0 <= j - q < width:
                        out[i, j] += plane[i - p, j - q] * kernel[p + k0, q + k0]
    return out


def test_correlate2d_small_cases():
    assert correlate2d(np.array([[3.0]]), np.array([[2.0]])).tolist() == [[6.0]]
    plane = np.arange(12.0).reshape(3, 4)
    np.testing.assert_array_equal(correlate2d(plane, np.array([[1.0]])), plane)
    ones = correlate2d(np.ones((3, 3)), np.ones((3, 3)))
    np.testing.assert_array_equal(ones, [[4, 6, 4], [6, 9, 6], [4, 6, 4]])


@pytest.mark.parametrize("shape,k", [((4, 4), 3), ((5, 7), 5), ((2, 3), 5), ((6, 1), 3)])
def test_correlate2d_matches_double_loop(rng, shape, k):
    plane = rng.standard_normal(shape)
    kernel = rng.standard_normal((k, k))
    np.testing.assert_allclose(correlate2d(plane, kernel), loop_correlate(plane, kernel), atol=1e-12)


def test_transpose_convolve2d_matches_double_loop(rng):
    plane = rng.standard_normal((4, 4))
    kernel = rng.standard_normal((3, 3))
    out = transpose_convolve2d(plane, kernel)
    np.testing.assert_allclose(out, loop_transpose(plane, kernel), atol=1e-12)
    np.testing.assert_allclose(out, correlate2d(plane, kernel[::-1, ::-1]), atol=1e-12)
    assert transpose_convolve2d(np.array([[3.0]]), np.array([[2.0]])).tolist() == [[6.0]]


def test_symmetric_kernel_is_flip_invariant(rng):
    plane = rng.standard_normal((5, 5))
    kernel = rng.standard_normal((3, 3))
    kernel = kernel + kernel[::-1, ::-1]
    np.testing.assert_allclose(transpose_convolve2d(plane, kernel), correlate2d(plane, kernel), atol=1e-12)


@pytest.mark.parametrize("bad", [np.ones((2, 2)), np.ones((3, 2))])
def test_correlate2d_rejects_bad_kernels(bad):
    with pytest.raises(ShapeError):
        correlate2d(np.ones((3, 3)), bad)


def test_correlate2d_rejects_non_finite():
    plane = np.ones((3, 3))
    plane[1, 1] = np.nan
    with pytest.raises(ShapeError):
        correlate2d(plane, np.ones((1, 1)))
    with pytest.raises(ShapeError):
        correlate2d(np.ones((3, 3)), np.array([[np.inf]]))


def test_apply_matches_nested_loops(rng):
    A = rng.standard_normal((2, 3, 3, 3))
    x = rng.standard_normal((4, 4, 3))
    expected = np.stack(
        [sum(loop_correlate(x[:, :, c], A[d, c]) for c in range(3)) for d in range(2)], axis=-1
    )
    np.testing.assert_allclose(apply(A, x), expected, rtol=1e-10, atol=1e-12)


def test_apply_adjoint_matches_nested_loops(rng):
    A = rng.standard_normal((2, 3, 3, 3))
    z = rng.standard_normal((4, 4, 2))
    expected = np.stack(
        [sum(loop_transpose(z[:, :, d], A[d, c]) for d in range(2)) for c in range(3)], axis=-1
    )
    np.testing.assert_allclose(apply_adjoint(A, z), expected, rtol=1e-10, atol=1e-12)


def test_trivial_operators(rng):
    x = rng.standard_normal((3, 4, 1))
    np.testing.assert_array_equal(apply(np.ones((1, 1, 1, 1)), x), x)
    z = rng.standard_normal((3, 4, 1))
    np.testing.assert_allclose(apply_adjoint(np.full((1, 1, 1, 1), 2.5), z), 2.5 * z)
    A = rng.standard_normal((2, 1, 3, 3))
    assert not np.any(apply(A, np.zeros((3, 4, 1))))
    assert not np.any(apply_adjoint(A, np.zeros((3, 4, 2))))


def test_matches_dense_matrix(instance, dense):
    A, x, z = instance
    M = dense(A, 6, 5)
    np.testing.assert_allclose(apply(A, x).ravel(), M @ x.ravel(), atol=1e-12)
    np.testing.assert_allclose(apply_adjoint(A, z).ravel(), M.T @ z.ravel(), atol=1e-12)


def test_adjointness_on_random_shapes(rng):
    for _ in range(1000):
        H, W = rng.integers(1, 17, size=2)
        C, D = rng.integers(1, 5, size=2)
        k = int(rng.choice([1, 3, 5]))
        A = rng.standard_normal((D, C, k, k))
        x = rng.standard_normal((H, W, C))
        z = rng.standard_normal((H, W, D))
        forward = np.vdot(apply(A, x), z)
        assert abs(forward - np.vdot(x, apply_adjoint(A, z))) <= 1e-8 * (1 + abs(forward))


def test_linearity(instance, rng):
    A, x, z = instance
    x2 = rng.standard_normal(x.shape)
    z2 = rng.standard_normal(z.shape)
    a, b = 1.7, -0.3
    np.testing.assert_allclose(apply(A, a * x + b * x2), a * apply(A, x) + b * apply(A, x2), atol=1e-10)
    np.testing.assert_allclose(
        apply_adjoint(A, a * z + b * z2), a * apply_adjoint(A, z) + b * apply_adjoint(A, z2), atol=1e-10
    )


def test_shapes_are_preserved(instance):
    A, x, z = instance
    assert apply(A, x).shape == (6, 5, 3)
    assert apply_adjoint(A, z).shape == (6, 5, 2)


def test_channel_mismatch(instance):
    A, x, z = instance
    with pytest.raises(ShapeError):
        apply(A, z)
    with pytest.raises(ShapeError):
        apply_adjoint(A, x)


def test_flip_kernels_is_an_involution(instance):
    A, _, _ = instance
    flipped = flip_kernels(A)
    assert flipped[0, 0, 0, 0] == A[0, 0, 2, 2]
    np.testing.assert_array_equal(flip_kernels(flipped), A)


def test_kernel_vjp_is_the_gradient_of_the_pairing(instance, rng):
    A, x, z = instance
    grad = kernel_vjp(x, z, 3)
    direction = rng.standard_normal(A.shape)
    # the pairing is linear in A, so the directional derivative is exact
    expected = np.vdot(apply(direction, x), z)
    assert np.vdot(grad, direction) == pytest.approx(expected, rel=1e-10)
    assert np.vdot(grad, direction) == pytest.approx(np.vdot(x, apply_adjoint(direction, z)), rel=1e-10)


def test_operator_norm_of_scalar_kernel():
    assert operator_norm_sq(np.full((1, 1, 1, 1), 2.0), (4, 4)) == pytest.approx(4.0, rel=1e-12)


def test_operator_norm_of_zero_dictionary_warns():
    with pytest.warns(RuntimeWarning):
        assert operator_norm_sq(np.zeros((2, 1, 3, 3)), (4, 4)) == 0.0


def test_operator_norm_matches_dense_eigenvalue(rng, dense):
    A = rng.standard_normal((2, 2, 3, 3))
    M = dense(A, 4, 4)
    largest = np.linalg.eigvalsh(M.T @ M)[-1]
    assert operator_norm_sq(A, (4, 4), iters=300) == pytest.approx(largest, rel=1e-2)
    assert operator_norm_sq(A, (4, 4)) <= largest * (1 + 1e-10)


def test_operator_norm_is_monotone_and_seeded(rng):
    A = rng.standard_normal((3, 2, 3, 3))
    estimates = [operator_norm_sq(A, (6, 6), iters=n, seed=7) for n in (1, 2, 5, 10, 40)]
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(estimates, estimates[1:]))
    assert operator_norm_sq(A, (6, 6), seed=3) == operator_norm_sq(A, (6, 6), seed=3)
    with pytest.raises(ShapeError):
        operator_norm_sq(A, (6, 6), iters=0)


def test_normalize_dictionary(rng):
    A = rng.standard_normal((3, 2, 3, 3))
    A[1] = 0.0
    B = normalize_dictionary(A)
    norms = np.sqrt(np.sum(B * B, axis=(1, 2, 3)))
    np.testing.assert_allclose(norms[[0, 2]], 1.0)
    assert not np.any(B[1])
    np.testing.assert_allclose(normalize_dictionary(B), B, atol=1e-15)


def test_dictionary_factories(rng):
    A = random_dictionary(4, 2, 5, rng)
    assert A.shape == (4, 2, 5, 5)
    np.testing.assert_allclose(np.sqrt(np.sum(A * A, axis=(1, 2, 3))), 1.0)
    I = identity_dictionary(3, 2, 3)
    x = rng.standard_normal((4, 4, 2))
    code = apply(I, x)
    np.testing.assert_array_equal(code[:, :, 0], x[:, :, 0])
    np.testing.assert_array_equal(code[:, :, 2], x[:, :, 0])
    with pytest.raises(ShapeError):
        identity_dictionary(1, 1, 2)
