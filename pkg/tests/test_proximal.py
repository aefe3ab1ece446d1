import numpy as np
import pytest

from src.client.errors import ConfigError
from src.utils.conv_ops import apply_adjoint, random_dictionary
from src.utils.proximal import (
    SolverConfig,
    elastic_objective,
    elastic_reweight,
    l2_fidelity,
    local_upper_bound,
    residual_weights,
    robust_fidelity,
    robust_objective,
    smoothed_fidelity,
    smoothed_objective,
    soft_threshold,
    vanilla_objective,
)


def test_soft_threshold_examples():
    assert soft_threshold(np.array(1.2), 0.5) == pytest.approx(0.7)
    assert soft_threshold(np.array(-0.2), 0.5) == 0.0
    assert soft_threshold(np.array(-2.0), 0.5) == pytest.approx(-1.5)
    v = np.array([-3.0, 0.1, 2.0])
    np.testing.assert_array_equal(soft_threshold(v, 0.0), v)
    with pytest.raises(ConfigError):
        soft_threshold(v, -0.1)


def test_soft_threshold_is_a_contraction(rng):
    for _ in range(200):
        u, v = rng.standard_normal((2, 20))
        tau = rng.uniform(0, 2)
        assert np.linalg.norm(soft_threshold(u, tau) - soft_threshold(v, tau)) <= np.linalg.norm(u - v) + 1e-15


def test_residual_weights_examples(instance):
    A, x, _ = instance
    z = np.zeros((6, 5, 3))
    exact = apply_adjoint(A, z)
    np.testing.assert_allclose(residual_weights(exact, A, z, 1e-3), 500.0)
    x1 = exact.copy()
    x1[0, 0, 0] += 1.0
    assert residual_weights(x1, A, z, 1e-3)[0, 0, 0] == pytest.approx(1 / 2.002)


def test_residual_weights_formula_and_bounds(instance):
    A, x, z = instance
    w = residual_weights(x, A, z, 0.05)
    r = x - apply_adjoint(A, z)
    np.testing.assert_allclose(w, 1.0 / (2.0 * (np.abs(r) + 0.05)), rtol=1e-12)
    assert np.all(w > 0) and np.all(w <= 1.0 / (2 * 0.05))
    with pytest.raises(ConfigError):
        residual_weights(x, A, z, 0.0)


def test_elastic_reweight():
    w = np.array([0.2, 3.0, 500.0])
    np.testing.assert_array_equal(elastic_reweight(w, 1.0), np.ones(3))
    np.testing.assert_array_equal(elastic_reweight(w, 0.0), w)
    assert elastic_reweight(w, 0.5)[0] == pytest.approx(0.6)
    for beta in (-0.1, 1.5):
        with pytest.raises(ConfigError):
            elastic_reweight(w, beta)


def test_objectives_at_zero_code(instance):
    A, x, z_any = instance
    z = np.zeros((6, 5, 3))
    assert vanilla_objective(x, A, z, 0.3) == pytest.approx(np.sum(x * x))
    assert robust_fidelity(x, A, z) == pytest.approx(np.sum(np.abs(x)))
    assert robust_objective(x, A, z, 0.3) == pytest.approx(np.sum(np.abs(x)))
    assert vanilla_objective(np.zeros_like(x), A, z, 0.3) == 0.0
    assert robust_fidelity(apply_adjoint(A, z_any), A, z_any) == 0.0


def test_objectives_match_direct_sums(instance):
    A, x, z = instance
    r = x - apply_adjoint(A, z)
    lam, beta = 0.2, 0.3
    assert vanilla_objective(x, A, z, lam) == pytest.approx(np.sum(r**2) + lam * np.sum(np.abs(z)), rel=1e-10)
    assert robust_objective(x, A, z, lam) == pytest.approx(np.sum(np.abs(r)) + lam * np.sum(np.abs(z)), rel=1e-10)
    expected = beta / 2 * np.sum(r**2) + (1 - beta) / 2 * np.sum(np.abs(r)) + lam * np.sum(np.abs(z))
    assert elastic_objective(x, A, z, lam, beta) == pytest.approx(expected, rel=1e-10)


def test_elastic_objective_reductions(instance):
    A, x, z = instance
    sparsity = np.sum(np.abs(z))
    assert elastic_objective(x, A, z, 0.1, 1.0) == 0.5 * l2_fidelity(x, A, z) + 0.1 * sparsity
    assert elastic_objective(x, A, z, 0.1, 0.0) == 0.5 * robust_fidelity(x, A, z) + 0.1 * sparsity
    with pytest.raises(ConfigError):
        elastic_objective(x, A, z, 0.1, 2.0)


def test_smoothed_fidelity_sits_below_l1(instance):
    A, x, z = instance
    for epsilon in (1e-6, 1e-3, 0.1):
        smooth = smoothed_fidelity(x, A, z, epsilon)
        assert 0 <= smooth <= robust_fidelity(x, A, z)
    assert smoothed_objective(x, A, z, 0.1, 1.0, 0.01) == pytest.approx(elastic_objective(x, A, z, 0.1, 1.0))


def test_upper_bound_majorizes(rng):
    epsilon = 1e-9
    for _ in range(1000):
        H, W = rng.integers(1, 5, size=2)
        C, D = rng.integers(1, 3, size=2)
        A = random_dictionary(D, C, 3, rng)
        x = rng.standard_normal((H, W, C))
        z = rng.standard_normal((H, W, D))
        z_star = rng.standard_normal((H, W, D))
        assert local_upper_bound(x, A, z, z_star, epsilon) >= robust_fidelity(x, A, z) - 1e-6
        tangency = local_upper_bound(x, A, z_star, z_star, epsilon) - robust_fidelity(x, A, z_star)
        assert abs(tangency) <= epsilon * x.size * 2 + 1e-9


def test_upper_bound_tangency_slack(instance):
    A, x, z = instance
    epsilon = 1e-3
    slack = local_upper_bound(x, A, z, z, epsilon) - robust_fidelity(x, A, z)
    assert 0 <= slack <= epsilon * x.size / 2


def test_upper_bound_is_finite_at_zero_residual(instance):
    A, _, z = instance
    x = apply_adjoint(A, z)
    bound = local_upper_bound(x, A, z, z, 1e-3)
    assert np.isfinite(bound)
    assert bound == pytest.approx(1e-3 * x.size / 2)


@pytest.mark.parametrize(
    "kwargs",
    [{"lam": -1.0}, {"beta": 1.1}, {"gamma": 0.0}, {"steps": 0}, {"epsilon": 0.0}, {"step_rule": "fast"}],
)
def test_solver_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SolverConfig(**kwargs)
