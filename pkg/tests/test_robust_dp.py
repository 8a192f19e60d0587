import itertools

import numpy as np
import pytest

from drmdp import (
    random_simplex_mdp,
    range_shrinkage_bound,
    robust_policy_evaluation,
    robust_value_iteration,
    uncertainty_function,
    uniform_policy,
)
from drmdp.robust_dp import compute_kappa, feature_second_moments, occupancy
from drmdp.tv import tv_dual_sup

from oracles import brute_force_robust_value


def test_evaluation_matches_lp_oracle(backend):
    mdp = random_simplex_mdp(4, 3, 3, 3, seed=2, rho=0.3)
    rng = np.random.default_rng(0)
    det = rng.integers(0, 3, size=(3, 4))
    sto = rng.dirichlet(np.ones(3), size=(3, 4))
    for pol in (det, sto):
        ours = robust_policy_evaluation(mdp, pol).V
        np.testing.assert_allclose(ours, brute_force_robust_value(mdp, pol), atol=1e-8)


def test_value_iteration_beats_every_deterministic_policy():
    mdp = random_simplex_mdp(2, 2, 3, 2, seed=5, rho=0.4)
    best = robust_value_iteration(mdp)
    for flat in itertools.product(range(2), repeat=6):
        pol = np.array(flat).reshape(3, 2)
        v = robust_policy_evaluation(mdp, pol).V[0]
        assert np.all(v <= best.V[0] + 1e-12)


def test_rho_zero_is_nominal_dp():
    mdp = random_simplex_mdp(5, 3, 4, 3, seed=8, rho=0.0)
    res = robust_value_iteration(mdp)
    P, R = mdp.nominal_kernels(), mdp.mean_rewards()
    V = np.zeros(5)
    for h in reversed(range(4)):
        V = (R[h] + P[h] @ V).max(axis=1)
    np.testing.assert_allclose(res.V[0], V, atol=1e-12)


def test_worst_kernels_reproduce_robust_value():
    """Plain evaluation under the worst-case kernels gives the robust value."""
    mdp = random_simplex_mdp(4, 2, 3, 2, seed=3, rho=0.5)
    res = robust_value_iteration(mdp)
    R = mdp.mean_rewards()
    V = np.zeros(4)
    for h in reversed(range(3)):
        Q = R[h] + res.worst_kernels[h] @ V
        V = Q[np.arange(4), res.policy[h]]
    np.testing.assert_allclose(V, res.V[0], atol=1e-12)


def test_rho_override():
    mdp = random_simplex_mdp(4, 2, 3, 2, seed=3, rho=0.5)
    a = robust_value_iteration(mdp, rho_override=0.1)
    b = robust_value_iteration(mdp.with_uncertainty(0.1))
    np.testing.assert_array_equal(a.V, b.V)


def test_range_shrinkage_bound_values():
    assert range_shrinkage_bound(1.0, 5, 1) == 1.0
    assert range_shrinkage_bound(0.5, 2, 1) == pytest.approx(1.5)
    assert range_shrinkage_bound(1e-9, 4, 1) == pytest.approx(4.0, rel=1e-6)
    with pytest.raises(ValueError):
        range_shrinkage_bound(0.0, 3, 1)


def test_uncertainty_function_against_manual_recursion():
    mdp = random_simplex_mdp(3, 2, 2, 2, seed=4, rho=0.2)
    pol = np.array([[0, 1, 0], [1, 1, 0]])
    M = np.array([[[2.0, 0.3], [0.3, 1.0]], [[1.0, 0.0], [0.0, 4.0]]])
    g = mdp.features @ np.sqrt(np.einsum("hii->hi", M)).T  # (S, A, H)
    W1 = g[np.arange(3), pol[1], 1]
    up = np.array([tv_dual_sup(mdp.factor_measures[0, i], W1, 0.2) for i in range(2)])
    W0 = g[np.arange(3), pol[0], 0] + (mdp.features @ up)[np.arange(3), pol[0]]
    np.testing.assert_allclose(uncertainty_function(mdp, pol, M), W0, atol=1e-12)


def test_uncertainty_function_rejects_bad_matrices():
    mdp = random_simplex_mdp(3, 2, 2, 2, seed=4, rho=0.2)
    pol = np.zeros((2, 3), int)
    with pytest.raises(ValueError, match="symmetric"):
        uncertainty_function(mdp, pol, np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="positive definite"):
        uncertainty_function(mdp, pol, np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(ValueError, match="shape"):
        uncertainty_function(mdp, pol, np.eye(3))


def test_occupancy_and_moments():
    mdp = random_simplex_mdp(4, 3, 3, 2, seed=6)
    pol = uniform_policy(mdp)
    occ = occupancy(mdp, pol)
    np.testing.assert_allclose(occ.sum(axis=(1, 2)), 1.0, atol=1e-12)
    mom = feature_second_moments(mdp, pol)
    assert mom.shape == (3, 2, 2)
    np.testing.assert_allclose(mom, np.transpose(mom, (0, 2, 1)))
    kappa = compute_kappa(mdp, pol)
    assert kappa == pytest.approx(min(np.linalg.eigvalsh(m)[0] for m in mom))
