"""Exact robust dynamic programming on tabular d-rectangular instances.

Because the uncertainty set is a product of per-factor TV balls, the inner
infimum at every (h, s, a) splits into d independent TV problems that do not
depend on (s, a). Each backup therefore costs d dual solves per step.
"""

from dataclasses import dataclass

import numpy as np

from .mdp import as_distribution, validate_policy
from .tv import tv_inf_factors, tv_sup_factors, tv_worst_factor_rows


@dataclass(frozen=True, eq=False)
class RobustDPResult:
    """Backward-recursion output.

    ``V`` has shape (H + 1, S) with ``V[H] == 0``; ``Q`` has shape (H, S, A);
    ``policy`` has shape (H, S); ``worst_factor_rows`` has shape (H, d, S) and
    ``worst_kernels`` (H, S, A, S).
    """

    V: np.ndarray
    Q: np.ndarray
    policy: np.ndarray
    worst_factor_rows: np.ndarray
    worst_kernels: np.ndarray
    factor_values: np.ndarray


def greedy(Q):
    """Argmax over the last axis with ties broken by smallest index."""
    return np.argmax(Q, axis=-1)


def _levels(mdp, rho_override):
    if rho_override is None:
        return mdp.uncertainty_levels
    return np.broadcast_to(np.asarray(rho_override, dtype=np.float64), (mdp.horizon,))


def _backward(mdp, policy, rho_override):
    H, S, A, d = mdp.horizon, mdp.num_states, mdp.num_actions, mdp.feature_dim
    rho = _levels(mdp, rho_override)
    phi = mdp.features
    means = mdp.mean_rewards()
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    pol = np.zeros((H, S), dtype=np.int64)
    rows = np.zeros((H, d, S))
    factor_values = np.zeros((H, d))
    dist = None if policy is None else as_distribution(policy, A)
    for h in range(H - 1, -1, -1):
        nu, _ = tv_inf_factors(mdp.factor_measures[h], V[h + 1], rho[h])
        factor_values[h] = nu
        rows[h] = tv_worst_factor_rows(mdp.factor_measures[h], V[h + 1], rho[h])
        Q[h] = means[h] + phi @ nu
        if dist is None:
            pol[h] = greedy(Q[h])
            V[h] = Q[h][np.arange(S), pol[h]]
        else:
            V[h] = np.sum(dist[h] * Q[h], axis=1)
            pol[h] = greedy(dist[h])
    kernels = np.einsum("sai,hix->hsax", phi, rows)
    return RobustDPResult(V=V, Q=Q, policy=pol, worst_factor_rows=rows, worst_kernels=kernels, factor_values=factor_values)


def robust_policy_evaluation(mdp, policy, rho_override=None):
    """Robust value of a deterministic (H, S) or stochastic (H, S, A) policy."""
    policy = validate_policy(policy, mdp)
    return _backward(mdp, policy, rho_override)


def robust_value_iteration(mdp, rho_override=None):
    """Optimal robust values, Q-functions and a deterministic optimal policy."""
    return _backward(mdp, None, rho_override)


def range_shrinkage_bound(rho, H, h):
    """Bound on max_s V_h - min_s V_h for 1-based step ``h`` and rho in (0, 1]."""
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]; the rho -> 0 limit is H - h + 1")
    return (1.0 - (1.0 - rho) ** (H - h + 1)) / rho


def uncertainty_function(mdp, policy, weight_matrices):
    """Worst-case cumulative diagonal penalty along ``policy``.

    Stage cost is ``g_h(s, a) = sum_i phi_i(s, a) sqrt(M_h[i, i])`` and the
    supremum over the d-rectangular set is taken by a backward sup-recursion.
    Returns one value per initial state.
    """
    policy = validate_policy(policy, mdp)
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    M = np.asarray(weight_matrices, dtype=np.float64)
    if M.ndim == 2:
        M = np.broadcast_to(M, (H,) + M.shape)
    d = mdp.feature_dim
    if M.shape != (H, d, d):
        raise ValueError(f"weight_matrices must have shape {(H, d, d)}")
    for h in range(H):
        if not np.allclose(M[h], M[h].T, atol=1e-10, rtol=0):
            raise ValueError(f"weight matrix at step {h} is not symmetric")
        if np.linalg.eigvalsh(M[h])[0] <= 0:
            raise ValueError(f"weight matrix at step {h} is not positive definite")
    diag_sqrt = np.sqrt(np.einsum("hii->hi", M))
    dist = as_distribution(policy, A)
    rho = mdp.uncertainty_levels
    W = np.zeros(S)
    for h in range(H - 1, -1, -1):
        up = tv_sup_factors(mdp.factor_measures[h], W, rho[h])
        per_sa = mdp.features @ (diag_sqrt[h] + up)
        W = np.sum(dist[h] * per_sa, axis=1)
    return W


def occupancy(mdp, policy, kernels=None, initial=None):
    """State-action occupancy d_h(s, a) under ``policy``, shape (H, S, A)."""
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    dist = as_distribution(validate_policy(policy, mdp), A)
    P = mdp.nominal_kernels() if kernels is None else kernels
    p = mdp.initial_distribution if initial is None else np.asarray(initial, dtype=np.float64)
    occ = np.zeros((H, S, A))
    for h in range(H):
        occ[h] = p[:, None] * dist[h]
        p = np.einsum("sa,sax->x", occ[h], P[h])
    return occ


def feature_second_moments(mdp, policy, kernels=None, initial=None):
    """E[phi phi^T] at every step, shape (H, d, d)."""
    occ = occupancy(mdp, policy, kernels, initial)
    phi = mdp.features
    return np.einsum("hsa,sai,saj->hij", occ, phi, phi)


def compute_kappa(mdp, behavior_policy):
    """Minimum over steps of the smallest eigenvalue of E[phi phi^T]."""
    moments = feature_second_moments(mdp, behavior_policy)
    smallest = min(np.linalg.eigvalsh(m)[0] for m in moments)
    return max(float(smallest), 0.0)
