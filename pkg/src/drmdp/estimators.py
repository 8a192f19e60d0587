"""Ridge-regression machinery shared by the offline algorithms."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class CovarianceMatrix:
    """``lam * I + sum_t phi_t phi_t^T / w_t`` with a cached Cholesky factor."""

    def __init__(self, matrix, lam):
        self.matrix = matrix
        self.matrix.setflags(write=False)
        self.lam = lam
        self._factor = cho_factor(matrix, lower=True)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def solve(self, b):
        return cho_solve(self._factor, b)

    @cached_property
    def inverse_diagonal(self):
        diag = np.diag(self.solve(np.eye(self.dim))).copy()
        diag.setflags(write=False)
        return diag

    @cached_property
    def condition_number(self):
        ev = np.linalg.eigvalsh(self.matrix)
        return float(ev[-1] / ev[0])


def build_covariance(phi, lam, weights=None):
    """Covariance of feature rows ``phi`` (n, d) with optional sample weights."""
    if not lam > 0:
        raise ValueError(f"ridge parameter must be positive, got {lam}")
    phi = np.asarray(phi, dtype=np.float64)
    d = phi.shape[1]
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if np.any(weights <= 0):
            raise ValueError("sample weights must be positive")
        phi_w = phi / weights[:, None]
    else:
        phi_w = phi
    return CovarianceMatrix(phi_w.T @ phi + lam * np.eye(d), lam)


def weighted_moment(phi, targets, weights=None):
    """``sum_t phi_t y_t / w_t``."""
    y = np.asarray(targets, dtype=np.float64)
    if weights is not None:
        y = y / weights
    return phi.T @ y


def ridge_solve(cov, moment):
    return cov.solve(np.asarray(moment, dtype=np.float64))


def diagonal_penalty(phi, cov):
    """``sum_i phi_i sqrt((cov^-1)_ii)`` for one feature vector or a table."""
    return np.asarray(phi) @ np.sqrt(cov.inverse_diagonal)


def estimate_reward_params(phi, rewards, lam):
    """Ridge estimate of the reward parameter from one step's samples."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape[0] == 0:
        return np.zeros(phi.shape[1])
    cov = build_covariance(phi, lam)
    return ridge_solve(cov, weighted_moment(phi, rewards))


def penalty_iota(d, H, K, delta_fail):
    """Log factor ``log(2 d H^2 K / delta)``; K is floored at 1."""
    return float(np.log(2.0 * d * H * H * max(K, 1) / delta_fail))


def variance_penalty(d, H, K, kappa, delta_fail, c_v=1.0, d_exponent=1.0):
    """Subtracted slack ``c_v d^p H^3 sqrt(iota) / sqrt(K kappa)``.

    Infinite when ``K * kappa == 0``, which pins every estimate to the floor.
    """
    if K <= 0 or kappa <= 0:
        return float("inf")
    iota = penalty_iota(d, H, K, delta_fail)
    return float(c_v * d**d_exponent * H**3 * np.sqrt(iota) / np.sqrt(K * kappa))


@dataclass(frozen=True)
class VarianceEstimate:
    """Per (s, a) variance estimate floored at 1, shape (S, A)."""

    table: np.ndarray
    penalty: float
    alpha: float | None = None


def estimate_variance(phi, next_values, feature_table, H, lam, penalty, alpha=None):
    """Truncated conditional-variance estimate from a held-out step slice.

    ``phi`` (n, d) and ``next_values`` (n,) are the held-out features and
    reference values at the observed next states. With ``alpha`` given the
    targets are truncated at ``alpha``; otherwise the raw values are used.
    """
    if penalty < 0:
        raise ValueError("variance penalty must be nonnegative")
    v = np.asarray(next_values, dtype=np.float64)
    if alpha is not None:
        v = np.minimum(v, alpha)
    phi = np.asarray(phi, dtype=np.float64)
    cov = build_covariance(phi, lam)
    z1 = ridge_solve(cov, weighted_moment(phi, v))
    z2 = ridge_solve(cov, weighted_moment(phi, v * v))
    second = np.clip(feature_table @ z2, 0.0, float(H) ** 2)
    first = np.clip(feature_table @ z1, 0.0, float(H))
    table = np.maximum(1.0, second - first**2 - penalty)
    return VarianceEstimate(table=table, penalty=float(penalty), alpha=alpha)


def empirical_kappa(dataset, feature_table):
    """Smallest eigenvalue of the per-step empirical E[phi phi^T], minimised over steps."""
    K = dataset.num_trajectories
    if K == 0:
        return 0.0
    out = np.inf
    for h in range(dataset.horizon):
        s, a, _, _ = dataset.step(h)
        phi = feature_table[s, a]
        out = min(out, np.linalg.eigvalsh(phi.T @ phi / K)[0])
    return max(float(out), 0.0)
