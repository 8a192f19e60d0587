"""Total-variation inner problems solved through their scalar dual.

For a nominal distribution ``mu0`` and a value vector ``V`` the worst-case
expectation over ``{mu : TV(mu, mu0) <= rho}`` (TV = half the L1 distance)
equals

    max_alpha  E_mu0[min(V, alpha)] - rho * (alpha - min_s min(V_s, alpha)).

The objective is concave and piecewise linear with kinks only at the levels
of ``V``, so evaluating it at those levels is exact.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .mdp import SIMPLEX_TOL


@dataclass(frozen=True)
class DualSolution:
    value: float
    alpha_star: float
    worst_distribution: np.ndarray


def truncate(values, alpha):
    return np.minimum(np.asarray(values, dtype=np.float64), alpha)


def clip(x, lo, hi):
    if lo > hi:
        raise ValueError(f"clip bounds reversed: lo={lo} > hi={hi}")
    return np.minimum(np.maximum(x, lo), hi)


def _check(mu0, values, rho):
    mu0 = np.asarray(mu0, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if mu0.shape[-1] != values.shape[0] or values.ndim != 1:
        raise ValueError("mu0 and values must be over the same state set")
    if np.any(mu0 < 0) or np.any(np.abs(mu0.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise ValueError("mu0 is not a probability vector")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    return mu0, values


def tv_dual_inf(mu0, values, rho):
    """Worst-case expectation of ``values`` over the TV ball around ``mu0``."""
    mu0, values = _check(mu0, values, rho)
    k = _backend.kernels
    vals, alphas = k.tv_inf_rows(mu0[None, :], values, float(rho))
    worst = k.greedy_rows(mu0[None, :], values, float(rho))[0]
    return DualSolution(value=float(vals[0]), alpha_star=float(alphas[0]), worst_distribution=worst)


def tv_inf_factors(mu, values, rho):
    """Dual values and maximising thresholds for every row of ``mu``."""
    return _backend.kernels.tv_inf_rows(mu, values, float(rho))


def tv_worst_case_distribution(mu0, values, rho):
    mu0, values = _check(mu0, values, rho)
    return _backend.kernels.greedy_rows(mu0[None, :], values, float(rho))[0]


def tv_worst_factor_rows(mu, values, rho):
    return _backend.kernels.greedy_rows(mu, values, float(rho))


def tv_dual_sup(mu0, values, rho):
    """Best-case expectation over the TV ball, via ``C - inf(C - V)``."""
    mu0, values = _check(mu0, values, rho)
    c = values.max()
    return float(c - tv_dual_inf(mu0, c - values, rho).value)


def tv_sup_factors(mu, values, rho):
    values = np.asarray(values, dtype=np.float64)
    c = values.max()
    inf_vals, _ = _backend.kernels.tv_inf_rows(mu, c - values, float(rho))
    return c - inf_vals
