"""Benchmark instance generators.

The hard family has two states ``x1`` (index 0) and ``x2`` (index 1), action
set ``{0, 1}^d`` encoded as integers (bit ``i`` of the index is ``a_i``), and
``d + 2`` features. Both states are absorbing under the nominal kernel and
only the first step carries model uncertainty.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .mdp import InstanceError, TabularLinearDRMDP

MAX_HARD_DIM = 12


def default_delta_gap(d, K):
    """Reward gap ``d^{3/2} / sqrt(2K)`` used by the lower-bound family."""
    return d**1.5 / np.sqrt(2.0 * K)


@dataclass(frozen=True)
class HardInstanceParams:
    d: int
    H: int
    rho: float
    xi: np.ndarray | None = None
    K_for_delta: int = 1024
    delta_gap: float | None = None

    def __post_init__(self):
        if not 1 <= self.d <= MAX_HARD_DIM:
            raise ValueError(f"d must lie in [1, {MAX_HARD_DIM}]")
        if self.H < 1:
            raise ValueError("H must be positive")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.rho > 0.75:
            warnings.warn("rho > 3/4 lies outside the lower-bound regime of this family", stacklevel=2)
        xi = np.ones((self.H, self.d)) if self.xi is None else np.asarray(self.xi, dtype=np.float64)
        if xi.shape != (self.H, self.d) or not np.all(np.abs(xi) == 1):
            raise ValueError(f"xi must be an (H, d) = {(self.H, self.d)} matrix of +-1 entries")
        object.__setattr__(self, "xi", xi)
        if self.delta_gap is None:
            if self.K_for_delta < 1:
                raise ValueError("K_for_delta must be positive")
            object.__setattr__(self, "delta_gap", float(default_delta_gap(self.d, self.K_for_delta)))
        if not 0 < self.delta_gap <= 1:
            raise InstanceError(
                f"delta_gap={self.delta_gap} puts the mean reward outside [0, 1]; "
                f"increase K_for_delta to at least {int(np.ceil(self.d**3 / 2))}"
            )

    @classmethod
    def random_xi(cls, d, H, rho, seed, **kwargs):
        rng = np.random.default_rng(seed)
        return cls(d=d, H=H, rho=rho, xi=rng.choice([-1.0, 1.0], size=(H, d)), **kwargs)


def action_bits(d):
    """Matrix of shape (2^d, d): row ``a`` holds the bits of action index ``a``."""
    idx = np.arange(2**d)
    return ((idx[:, None] >> np.arange(d)) & 1).astype(np.float64)


def build_hard_instance(params, reward_noise_std=1.0):
    """Return ``(mdp, behavior_policy)`` for the hard family."""
    d, H, rho = params.d, params.H, params.rho
    A = 2**d
    bits = action_bits(d)
    features = np.zeros((2, A, d + 2))
    features[0, :, :d] = bits / d
    features[0, :, d] = 1.0 - bits.sum(axis=1) / d
    features[1, :, d + 1] = 1.0
    mu = np.zeros((H, d + 2, 2))
    mu[:, : d + 1, 0] = 1.0
    mu[:, d + 1, 1] = 1.0
    theta = np.zeros((H, d + 2))
    theta[:, :d] = params.delta_gap * (params.xi + 1.0) / 2.0
    theta[:, d] = params.delta_gap / 2.0
    levels = np.zeros(H)
    levels[0] = rho
    init = np.array([(d + 1.0) / (d + 2.0), 1.0 / (d + 2.0)])
    mdp = TabularLinearDRMDP(
        features=features,
        factor_measures=mu,
        reward_params=theta,
        reward_noise_std=reward_noise_std,
        uncertainty_levels=levels,
        initial_distribution=init,
        metadata={
            "family": "hard",
            "d": d,
            "H": H,
            "rho": rho,
            "xi": params.xi.astype(int).tolist(),
            "delta_gap": params.delta_gap,
        },
    )
    behavior = np.zeros((H, 2, A))
    support = [0] + [1 << j for j in range(d)]
    behavior[:, :, support] = 1.0 / (d + 1)
    return mdp, behavior


def hard_instance_optimal_value(params):
    """Closed-form optimal robust value at ``x1``."""
    d, delta, rho = params.d, params.delta_gap, params.rho
    per_step = d + np.sum((1.0 + params.xi) / 2.0, axis=1)
    return float(delta / (2 * d) * (per_step[0] + (1.0 - rho) * per_step[1:].sum()))


def hard_instance_optimal_policy(params):
    """Deterministic optimal policy: ``a_h = (1 + xi_h) / 2`` at both states."""
    bits = ((params.xi + 1) / 2).astype(np.int64)
    idx = (bits << np.arange(params.d)).sum(axis=1)
    return np.repeat(idx[:, None], 2, axis=1)


def hard_instance_params_from_metadata(meta):
    return HardInstanceParams(
        d=int(meta["d"]), H=int(meta["H"]), rho=float(meta["rho"]), xi=np.array(meta["xi"]), delta_gap=float(meta["delta_gap"])
    )


def behavior_second_moment_closed_form(d):
    """E[phi phi^T] under the hard-instance behavior policy, shape (d+2, d+2)."""
    D = np.zeros((d + 1, d + 1))
    D[np.arange(d), np.arange(d)] = 1.0 / d**3
    D[:d, d] = D[d, :d] = (1.0 / d**2) * (1.0 - 1.0 / d)
    D[d, d] = (1.0 - 1.0 / d) ** 2 + 1.0 / d
    out = np.zeros((d + 2, d + 2))
    out[: d + 1, : d + 1] = D
    out[d + 1, d + 1] = 1.0 / d
    return d / (d + 2.0) * out


def random_simplex_mdp(num_states, num_actions, horizon, feature_dim, seed, rho=0.0, reward_noise_std=0.0):
    """Random instance with Dirichlet features and factor rows.

    Reward parameters are uniform on ``[0, 1]^d``, which keeps mean rewards in
    ``[0, 1]`` and ``||theta_h|| <= sqrt(d)`` without rescaling.
    """
    if min(num_states, num_actions, horizon, feature_dim) < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    S, A, H, d = num_states, num_actions, horizon, feature_dim
    features = rng.dirichlet(np.ones(d), size=(S, A))
    mu = rng.dirichlet(np.ones(S), size=(H, d))
    # renormalise so simplex sums are exact to rounding
    features /= features.sum(axis=2, keepdims=True)
    mu /= mu.sum(axis=2, keepdims=True)
    theta = rng.uniform(0.0, 1.0, size=(H, d))
    init = rng.dirichlet(np.ones(S))
    init /= init.sum()
    return TabularLinearDRMDP(
        features=features,
        factor_measures=mu,
        reward_params=theta,
        reward_noise_std=reward_noise_std,
        uncertainty_levels=np.broadcast_to(float(rho), (H,)),
        initial_distribution=init,
        metadata={"family": "random", "seed": seed},
    )
