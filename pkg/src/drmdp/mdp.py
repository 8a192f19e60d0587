"""Core types for finite d-rectangular linear DRMDPs and offline datasets.

States and actions are dense integer indices. Steps are 0-based internally
(``h = 0`` is the first decision step); the on-disk formats use 1-based steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIMPLEX_TOL = 1e-12


class InstanceError(ValueError):
    """An instance or dataset violates a structural invariant."""


def _frozen(x, dtype=np.float64):
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TabularLinearDRMDP:
    """Finite-horizon linear MDP with per-step TV uncertainty levels.

    Parameters
    ----------
    features : array, shape (S, A, d)
        Simplex feature vectors phi(s, a).
    factor_measures : array, shape (H, d, S)
        Row ``[h, i]`` is the nominal factor distribution mu_{h,i}.
    reward_params : array, shape (H, d)
        Mean reward at step h is ``features @ reward_params[h]``.
    reward_noise_std : float
        Standard deviation of the Gaussian noise added to observed rewards.
    uncertainty_levels : array, shape (H,)
        TV radius rho_h of every factor ball at step h.
    initial_distribution : array, shape (S,)
    """

    features: np.ndarray
    factor_measures: np.ndarray
    reward_params: np.ndarray
    reward_noise_std: float
    uncertainty_levels: np.ndarray
    initial_distribution: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features))
        object.__setattr__(self, "factor_measures", _frozen(self.factor_measures))
        object.__setattr__(self, "reward_params", _frozen(self.reward_params))
        object.__setattr__(self, "uncertainty_levels", _frozen(self.uncertainty_levels))
        object.__setattr__(self, "initial_distribution", _frozen(self.initial_distribution))
        object.__setattr__(self, "reward_noise_std", float(self.reward_noise_std))
        object.__setattr__(self, "metadata", dict(self.metadata))
        self.validate()

    @property
    def num_states(self):
        return self.features.shape[0]

    @property
    def num_actions(self):
        return self.features.shape[1]

    @property
    def feature_dim(self):
        return self.features.shape[2]

    @property
    def horizon(self):
        return self.factor_measures.shape[0]

    def validate(self):
        """Raise :class:`InstanceError` naming the first violated invariant."""
        phi, mu, theta = self.features, self.factor_measures, self.reward_params
        if phi.ndim != 3 or min(phi.shape) < 1:
            raise InstanceError(f"features: expected shape (S, A, d), got {phi.shape}")
        S, A, d = phi.shape
        if mu.ndim != 3 or mu.shape[1:] != (d, S) or mu.shape[0] < 1:
            raise InstanceError(f"factor_measures: expected shape (H, {d}, {S}), got {mu.shape}")
        H = mu.shape[0]
        if theta.shape != (H, d):
            raise InstanceError(f"reward_params: expected shape ({H}, {d}), got {theta.shape}")
        if self.uncertainty_levels.shape != (H,):
            raise InstanceError(
                f"uncertainty_levels: expected shape ({H},), got {self.uncertainty_levels.shape}"
            )
        if self.initial_distribution.shape != (S,):
            raise InstanceError(
                f"initial_distribution: expected shape ({S},), got {self.initial_distribution.shape}"
            )
        for name, arr in [("features", phi), ("factor_measures", mu), ("reward_params", theta)]:
            if not np.all(np.isfinite(arr)):
                raise InstanceError(f"{name}: non-finite entries")

        bad = np.argwhere(phi < 0)
        if bad.size:
            s, a, i = bad[0]
            raise InstanceError(f"features[{s}][{a}][{i}] is negative")
        sums = phi.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > SIMPLEX_TOL)
        if bad.size:
            s, a = bad[0]
            raise InstanceError(f"features[{s}][{a}] sums to {float(sums[s, a])!r}, not 1")

        bad = np.argwhere(mu < 0)
        if bad.size:
            h, i, s = bad[0]
            raise InstanceError(f"factor_measures[{h}][{i}][{s}] is negative")
        sums = mu.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > SIMPLEX_TOL)
        if bad.size:
            h, i = bad[0]
            raise InstanceError(f"factor_measures[{h}][{i}] sums to {float(sums[h, i])!r}, not 1")

        norms = np.linalg.norm(theta, axis=1)
        bad = np.flatnonzero(norms > np.sqrt(d) + SIMPLEX_TOL)
        if bad.size:
            raise InstanceError(f"reward_params[{bad[0]}] has norm {float(norms[bad[0]])!r} > sqrt(d)")
        means = self.mean_rewards()
        bad = np.argwhere((means < -SIMPLEX_TOL) | (means > 1 + SIMPLEX_TOL))
        if bad.size:
            h, s, a = bad[0]
            raise InstanceError(f"mean reward at h={h}, s={s}, a={a} is {float(means[h, s, a])!r}, outside [0, 1]")

        if self.reward_noise_std < 0 or not np.isfinite(self.reward_noise_std):
            raise InstanceError("reward_noise_std must be a finite nonnegative number")
        rho = self.uncertainty_levels
        if np.any(~np.isfinite(rho)) or np.any(rho < 0) or np.any(rho > 1):
            raise InstanceError(f"uncertainty_levels must lie in [0, 1], got {rho.tolist()}")
        p0 = self.initial_distribution
        if np.any(p0 < 0) or abs(p0.sum() - 1.0) > SIMPLEX_TOL:
            raise InstanceError("initial_distribution is not a probability vector")

    def mean_rewards(self):
        """Mean rewards, shape (H, S, A)."""
        return np.einsum("sai,hi->hsa", self.features, self.reward_params)

    def nominal_kernels(self):
        """All nominal kernels P0_h(s'|s,a), shape (H, S, A, S)."""
        return np.einsum("sai,hix->hsax", self.features, self.factor_measures)

    def with_uncertainty(self, levels):
        """Copy of this instance with different uncertainty levels."""
        levels = np.broadcast_to(np.asarray(levels, dtype=np.float64), (self.horizon,))
        return TabularLinearDRMDP(
            features=self.features,
            factor_measures=self.factor_measures,
            reward_params=self.reward_params,
            reward_noise_std=self.reward_noise_std,
            uncertainty_levels=levels,
            initial_distribution=self.initial_distribution,
            metadata=self.metadata,
        )

    def equals(self, other):
        if not isinstance(other, TabularLinearDRMDP):
            return False
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.factor_measures, other.factor_measures)
            and np.array_equal(self.reward_params, other.reward_params)
            and self.reward_noise_std == other.reward_noise_std
            and np.array_equal(self.uncertainty_levels, other.uncertainty_levels)
            and np.array_equal(self.initial_distribution, other.initial_distribution)
        )


def nominal_kernel(mdp, h, s, a):
    """Nominal next-state distribution ``sum_i phi_i(s, a) mu_{h,i}``."""
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    for name, idx, size in [("h", h, H), ("s", s, S), ("a", a, A)]:
        if not 0 <= idx < size:
            raise IndexError(f"{name}={idx} out of range [0, {size})")
    return mdp.features[s, a] @ mdp.factor_measures[h]


def validate_policy(policy, mdp, stochastic=None):
    """Check a policy array against ``mdp`` and return it as an ndarray.

    Deterministic policies have shape (H, S) with integer actions; stochastic
    ones have shape (H, S, A) with rows on the simplex.
    """
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    pol = np.asarray(policy)
    if stochastic is None:
        stochastic = pol.ndim == 3
    if stochastic:
        pol = pol.astype(np.float64)
        if pol.shape != (H, S, A):
            raise ValueError(f"stochastic policy must have shape {(H, S, A)}, got {pol.shape}")
        if np.any(pol < 0) or np.any(np.abs(pol.sum(axis=2) - 1.0) > SIMPLEX_TOL):
            bad = np.argwhere((np.abs(pol.sum(axis=2) - 1.0) > SIMPLEX_TOL) | np.any(pol < 0, axis=2))
            h, s = bad[0]
            raise ValueError(f"policy distribution at h={h}, s={s} is not a probability vector")
        return pol
    if pol.shape != (H, S):
        raise ValueError(f"deterministic policy must have shape {(H, S)}, got {pol.shape}")
    if not np.issubdtype(pol.dtype, np.integer):
        if not np.all(pol == np.round(pol)):
            raise ValueError("deterministic policy entries must be integers")
        pol = pol.astype(np.int64)
    if np.any(pol < 0) or np.any(pol >= A):
        raise ValueError(f"policy action index out of range [0, {A})")
    return pol


def as_distribution(policy, num_actions):
    """One-hot (H, S, A) view of a deterministic (H, S) policy."""
    pol = np.asarray(policy)
    if pol.ndim == 3:
        return pol
    out = np.zeros(pol.shape + (num_actions,))
    np.put_along_axis(out, pol[..., None], 1.0, axis=2)
    return out


@dataclass(frozen=True, eq=False)
class OfflineDataset:
    """K trajectories of length H stored as dense arrays.

    ``states`` has shape (K, H + 1); ``actions`` and ``rewards`` have shape
    (K, H). ``sources`` holds a provenance id per trajectory so that datasets
    split from one collection can be checked for overlap.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    seed: int | None = None
    sources: tuple = ()

    def __post_init__(self):
        states = _frozen(self.states, np.int64)
        actions = _frozen(self.actions, np.int64)
        rewards = _frozen(self.rewards)
        if states.ndim != 2 or actions.ndim != 2 or rewards.shape != actions.shape:
            raise InstanceError("dataset arrays have inconsistent shapes")
        if states.shape != (actions.shape[0], actions.shape[1] + 1):
            raise InstanceError(
                f"states must have shape (K, H + 1) = {(actions.shape[0], actions.shape[1] + 1)}, "
                f"got {states.shape}"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "rewards", rewards)
        sources = tuple(self.sources) or tuple((self.seed, k) for k in range(states.shape[0]))
        if len(sources) != states.shape[0]:
            raise InstanceError("one source id per trajectory is required")
        object.__setattr__(self, "sources", tuple(tuple(x) if isinstance(x, list) else x for x in sources))

    @property
    def num_trajectories(self):
        return self.actions.shape[0]

    @property
    def horizon(self):
        return self.actions.shape[1]

    def step(self, h):
        """Arrays ``(s, a, r, s_next)`` for 0-based step ``h``."""
        return self.states[:, h], self.actions[:, h], self.rewards[:, h], self.states[:, h + 1]

    def transitions(self):
        """Iterate over ``(k, h, s, a, r, s_next)`` records (h is 1-based)."""
        for k in range(self.num_trajectories):
            for h in range(self.horizon):
                yield (
                    k,
                    h + 1,
                    int(self.states[k, h]),
                    int(self.actions[k, h]),
                    float(self.rewards[k, h]),
                    int(self.states[k, h + 1]),
                )

    def subset(self, index):
        index = np.asarray(index, dtype=np.int64)
        return OfflineDataset(
            states=self.states[index],
            actions=self.actions[index],
            rewards=self.rewards[index],
            seed=self.seed,
            sources=tuple(self.sources[k] for k in index),
        )

    def split_alternating(self):
        """Even trajectories and odd trajectories as two disjoint datasets."""
        K = self.num_trajectories
        return self.subset(np.arange(0, K, 2)), self.subset(np.arange(1, K, 2))

    def overlaps(self, other):
        return bool(set(self.sources) & set(other.sources))

    def equals(self, other):
        return (
            np.array_equal(self.states, other.states)
            and np.array_equal(self.actions, other.actions)
            and np.array_equal(self.rewards, other.rewards)
            and self.seed == other.seed
        )


def _inverse_cdf(probs, u):
    cum = np.cumsum(probs, axis=-1)
    idx = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(idx, probs.shape[-1] - 1)


def collect_offline_dataset(mdp, behavior_policy, K, seed):
    """Sample K trajectories under the nominal kernel.

    The behavior policy has shape (H, S, A). All K trajectories advance in
    lockstep; the draw order per step is actions, reward noise, next states.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    pol = validate_policy(behavior_policy, mdp, stochastic=True)
    H, S = mdp.horizon, mdp.num_states
    rng = np.random.default_rng(seed)
    means = mdp.mean_rewards()
    P0 = mdp.nominal_kernels()
    states = np.empty((K, H + 1), dtype=np.int64)
    actions = np.empty((K, H), dtype=np.int64)
    rewards = np.empty((K, H))
    states[:, 0] = _inverse_cdf(np.broadcast_to(mdp.initial_distribution, (K, S)), rng.random(K))
    for h in range(H):
        s = states[:, h]
        a = _inverse_cdf(pol[h, s], rng.random(K))
        actions[:, h] = a
        r = means[h, s, a]
        if mdp.reward_noise_std > 0:
            r = r + mdp.reward_noise_std * rng.standard_normal(K)
        rewards[:, h] = r
        states[:, h + 1] = _inverse_cdf(P0[h, s, a], rng.random(K))
    return OfflineDataset(states=states, actions=actions, rewards=rewards, seed=seed)


def uniform_policy(mdp):
    """Uniform stochastic policy over all actions, shape (H, S, A)."""
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    return np.full((H, S, A), 1.0 / A)
