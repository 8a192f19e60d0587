"""Pessimistic robust value iteration: DRPVI and its variance-aware variants.

All three algorithms share one backward pass. At step h they

1. regress truncated next-step values ``min(V_{h+1}(s'), alpha)`` on the
   features, once per candidate threshold alpha (optionally variance
   weighted),
2. pick, per factor i, the alpha maximising the empirical TV dual,
3. subtract the diagonal penalty ``beta * sum_i phi_i ||1_i||_{M^-1}`` and
   clip to ``[0, H - h + 1]``.

The variants differ only in the sample weights and the candidate set.
"""

from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import _backend
from .estimators import (
    build_covariance,
    empirical_kappa,
    estimate_reward_params,
    estimate_variance,
    penalty_iota,
    ridge_solve,
    variance_penalty,
    weighted_moment,
)
from .io import check_dataset_against

ALGORITHMS = ("drpvi", "va", "modified_va")
REWARD_MODES = ("auto", "known_theta", "ridge_estimated")


@dataclass(frozen=True)
class AlgoConfig:
    """Tuning knobs for the three algorithms.

    ``lam=None`` selects 1 for DRPVI and 1/H^2 for the variance-aware
    algorithms. ``beta=None`` selects the theory multiplier:
    ``4 sqrt(d) H sqrt(iota)`` for DRPVI and ``c2 sqrt(d) sqrt(iota)`` for the
    variance-aware algorithms, with ``iota = log(2 d H^2 K / delta_fail)``.
    The variance slack is ``c_v d^d_exponent H^3 sqrt(iota) / sqrt(K kappa)``
    where ``kappa`` defaults to the empirical coverage of the held-out data.
    ``reward_mode='auto'`` uses the instance's reward parameters when rewards
    are noiseless and a ridge estimate from the data otherwise.
    """

    lam: float | None = None
    beta: float | None = None
    c2: float = 1.0
    delta_fail: float = 0.1
    alpha_grid_size: int = 64
    reward_mode: str = "auto"
    c_v: float = 1.0
    d_exponent: float = 1.0
    kappa: float | None = None
    force_unit_variance: bool = False
    reference_lam: float | None = None
    reference_beta: float | None = None

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.beta is not None and not self.beta >= 0:
            raise ValueError("beta must be nonnegative")
        if not 0 < self.delta_fail < 1:
            raise ValueError("delta_fail must lie in (0, 1)")
        if self.alpha_grid_size < 2:
            raise ValueError("alpha_grid_size must be at least 2")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"reward_mode must be one of {REWARD_MODES}")
        if self.c_v < 0 or self.c2 < 0:
            raise ValueError("penalty constants must be nonnegative")
        if self.kappa is not None and self.kappa < 0:
            raise ValueError("kappa must be nonnegative")

    @property
    def beta_mode(self):
        return "theory" if self.beta is None else "manual"

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True, eq=False)
class AlgorithmOutput:
    algorithm: str
    policy: np.ndarray
    V_hat: np.ndarray
    Q_hat: np.ndarray
    penalties: np.ndarray
    alphas: np.ndarray
    nu_hat: np.ndarray
    theta: np.ndarray
    lam: float
    beta: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def weights(self):
        """Linear Q-weights ``theta_h + nu_hat_h`` per step."""
        return self.theta + self.nu_hat

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "lam": self.lam,
            "beta": self.beta,
            "policy": self.policy.tolist(),
            "V_hat": self.V_hat[:-1].tolist(),
            "Q_hat": self.Q_hat.tolist(),
            "penalties": self.penalties.tolist(),
            "alphas": self.alphas.tolist(),
            "nu_hat": self.nu_hat.tolist(),
            "weights": self.weights.tolist(),
            "diagnostics": self.diagnostics,
        }


def theory_beta(algorithm, d, H, K, config):
    iota = penalty_iota(d, H, K, config.delta_fail)
    if algorithm == "drpvi":
        return 4.0 * np.sqrt(d) * H * np.sqrt(iota)
    return config.c2 * np.sqrt(d) * np.sqrt(iota)


def candidate_alphas(V_next, H, extra=()):
    """Sorted distinct levels of ``V_next`` together with 0, H and ``extra``."""
    pts = np.concatenate([np.asarray(V_next, dtype=np.float64), [0.0, float(H)], np.asarray(extra, dtype=np.float64)])
    return np.unique(pts)


def compute_nu_hat(z_of_alpha, V_next, rho, candidates):
    """Per-factor maximiser of ``z_i(alpha) - rho (alpha - min_s min(V_s, alpha))``.

    Returns ``(nu_hat, alpha_star)``; ties go to the smallest alpha. With
    ``rho == 0`` the ball is a single point and the largest candidate is used
    directly.
    """
    cands = np.asarray(candidates, dtype=np.float64)
    if cands.size == 0:
        raise ValueError("candidate set is empty")
    if rho == 0:
        z = np.asarray(z_of_alpha(cands[-1]), dtype=np.float64)
        return z, np.full(z.shape, cands[-1])
    Z = np.array([z_of_alpha(a) for a in cands])
    vmin = float(np.min(V_next))
    offsets = rho * (cands - np.minimum(vmin, cands))
    nu, idx = _backend.kernels.select_alpha(Z, offsets)
    return nu, cands[idx]


class _StepModel:
    """Regression state for one step: covariances and moments per alpha."""

    def __init__(self, phi, targets, lam, weight_fn=None, alpha_free=True):
        self.phi = phi
        self.targets = targets
        self.lam = lam
        self.weight_fn = weight_fn
        self.alpha_free = alpha_free
        self._cov = {}

    def weights(self, alpha):
        return None if self.weight_fn is None else self.weight_fn(alpha)

    def cov(self, alpha):
        key = None if self.alpha_free else float(alpha)
        if key not in self._cov:
            self._cov[key] = build_covariance(self.phi, self.lam, self.weights(alpha))
        return self._cov[key]

    def z(self, alpha):
        y = np.minimum(self.targets, alpha)
        return ridge_solve(self.cov(alpha), weighted_moment(self.phi, y, self.weights(alpha)))


def _theta(dataset, mdp, h, lam, config):
    mode = config.reward_mode
    if mode == "auto":
        mode = "known_theta" if mdp.reward_noise_std == 0 else "ridge_estimated"
    if mode == "known_theta":
        return np.array(mdp.reward_params[h])
    s, a, r, _ = dataset.step(h)
    return estimate_reward_params(mdp.features[s, a], r, lam)


def _backward_pass(name, dataset, mdp, config, lam, beta, weight_factory=None):
    """Shared backward iteration.

    ``weight_factory(h, V_next)`` returns ``(weight_fn, alpha_free, extra)``
    for variance-weighted steps, or ``None`` for unit weights.
    """
    H, S, A, d = mdp.horizon, mdp.num_states, mdp.num_actions, mdp.feature_dim
    K = dataset.num_trajectories
    phi_table = mdp.features
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    penalties = np.zeros((H, S, A))
    policy = np.zeros((H, S), dtype=np.int64)
    alphas = np.zeros((H, d))
    nu_hat = np.zeros((H, d))
    thetas = np.zeros((H, d))
    cond = []
    weight_norm_bound = 2.0 * H * np.sqrt(d * K / lam)
    for h in range(H - 1, -1, -1):
        s, a, _, s_next = dataset.step(h)
        phi = phi_table[s, a]
        V_next = V[h + 1]
        weight_fn, alpha_free, extra = None, True, ()
        if weight_factory is not None:
            weight_fn, alpha_free, extra = weight_factory(h, V_next)
        model = _StepModel(phi, V_next[s_next], lam, weight_fn, alpha_free)
        cands = candidate_alphas(V_next, H, extra if not alpha_free else ())
        nu, alpha_star = compute_nu_hat(model.z, V_next, float(mdp.uncertainty_levels[h]), cands)
        inv_diag = np.array([model.cov(alpha_star[i]).inverse_diagonal[i] for i in range(d)])
        penalties[h] = beta * (phi_table @ np.sqrt(inv_diag))
        theta = _theta(dataset, mdp, h, lam, config)
        Q[h] = np.clip(phi_table @ (theta + nu) - penalties[h], 0.0, float(H - h))
        policy[h] = np.argmax(Q[h], axis=1)
        V[h] = Q[h][np.arange(S), policy[h]]
        alphas[h], nu_hat[h], thetas[h] = alpha_star, nu, theta
        cond.append(max(model.cov(al).condition_number for al in set(alpha_star.tolist())))
    norms = np.linalg.norm(thetas + nu_hat, axis=1)
    diagnostics = {
        "K": K,
        "condition_numbers": cond[::-1],
        "weight_norms": norms.tolist(),
        "weight_norm_bound": float(weight_norm_bound),
        "weight_norm_ok": bool(np.all(norms <= weight_norm_bound + 1e-9)),
    }
    return AlgorithmOutput(
        algorithm=name,
        policy=policy,
        V_hat=V,
        Q_hat=Q,
        penalties=penalties,
        alphas=alphas,
        nu_hat=nu_hat,
        theta=thetas,
        lam=float(lam),
        beta=float(beta),
        diagnostics=diagnostics,
    )


def drpvi(dataset, mdp, config=None):
    """Distributionally robust pessimistic value iteration.

    ``mdp`` supplies the features, the uncertainty levels and (when rewards
    are not estimated) the reward parameters; its factor measures are never
    read.
    """
    config = config or AlgoConfig()
    check_dataset_against(dataset, mdp)
    lam = 1.0 if config.lam is None else config.lam
    K = dataset.num_trajectories
    beta = theory_beta("drpvi", mdp.feature_dim, mdp.horizon, K, config) if config.beta is None else config.beta
    return _backward_pass("drpvi", dataset, mdp, config, lam, beta)


def _reference_values(dataset_prime, mdp, config):
    ref_config = replace(
        config, lam=config.reference_lam, beta=config.reference_beta, force_unit_variance=False
    )
    return drpvi(dataset_prime, mdp, ref_config).V_hat


def _variance_setup(dataset, dataset_prime, mdp, config, lam):
    check_dataset_against(dataset, mdp)
    check_dataset_against(dataset_prime, mdp)
    if dataset.overlaps(dataset_prime):
        raise ValueError("the two datasets share trajectories; variance estimation needs independent data")
    H, d = mdp.horizon, mdp.feature_dim
    K_prime = dataset_prime.num_trajectories
    if config.force_unit_variance:
        return None, 0.0
    V_ref = _reference_values(dataset_prime, mdp, config)
    kappa = empirical_kappa(dataset_prime, mdp.features) if config.kappa is None else config.kappa
    slack = variance_penalty(d, H, K_prime, kappa, config.delta_fail, config.c_v, config.d_exponent)
    return V_ref, slack


def _variance_aware(name, dataset, dataset_prime, mdp, config, alpha_dependent):
    config = config or AlgoConfig()
    H = mdp.horizon
    lam = 1.0 / H**2 if config.lam is None else config.lam
    K = dataset.num_trajectories
    beta = theory_beta(name, mdp.feature_dim, H, K, config) if config.beta is None else config.beta
    V_ref, slack = _variance_setup(dataset, dataset_prime, mdp, config, lam)
    if V_ref is None:
        return _backward_pass(name, dataset, mdp, config, lam, beta)
    grid = np.linspace(0.0, float(H), config.alpha_grid_size)

    def factory(h, V_next):
        s, a, _, _ = dataset.step(h)
        sp, ap, _, sp_next = dataset_prime.step(h)
        phi_prime = mdp.features[sp, ap]
        ref_next = V_ref[h + 1][sp_next]
        if not alpha_dependent:
            est = estimate_variance(phi_prime, ref_next, mdp.features, H, lam, slack)
            w = est.table[s, a]
            return (lambda alpha: w), True, ()
        cache = {}

        def weight_fn(alpha):
            key = float(alpha)
            if key not in cache:
                est = estimate_variance(phi_prime, ref_next, mdp.features, H, lam, slack, alpha=key)
                cache[key] = est.table[s, a]
            return cache[key]

        extra = np.concatenate([grid, V_ref[h + 1]])
        return weight_fn, False, extra

    out = _backward_pass(name, dataset, mdp, config, lam, beta, factory)
    out.diagnostics["variance_slack"] = slack
    return out


def va_drpvi(dataset, dataset_prime, mdp, config=None):
    """Variance-aware DRPVI with alpha-dependent variance weights.

    The alpha search runs over value breakpoints plus a uniform grid of
    ``alpha_grid_size`` points, since the weights break piecewise linearity.
    """
    return _variance_aware("va", dataset, dataset_prime, mdp, config, alpha_dependent=True)


def modified_va_drpvi(dataset, dataset_prime, mdp, config=None):
    """Variance-aware DRPVI with a single alpha-free variance estimate per step."""
    return _variance_aware("modified_va", dataset, dataset_prime, mdp, config, alpha_dependent=False)


def run_algorithm(name, dataset, mdp, config=None, dataset_prime=None):
    """Dispatch by name. Variance-aware runs split ``dataset`` when no held-out set is given."""
    if name not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
    if name == "drpvi":
        return drpvi(dataset, mdp, config)
    if dataset_prime is None:
        dataset, dataset_prime = dataset.split_alternating()
    fn = va_drpvi if name == "va" else modified_va_drpvi
    return fn(dataset, dataset_prime, mdp, config)
