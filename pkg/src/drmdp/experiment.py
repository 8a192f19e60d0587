"""Evaluation helpers and the seeded K-sweep harness."""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .algorithms import ALGORITHMS, AlgoConfig, run_algorithm, theory_beta
from .estimators import build_covariance
from .instances import HardInstanceParams, build_hard_instance, hard_instance_optimal_policy
from .io import load_instance
from .mdp import collect_offline_dataset, uniform_policy
from .robust_dp import (
    compute_kappa,
    occupancy,
    robust_policy_evaluation,
    robust_value_iteration,
    uncertainty_function,
)

MASK64 = (1 << 64) - 1


def splitmix64(x):
    """SplitMix64 finaliser on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(*parts):
    """Fold integers into one 64-bit seed with repeated SplitMix64 mixing."""
    h = 0
    for p in parts:
        h = splitmix64(h ^ (int(p) & MASK64))
    return h


def evaluate_suboptimality(mdp, policy, exact=None):
    """``V*_1(s) - V^pi_1(s)`` for every state."""
    exact = exact or robust_value_iteration(mdp)
    return exact.V[0] - robust_policy_evaluation(mdp, policy).V[0]


@dataclass(frozen=True)
class PessimismReport:
    max_excess: float
    violated: bool
    worst_step: int
    worst_state: int


def check_pessimism(output, exact, tol=1e-9):
    """Largest ``V_hat_h(s) - V*_h(s)`` over steps and states."""
    est, ref = output.V_hat, exact.V
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {ref.shape}")
    diff = est[:-1] - ref[:-1]
    h, s = np.unravel_index(int(np.argmax(diff)), diff.shape)
    worst = float(diff[h, s])
    return PessimismReport(max_excess=worst, violated=worst > tol, worst_step=int(h), worst_state=int(s))


def sample_covariances(mdp, dataset, lam, weights=None):
    """Per-step covariance matrices from a dataset; ``weights`` is (H, S, A) or None."""
    covs = []
    for h in range(mdp.horizon):
        s, a, _, _ = dataset.step(h)
        w = None if weights is None else weights[h][s, a]
        covs.append(build_covariance(mdp.features[s, a], lam, w))
    return covs


def true_truncated_variances(mdp, exact):
    """``max(1, Var_{P0_h(.|s,a)} V*_{h+1})`` for every (h, s, a)."""
    P0 = mdp.nominal_kernels()
    V_next = exact.V[1:]
    mean = np.einsum("hsax,hx->hsa", P0, V_next)
    second = np.einsum("hsax,hx->hsa", P0, V_next**2)
    return np.maximum(1.0, second - mean**2)


def compute_phi_report(mdp, dataset, pi_star, which="Lambda", lam=1.0, exact=None):
    """Uncertainty function along ``pi_star`` for ``Lambda^-1`` or ``Sigma*^-1``.

    Returns one value per initial state.
    """
    if which == "Lambda":
        weights = None
    elif which == "SigmaStar":
        exact = exact or robust_value_iteration(mdp)
        weights = true_truncated_variances(mdp, exact)
    else:
        raise ValueError("which must be 'Lambda' or 'SigmaStar'")
    covs = sample_covariances(mdp, dataset, lam, weights)
    M = np.array([c.solve(np.eye(c.dim)) for c in covs])
    M = (M + np.transpose(M, (0, 2, 1))) / 2
    return uncertainty_function(mdp, pi_star, M)


def check_partial_coverage(mdp, dataset, pi_star, lam=1.0, exact=None):
    """Largest c with ``Lambda_h - lam I >= K c E[(phi_i 1_i)(phi_i 1_i)^T]``.

    The expectation runs along ``pi_star`` from every initial state under the
    nominal kernel and the worst-case kernels of the DP oracle. Returns
    ``inf`` when the dataset is empty.
    """
    K = dataset.num_trajectories
    if K == 0:
        return math.inf
    exact = exact or robust_value_iteration(mdp)
    d, S = mdp.feature_dim, mdp.num_states
    kernel_sets = [mdp.nominal_kernels(), exact.worst_kernels]
    covs = sample_covariances(mdp, dataset, lam)
    phi_sq = mdp.features**2
    best = math.inf
    for h, cov in enumerate(covs):
        A = cov.matrix - lam * np.eye(d)
        pinv = np.linalg.pinv(A, hermitian=True)
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            in_range = np.allclose(A @ (pinv @ e), e, atol=1e-9)
            cap = 1.0 / pinv[i, i] if in_range and pinv[i, i] > 0 else 0.0
            for P in kernel_sets:
                for s0 in range(S):
                    occ = occupancy(mdp, pi_star, kernels=P, initial=np.eye(S)[s0])
                    m = float(np.sum(occ[h] * phi_sq[:, :, i]))
                    if m > 0:
                        best = min(best, cap / (K * m))
    return best


# ---------------------------------------------------------------- sweeps

SWEEP_KEYS = {
    "instance": str,
    "hard_d": int,
    "hard_H": int,
    "hard_rho": float,
    "hard_xi": str,
    "hard_xi_seed": int,
    "delta_mode": str,
    "K_for_delta": int,
    "K_values": str,
    "seeds": int,
    "base_seed": int,
    "algorithms": str,
    "workers": int,
    "output_dir": str,
    "drpvi_budget": str,
    "compute_phi": str,
    "plot": str,
}


@dataclass(frozen=True)
class SweepConfig:
    """One K-sweep.

    Either ``instance`` (a JSON path) or the ``hard_*`` fields describe the
    environment. ``delta_mode='per_k'`` rebuilds the hard instance for each
    K with reward gap ``d^{3/2}/sqrt(2K)``; ``'fixed'`` uses ``K_for_delta``.
    ``drpvi_budget='matched'`` lets DRPVI use all 2K trajectories that the
    variance-aware runs split; ``'single'`` gives it K.
    """

    K_values: tuple
    seeds: int = 5
    algorithms: tuple = ("drpvi",)
    base_seed: int = 0
    instance: str | None = None
    hard_d: int = 2
    hard_H: int = 3
    hard_rho: float = 0.5
    hard_xi: tuple | None = None
    hard_xi_seed: int | None = None
    delta_mode: str = "per_k"
    K_for_delta: int = 1024
    workers: int = 1
    output_dir: str = "sweep_out"
    drpvi_budget: str = "single"
    compute_phi: bool = True
    plot: bool = True
    algo: AlgoConfig = field(default_factory=AlgoConfig)

    def __post_init__(self):
        ks = tuple(int(k) for k in self.K_values)
        if not ks or list(ks) != sorted(ks) or ks[0] < 1:
            raise ValueError("K_values must be positive and sorted ascending")
        object.__setattr__(self, "K_values", ks)
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        algs = tuple(self.algorithms)
        bad = [a for a in algs if a not in ALGORITHMS]
        if bad or not algs:
            raise ValueError(f"invalid algorithm name(s) {bad}; expected a subset of {ALGORITHMS}")
        object.__setattr__(self, "algorithms", algs)
        if self.delta_mode not in ("per_k", "fixed"):
            raise ValueError("delta_mode must be 'per_k' or 'fixed'")
        if self.drpvi_budget not in ("single", "matched"):
            raise ValueError("drpvi_budget must be 'single' or 'matched'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_xi(text):
    rows = [r for r in text.split(";") if r.strip()]
    return tuple(tuple(float(x) for x in r.split(",")) for r in rows)


def _parse_optional_float(text):
    low = text.strip().lower()
    if low in ("none", "theory", "auto", ""):
        return None
    return float(text)


ALGO_PARSERS = {
    "lam": _parse_optional_float,
    "beta": _parse_optional_float,
    "c2": float,
    "delta_fail": float,
    "alpha_grid_size": int,
    "reward_mode": str,
    "c_v": float,
    "d_exponent": float,
    "kappa": _parse_optional_float,
    "force_unit_variance": _parse_bool,
    "reference_lam": _parse_optional_float,
    "reference_beta": _parse_optional_float,
}


def parse_sweep_config(text, base_dir="."):
    """Parse flat ``key=value`` lines. ``#`` starts a comment; unknown keys raise."""
    sweep, algo = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        if key in SWEEP_KEYS:
            sweep[key] = value
        elif key in ALGO_PARSERS:
            try:
                algo[key] = ALGO_PARSERS[key](value)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from exc
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    if "K_values" not in sweep:
        raise ValueError("K_values is required")
    kwargs = {}
    for key, value in sweep.items():
        if key == "K_values":
            kwargs[key] = tuple(int(x) for x in value.replace(",", " ").split())
        elif key == "algorithms":
            kwargs[key] = tuple(x for x in value.replace(",", " ").split())
        elif key == "hard_xi":
            kwargs[key] = _parse_xi(value)
        elif key in ("compute_phi", "plot"):
            kwargs[key] = _parse_bool(value)
        elif key == "instance":
            kwargs[key] = value if os.path.isabs(value) else os.path.join(base_dir, value)
        else:
            kwargs[key] = SWEEP_KEYS[key](value)
    return SweepConfig(algo=AlgoConfig(**algo), **kwargs)


CSV_COLUMNS = (
    "algorithm",
    "K",
    "seed_index",
    "data_seed",
    "trajectories_used",
    "total_budget",
    "subopt_weighted",
    # subopt_s<i> columns for each state are inserted here
    "phi_lambda",
    "phi_sigma_star",
    "kappa",
    "beta",
    "bound_upper",
    "bound_phi",
    "bound_lower",
    "pessimism_excess",
    "pessimism_violated",
    "wall_time",
)

CSV_HELP = """\
CSV columns (one row per algorithm, K, seed):
  algorithm          drpvi | va | modified_va
  K                  trajectories per dataset
  seed_index         0..seeds-1
  data_seed          derived seed used to collect the data
  trajectories_used  trajectories consumed by the algorithm
  total_budget       trajectories collected for this cell (2K)
  subopt_weighted    initial-distribution weighted suboptimality
  subopt_s<i>        suboptimality from state i
  phi_lambda         uncertainty function with Lambda^-1 (initial-weighted)
  phi_sigma_star     uncertainty function with Sigma*^-1 (initial-weighted)
  kappa              feature coverage of the behavior policy
  beta               penalty multiplier used
  bound_upper        beta * phi (the instance-dependent upper bound)
  bound_phi          4 d^{3/2} H / sqrt(K) (hard instance only)
  bound_lower        d^{3/2} H / (128 sqrt(K)) (hard instance only)
  pessimism_excess   max_{h,s} V_hat - V*
  pessimism_violated 1 if pessimism_excess > 1e-9
  wall_time          seconds spent in the algorithm call
"""


def _build_environment(config, K):
    if config.instance is not None:
        mdp = load_instance(config.instance)
        return mdp, uniform_policy(mdp), None
    xi = None if config.hard_xi is None else np.array(config.hard_xi)
    if xi is None and config.hard_xi_seed is not None:
        rng = np.random.default_rng(config.hard_xi_seed)
        xi = rng.choice([-1.0, 1.0], size=(config.hard_H, config.hard_d))
    k_delta = K if config.delta_mode == "per_k" else config.K_for_delta
    params = HardInstanceParams(d=config.hard_d, H=config.hard_H, rho=config.hard_rho, xi=xi, K_for_delta=k_delta)
    mdp, behavior = build_hard_instance(params)
    return mdp, behavior, params


def run_cell(config, K, seed_index):
    """Run every algorithm on one (K, seed) cell with shared data.

    The data seed mixes (base_seed, K, seed_index) only, so algorithms are
    compared on identical datasets.
    """
    mdp, behavior, params = _build_environment(config, K)
    exact = robust_value_iteration(mdp)
    data_seed = derive_seed(config.base_seed, K, seed_index)
    full = collect_offline_dataset(mdp, behavior, 2 * K, data_seed)
    d_half, d_prime = full.split_alternating()
    kappa = compute_kappa(mdp, behavior)
    init = mdp.initial_distribution
    phi_lam = phi_sig = float("nan")
    if config.compute_phi:
        pi_star = exact.policy
        phi_lam = float(init @ compute_phi_report(mdp, d_half, pi_star, "Lambda", lam=1.0, exact=exact))
        H = mdp.horizon
        phi_sig = float(init @ compute_phi_report(mdp, d_half, pi_star, "SigmaStar", lam=1.0 / H**2, exact=exact))
    rows = []
    for name in config.algorithms:
        if name == "drpvi":
            data = full if config.drpvi_budget == "matched" else d_half
            t0 = time.perf_counter()
            out = run_algorithm("drpvi", data, mdp, config.algo)
            used = data.num_trajectories
        else:
            t0 = time.perf_counter()
            out = run_algorithm(name, d_half, mdp, config.algo, dataset_prime=d_prime)
            used = 2 * K
        wall = time.perf_counter() - t0
        sub = evaluate_suboptimality(mdp, out.policy, exact)
        pess = check_pessimism(out, exact)
        phi_for_bound = phi_lam if name == "drpvi" else phi_sig
        row = {
            "algorithm": name,
            "K": K,
            "seed_index": seed_index,
            "data_seed": data_seed,
            "trajectories_used": used,
            "total_budget": 2 * K,
            "subopt_weighted": float(init @ sub),
            "phi_lambda": phi_lam,
            "phi_sigma_star": phi_sig,
            "kappa": kappa,
            "beta": out.beta,
            "bound_upper": out.beta * phi_for_bound,
            "bound_phi": float("nan"),
            "bound_lower": float("nan"),
            "pessimism_excess": pess.max_excess,
            "pessimism_violated": int(pess.violated),
            "wall_time": wall,
        }
        for s, v in enumerate(sub):
            row[f"subopt_s{s}"] = float(v)
        if params is not None:
            dd, H = params.d, params.H
            row["bound_phi"] = 4 * dd**1.5 * H / math.sqrt(K)
            row["bound_lower"] = dd**1.5 * H / (128 * math.sqrt(K))
        rows.append(row)
    return rows


def _cell_job(args):
    config, K, seed_index = args
    return run_cell(config, K, seed_index)


def sweep_rows(config):
    """All rows in deterministic (algorithm, K, seed) order."""
    jobs = [(config, K, i) for K in config.K_values for i in range(config.seeds)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]
    by_cell = {(K, i): rows for (_, K, i), rows in zip(jobs, results)}
    out = []
    for name in config.algorithms:
        for K in config.K_values:
            for i in range(config.seeds):
                out.extend(r for r in by_cell[(K, i)] if r["algorithm"] == name)
    return out


def fit_loglog_slope(ks, means):
    """Least-squares slope of ``log(mean)`` against ``log(K)``; NaN if any mean <= 0."""
    ks = np.asarray(ks, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    if len(ks) < 2 or np.any(means <= 0):
        return float("nan")
    x, y = np.log(ks), np.log(means)
    x = x - x.mean()
    return float(np.sum(x * (y - y.mean())) / np.sum(x * x))


def summarize(rows, algorithms, K_values):
    """Per-(algorithm, K) mean and standard error, plus per-algorithm slope."""
    summary = []
    slopes = {}
    for name in algorithms:
        means = []
        for K in K_values:
            vals = np.array([r["subopt_weighted"] for r in rows if r["algorithm"] == name and r["K"] == K])
            mean = float(vals.mean())
            se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
            means.append(mean)
            summary.append({"algorithm": name, "K": K, "mean_subopt": mean, "stderr": se, "n": len(vals)})
        slopes[name] = fit_loglog_slope(K_values, means)
    return summary, slopes


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, path, num_states):
    cols = list(CSV_COLUMNS)
    at = cols.index("subopt_weighted") + 1
    cols[at:at] = [f"subopt_s{s}" for s in range(num_states)]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])
    return cols


def write_summary(summary, slopes, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["algorithm", "K", "mean_subopt", "stderr", "n", "loglog_slope"])
        for r in summary:
            w.writerow([r["algorithm"], r["K"], repr(r["mean_subopt"]), repr(r["stderr"]), r["n"], repr(slopes[r["algorithm"]])])


COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def render_svg(summary, algorithms, width=640, height=440):
    """Log-log plot of mean suboptimality vs K with error bars and a K^{-1/2} guide."""
    pts = [r for r in summary if r["mean_subopt"] > 0]
    if not pts:
        return '<svg xmlns="http://www.w3.org/2000/svg" width="10" height="10"></svg>\n'
    ks = [r["K"] for r in pts]
    lo = min(max(r["mean_subopt"] - r["stderr"], r["mean_subopt"] / 10) for r in pts)
    hi = max(r["mean_subopt"] + r["stderr"] for r in pts)
    x0, x1 = math.log10(min(ks)) - 0.1, math.log10(max(ks)) + 0.1
    y0, y1 = math.log10(lo) - 0.1, math.log10(hi) + 0.1
    ml, mr, mt, mb = 70, 20, 20, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(k):
        return ml + (math.log10(k) - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (y1 - math.log10(max(v, 10**y0))) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
        f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle">K (log scale)</text>',
        f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {mt + ph / 2})">mean suboptimality (log scale)</text>',
    ]
    for k in sorted(set(ks)):
        parts.append(f'<text x="{px(k):.1f}" y="{mt + ph + 16}" text-anchor="middle">{k}</text>')
    for e in range(math.floor(y0), math.ceil(y1) + 1):
        if y0 <= e <= y1:
            parts.append(f'<text x="{ml - 6}" y="{py(10**e) + 4:.1f}" text-anchor="end">1e{e}</text>')
    # K^{-1/2} guide anchored at the first point of the first algorithm
    first = pts[0]
    kmin, kmax = min(ks), max(ks)
    g0 = first["mean_subopt"] * math.sqrt(first["K"] / kmin)
    g1 = first["mean_subopt"] * math.sqrt(first["K"] / kmax)
    parts.append(
        f'<line x1="{px(kmin):.1f}" y1="{py(g0):.1f}" x2="{px(kmax):.1f}" y2="{py(g1):.1f}" '
        'stroke="#888" stroke-dasharray="5,4"/>'
    )
    for j, name in enumerate(algorithms):
        color = COLORS[j % len(COLORS)]
        series = [r for r in pts if r["algorithm"] == name]
        path = " ".join(f"{'M' if n == 0 else 'L'}{px(r['K']):.1f},{py(r['mean_subopt']):.1f}" for n, r in enumerate(series))
        if path:
            parts.append(f'<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for r in series:
            x = px(r["K"])
            top, bot = py(r["mean_subopt"] + r["stderr"]), py(max(r["mean_subopt"] - r["stderr"], 10**y0))
            parts.append(f'<line x1="{x:.1f}" y1="{top:.1f}" x2="{x:.1f}" y2="{bot:.1f}" stroke="{color}"/>')
            parts.append(f'<circle cx="{x:.1f}" cy="{py(r["mean_subopt"]):.1f}" r="3" fill="{color}"/>')
        parts.append(f'<text x="{ml + 10}" y="{mt + 16 + 16 * j}" fill="{color}">{name}</text>')
    parts.append(f'<text x="{ml + 10}" y="{mt + 16 + 16 * len(algorithms)}" fill="#888">K^-1/2 guide</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def run_sweep(config):
    """Run the sweep, write ``sweep.csv``, ``summary.csv`` and ``sweep.svg``.

    Returns ``(rows, summary, slopes)``.
    """
    os.makedirs(config.output_dir, exist_ok=True)
    if not os.access(config.output_dir, os.W_OK):
        raise PermissionError(f"output directory {config.output_dir!r} is not writable")
    rows = sweep_rows(config)
    num_states = max(int(k[len("subopt_s"):]) for k in rows[0] if k.startswith("subopt_s") and k != "subopt_weighted") + 1
    write_csv(rows, os.path.join(config.output_dir, "sweep.csv"), num_states)
    summary, slopes = summarize(rows, config.algorithms, config.K_values)
    write_summary(summary, slopes, os.path.join(config.output_dir, "summary.csv"))
    if config.plot:
        with open(os.path.join(config.output_dir, "sweep.svg"), "w", encoding="utf-8") as f:
            f.write(render_svg(summary, config.algorithms))
    return rows, summary, slopes
