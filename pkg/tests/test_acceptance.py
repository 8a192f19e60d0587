"""Acceptance criteria, one test per criterion.

Each test records a one-line verdict. The lines are printed in the pytest
terminal summary and by ``python tests/test_acceptance.py``.
"""

import itertools
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from drmdp import (  # noqa: E402
    AlgoConfig,
    HardInstanceParams,
    build_hard_instance,
    collect_offline_dataset,
    drpvi,
    hard_instance_optimal_policy,
    hard_instance_optimal_value,
    modified_va_drpvi,
    random_simplex_mdp,
    range_shrinkage_bound,
    robust_policy_evaluation,
    robust_value_iteration,
    tv_dual_inf,
    va_drpvi,
)
from drmdp.experiment import SweepConfig, check_pessimism, compute_phi_report, sweep_rows, summarize  # noqa: E402
from drmdp.instances import behavior_second_moment_closed_form  # noqa: E402

from oracles import greedy_transport, lsvi, tv_inf_grid  # noqa: E402

RESULTS = {}


def record(number, ok, detail, status=None):
    status = status or ("PASS" if ok else "FAIL")
    line = f"criterion {number:>2}: {status}  {detail}"
    RESULTS[number] = line
    print(line)
    return ok


def verdict_lines():
    return [RESULTS[k] for k in sorted(RESULTS)]


def test_criterion_01_dual_exactness():
    """Dual value vs an alpha-grid oracle (step 1e-5) and greedy transport.

    Value levels are drawn on the 1e-5 lattice so that the grid contains
    every breakpoint and the grid oracle is exact.
    """
    rng = np.random.default_rng(1)
    worst, elapsed = 0.0, 0.0
    t_all = time.perf_counter()
    for n in range(200):
        S = int(rng.integers(1, 7))
        H = int(rng.integers(1, 6))
        mu0 = rng.dirichlet(np.ones(S))
        V = np.round(rng.uniform(0, H, size=S), 5)
        rho = [0.0, 1.0][n] if n < 2 else float(rng.uniform())
        t0 = time.perf_counter()
        sol = tv_dual_inf(mu0, V, rho)
        elapsed += time.perf_counter() - t0
        grid = tv_inf_grid(mu0, V, rho, H)
        transport = greedy_transport(mu0, V, rho) @ V
        worst = max(worst, abs(sol.value - grid), abs(sol.value - transport))
    total = time.perf_counter() - t_all
    ok = worst <= 1e-8 and elapsed < 5.0
    record(1, ok, f"max |error| {worst:.2e} <= 1e-8; solver time {elapsed:.3f}s (with oracles {total:.2f}s) < 5s")
    assert ok


def test_criterion_02_hard_instance_closed_form():
    rng = np.random.default_rng(2)
    combos = list(itertools.product((1, 2, 3), (2, 3, 5), (0.1, 0.5, 0.75)))
    picks = rng.permutation(len(combos))[:20]
    worst = 0.0
    t0 = time.perf_counter()
    for j in picks:
        d, H, rho = combos[j]
        p = HardInstanceParams.random_xi(d, H, rho, seed=int(rng.integers(1 << 31)))
        mdp, _ = build_hard_instance(p)
        res = robust_value_iteration(mdp)
        worst = max(worst, abs(res.V[0, 0] - hard_instance_optimal_value(p)))
        np.testing.assert_array_equal(res.policy[:, 0], hard_instance_optimal_policy(p)[:, 0])
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10
    record(2, ok, f"20 random xi, max |V - closed form| {worst:.2e} <= 1e-10; {elapsed:.2f}s < 10s")
    assert ok


def test_criterion_03_range_shrinkage():
    rng = np.random.default_rng(3)
    violations, checked, worst = 0, 0, -np.inf
    t0 = time.perf_counter()
    for n in range(100):
        S, A, H, d = (int(x) for x in rng.integers([2, 1, 1, 1], [8, 5, 7, 5]))
        rho = float(rng.uniform(0.01, 1.0))
        mdp = random_simplex_mdp(S, A, H, d, seed=int(rng.integers(1 << 31)), rho=rho)
        policies = [rng.integers(0, A, size=(H, S)), rng.dirichlet(np.ones(A), size=(H, S)), None]
        for pol in policies:
            V = robust_value_iteration(mdp).V if pol is None else robust_policy_evaluation(mdp, pol).V
            for h in range(H):
                excess = V[h].max() - V[h].min() - range_shrinkage_bound(rho, H, h + 1)
                worst = max(worst, excess)
                violations += excess > 1e-9
                checked += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 30
    record(3, ok, f"{violations} violations in {checked} (instance, policy, h) checks; max excess {worst:.2e}; {elapsed:.2f}s < 30s")
    assert ok


def test_criterion_04_pessimism():
    K = 4096
    p = HardInstanceParams(d=2, H=3, rho=0.5, K_for_delta=K)
    mdp, behavior = build_hard_instance(p)
    exact = robust_value_iteration(mdp)
    cfg = AlgoConfig(delta_fail=0.1)
    held = 0
    t0 = time.perf_counter()
    for seed in range(50):
        data = collect_offline_dataset(mdp, behavior, K, seed)
        out = drpvi(data, mdp, cfg)
        held += not check_pessimism(out, exact, tol=1e-9).violated
    elapsed = time.perf_counter() - t0
    ok = held / 50 >= 0.9 and elapsed < 120
    record(4, ok, f"pessimism holds in {held}/50 seeds (need >= 90%); beta {out.beta:.2f}; {elapsed:.2f}s < 120s")
    assert ok


def test_criterion_05_convergence_rate():
    Ks = tuple(2**k for k in range(8, 15))
    cfg = SweepConfig(K_values=Ks, seeds=20, algorithms=("drpvi",), hard_d=2, hard_H=3, hard_rho=0.5, delta_mode="per_k", compute_phi=False, plot=False)
    t0 = time.perf_counter()
    rows = sweep_rows(cfg)
    summary, slopes = summarize(rows, cfg.algorithms, Ks)
    elapsed = time.perf_counter() - t0
    means = [r["mean_subopt"] for r in summary]
    slope = slopes["drpvi"]
    monotone = all(b <= a for a, b in zip(means, means[1:]))
    ok = -0.7 <= slope <= -0.3 and monotone and elapsed < 600
    record(5, ok, f"log-log slope {slope:.3f} in [-0.7, -0.3]; means nonincreasing: {monotone}; {elapsed:.2f}s < 600s")
    assert ok


def test_criterion_06_variance_aware_not_worse():
    K = 1024
    p = HardInstanceParams(d=2, H=6, rho=0.5, K_for_delta=K)
    mdp, behavior = build_hard_instance(p)
    exact = robust_value_iteration(mdp)
    init = mdp.initial_distribution
    sub_va, sub_dr = [], []
    t0 = time.perf_counter()
    for seed in range(20):
        full = collect_offline_dataset(mdp, behavior, 2 * K, seed)
        d1, d2 = full.split_alternating()
        mva = modified_va_drpvi(d1, d2, mdp)
        dr = drpvi(full, mdp)  # same 2K trajectory budget
        sub_va.append(init @ (exact.V[0] - robust_policy_evaluation(mdp, mva.policy).V[0]))
        sub_dr.append(init @ (exact.V[0] - robust_policy_evaluation(mdp, dr.policy).V[0]))
    elapsed = time.perf_counter() - t0
    m_va, m_dr = float(np.mean(sub_va)), float(np.mean(sub_dr))
    ok = m_va <= 1.1 * m_dr and elapsed < 600
    record(6, ok, f"mean SubOpt modified VA {m_va:.5f} <= 1.1 x DRPVI {m_dr:.5f}; {elapsed:.2f}s < 600s")
    assert ok


def test_criterion_07_phi_bound():
    d, H = 2, 4
    held, total = 0, 0
    worst_ratio = 0.0
    t0 = time.perf_counter()
    for K in (2**10, 2**12):
        bound = 4 * d**1.5 * H / np.sqrt(K)
        for seed in range(40):
            p = HardInstanceParams.random_xi(d, H, 0.5, seed=seed, K_for_delta=K)
            mdp, behavior = build_hard_instance(p)
            data = collect_offline_dataset(mdp, behavior, K, seed)
            phi = compute_phi_report(mdp, data, hard_instance_optimal_policy(p), "Lambda", lam=1.0)[0]
            held += phi <= bound
            total += 1
            worst_ratio = max(worst_ratio, phi / bound)
    elapsed = time.perf_counter() - t0
    ok = held / total >= 0.95 and elapsed < 120
    record(7, ok, f"Phi(Lambda^-1, x1) <= 4 d^1.5 H / sqrt(K) in {held}/{total}; max Phi/bound {worst_ratio:.3f}; {elapsed:.2f}s < 120s")
    assert ok


def test_criterion_08_behavior_covariance():
    t0 = time.perf_counter()
    worst = 0.0
    for d in (2, 3):
        p = HardInstanceParams(d=d, H=1, rho=0.5, K_for_delta=10**4)
        mdp, behavior = build_hard_instance(p)
        data = collect_offline_dataset(mdp, behavior, 10**5, seed=8)
        s, a, _, _ = data.step(0)
        phi = mdp.features[s, a]
        emp = phi.T @ phi / len(s)
        worst = max(worst, float(np.max(np.abs(emp - behavior_second_moment_closed_form(d)))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.01 and elapsed < 30
    record(8, ok, f"1e5 draws, max entrywise gap {worst:.2e} <= 0.01 (d = 2, 3); {elapsed:.2f}s < 30s")
    assert ok


def test_criterion_09_reductions():
    t0 = time.perf_counter()
    lsvi_equal, unit_equal = 0, 0
    for seed in range(10):
        mdp = random_simplex_mdp(5, 3, 4, 3, seed=100 + seed, rho=0.0, reward_noise_std=0.3)
        data = collect_offline_dataset(mdp, np.full((4, 5, 3), 1 / 3), 200, seed)
        out = drpvi(data, mdp, AlgoConfig(beta=0.0, lam=1.0, reward_mode="known_theta"))
        pol, V = lsvi(data, mdp, 1.0)
        lsvi_equal += np.array_equal(out.policy, pol) and np.array_equal(out.V_hat, V)
        robust = mdp.with_uncertainty(0.3)
        d1, d2 = data.split_alternating()
        cfg = AlgoConfig(lam=0.25, beta=0.4, force_unit_variance=True)
        ref = drpvi(d1, robust, cfg)
        same = all(
            np.array_equal(fn(d1, d2, robust, cfg).Q_hat, ref.Q_hat) for fn in (va_drpvi, modified_va_drpvi)
        )
        unit_equal += same
    elapsed = time.perf_counter() - t0
    ok = lsvi_equal == 10 and unit_equal == 10 and elapsed < 60
    record(9, ok, f"LSVI bit-for-bit {lsvi_equal}/10; unit-variance VA == DRPVI {unit_equal}/10; {elapsed:.2f}s < 60s")
    assert ok


def test_criterion_10_lower_bound_not_reproducible():
    record(10, True, status="N/A ", detail="not empirically reproducible (quantifies over all estimators); constructive quantities covered by 7 and 8")
    pytest.skip("information-theoretic lower bound over all estimators has no empirical test")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except (AssertionError, pytest.skip.Exception):
                pass
