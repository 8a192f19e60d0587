"""Time the compiled and numpy kernel backends on the same inputs.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from drmdp import AlgoConfig, _backend, collect_offline_dataset, random_simplex_mdp, run_algorithm, uniform_policy


def kernel_cases(rng):
    cases = {}
    for S in (4, 64):
        mu = rng.dirichlet(np.ones(S), size=16)
        V = rng.uniform(0, 5, size=S)
        cases[f"tv_inf_rows S={S}"] = lambda k, mu=mu, V=V: k.tv_inf_rows(mu, V, 0.3)
        cases[f"greedy_rows S={S}"] = lambda k, mu=mu, V=V: k.greedy_rows(mu, V, 0.3)
    Z = rng.normal(size=(64, 16))
    off = rng.uniform(size=64)
    cases["select_alpha C=64 d=16"] = lambda k: k.select_alpha(Z, off)
    return cases


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    names = _backend.available()
    print(f"backends: {', '.join(names)}")
    rng = np.random.default_rng(0)
    header = f"{'case':<28}" + "".join(f"{n + ' (us)':>16}" for n in names)
    print(header)
    for label, fn in kernel_cases(rng).items():
        times = []
        for n in names:
            k = _backend.get(n)
            times.append(min(timeit.repeat(lambda: fn(k), number=args.repeat, repeat=3)) / args.repeat * 1e6)
        print(f"{label:<28}" + "".join(f"{t:16.2f}" for t in times))

    mdp = random_simplex_mdp(20, 4, 5, 6, seed=0, rho=0.3, reward_noise_std=0.2)
    data = collect_offline_dataset(mdp, uniform_policy(mdp), 2000, seed=0)
    for alg in ("drpvi", "va"):
        times = []
        for n in names:
            _backend.kernels = _backend.get(n)
            times.append(min(timeit.repeat(lambda: run_algorithm(alg, data, mdp, AlgoConfig(beta=0.1)), number=3, repeat=3)) / 3 * 1e6)
        print(f"{'end-to-end ' + alg:<28}" + "".join(f"{t:16.0f}" for t in times))


if __name__ == "__main__":
    main()
