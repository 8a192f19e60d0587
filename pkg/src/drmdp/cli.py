"""Command-line entry point ``drmdp``.

Exit status is 0 on success, 1 when a check fails and 2 on bad input.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import _backend
from .algorithms import ALGORITHMS, AlgoConfig, run_algorithm
from .checks import run_checks
from .experiment import (
    CSV_HELP,
    check_pessimism,
    evaluate_suboptimality,
    parse_sweep_config,
    run_sweep,
)
from .instances import HardInstanceParams, build_hard_instance, random_simplex_mdp
from .io import load_dataset, load_instance, save_dataset, save_instance
from .mdp import InstanceError, collect_offline_dataset, uniform_policy
from .robust_dp import robust_value_iteration


def _hard_behavior(mdp):
    d = int(mdp.metadata["d"])
    behavior = np.zeros((mdp.horizon, mdp.num_states, mdp.num_actions))
    behavior[:, :, [0] + [1 << j for j in range(d)]] = 1.0 / (d + 1)
    return behavior


def _behavior(mdp, choice):
    if choice == "auto":
        choice = "hard" if mdp.metadata.get("family") == "hard" else "uniform"
    if choice == "uniform":
        return uniform_policy(mdp)
    if choice == "hard":
        if mdp.metadata.get("family") != "hard":
            raise InstanceError("behavior 'hard' needs an instance generated by 'gen-instance hard'")
        return _hard_behavior(mdp)
    with open(choice, encoding="utf-8") as f:
        return np.asarray(json.load(f), dtype=np.float64)


def _write_json(obj, path):
    text = json.dumps(obj, indent=1)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text + "\n")


def cmd_gen_instance(args):
    if args.family == "hard":
        xi = None
        if args.xi_seed is not None:
            xi = np.random.default_rng(args.xi_seed).choice([-1.0, 1.0], size=(args.H, args.d))
        params = HardInstanceParams(
            d=args.d, H=args.H, rho=args.rho, xi=xi, K_for_delta=args.K_for_delta, delta_gap=args.delta_gap
        )
        mdp, _ = build_hard_instance(params, reward_noise_std=args.noise)
    else:
        mdp = random_simplex_mdp(args.S, args.A, args.H, args.d, args.seed, rho=args.rho, reward_noise_std=args.noise)
    save_instance(mdp, args.out)
    print(f"wrote {args.out}: S={mdp.num_states} A={mdp.num_actions} H={mdp.horizon} d={mdp.feature_dim}")
    return 0


def cmd_collect(args):
    mdp = load_instance(args.instance)
    data = collect_offline_dataset(mdp, _behavior(mdp, args.behavior), args.K, args.seed)
    save_dataset(data, args.out)
    print(f"wrote {args.out}: K={data.num_trajectories} H={data.horizon}")
    return 0


def cmd_solve_exact(args):
    mdp = load_instance(args.instance)
    res = robust_value_iteration(mdp)
    _write_json(
        {
            "V": res.V[:-1].tolist(),
            "Q": res.Q.tolist(),
            "policy": res.policy.tolist(),
            "initial_value": float(mdp.initial_distribution @ res.V[0]),
        },
        args.out,
    )
    return 0


def _algo_config(args):
    overrides = {}
    for name in ("lam", "beta", "c2", "delta_fail", "alpha_grid_size", "reward_mode", "c_v", "d_exponent", "kappa"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.force_unit_variance:
        overrides["force_unit_variance"] = True
    return replace(AlgoConfig(), **overrides)


def cmd_run(args):
    mdp = load_instance(args.instance)
    data = load_dataset(args.data)
    prime = load_dataset(args.data_prime) if args.data_prime else None
    out = run_algorithm(args.algorithm, data, mdp, _algo_config(args), dataset_prime=prime)
    exact = robust_value_iteration(mdp)
    sub = evaluate_suboptimality(mdp, out.policy, exact)
    pess = check_pessimism(out, exact)
    result = out.to_dict()
    result["suboptimality"] = sub.tolist()
    result["suboptimality_weighted"] = float(mdp.initial_distribution @ sub)
    result["pessimism_excess"] = pess.max_excess
    _write_json(result, args.out)
    if args.out not in (None, "-"):
        print(f"{args.algorithm}: weighted suboptimality {result['suboptimality_weighted']:.6g}, "
              f"pessimism excess {pess.max_excess:.3g}")
    return 0


def cmd_sweep(args):
    with open(args.config, encoding="utf-8") as f:
        text = f.read()
    config = parse_sweep_config(text, base_dir=os.path.dirname(os.path.abspath(args.config)))
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    if args.output_dir is not None:
        config = replace(config, output_dir=args.output_dir)
    _, summary, slopes = run_sweep(config)
    for r in summary:
        print(f"{r['algorithm']:>12} K={r['K']:<7d} mean={r['mean_subopt']:.4g} se={r['stderr']:.2g}")
    for name, slope in slopes.items():
        print(f"{name:>12} log-log slope {slope:.3f}")
    print(f"outputs in {config.output_dir}")
    return 0


def cmd_check(args):
    mdp = load_instance(args.instance)
    results = run_checks(mdp)
    if args.data:
        from .io import check_dataset_against

        data = load_dataset(args.data)
        try:
            check_dataset_against(data, mdp)
            print("[PASS] dataset indices fit the instance")
        except InstanceError as exc:
            print(f"[FAIL] dataset indices fit the instance: {exc}")
            return 1
    for r in results:
        print(r.line())
    print(f"kernel backend: {_backend.NAME}")
    return 0 if all(r.ok for r in results) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="drmdp", description="Offline robust RL on d-rectangular linear MDPs with TV uncertainty.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-instance", help="write an instance JSON file")
    g.add_argument("family", choices=("hard", "random"))
    g.add_argument("--out", required=True)
    g.add_argument("--H", type=int, default=3)
    g.add_argument("--d", type=int, default=2, help="boolean dimension (hard) or feature dimension (random)")
    g.add_argument("--rho", type=float, default=0.5)
    g.add_argument("--noise", type=float, default=None, help="reward noise std (hard: 1, random: 0)")
    g.add_argument("--xi-seed", type=int, default=None, help="hard: draw xi from this seed (default all +1)")
    g.add_argument("--K-for-delta", type=int, default=1024, help="hard: gap d^{3/2}/sqrt(2K)")
    g.add_argument("--delta-gap", type=float, default=None, help="hard: explicit reward gap")
    g.add_argument("--S", type=int, default=4)
    g.add_argument("--A", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen_instance)

    c = sub.add_parser("collect", help="sample an offline dataset (JSON lines)")
    c.add_argument("--instance", required=True)
    c.add_argument("--K", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--behavior", default="auto", help="auto | uniform | hard | path to an (H,S,A) JSON array")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_collect)

    s = sub.add_parser("solve-exact", help="robust value iteration on the true model")
    s.add_argument("--instance", required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_solve_exact)

    r = sub.add_parser("run", help="run an offline algorithm and report suboptimality")
    r.add_argument("--instance", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--data-prime", default=None, help="held-out data for variance estimation")
    r.add_argument("--algorithm", choices=ALGORITHMS, default="drpvi")
    r.add_argument("--out", default="-")
    r.add_argument("--lam", type=float)
    r.add_argument("--beta", type=float, help="penalty multiplier (default: theory value)")
    r.add_argument("--c2", type=float)
    r.add_argument("--delta-fail", dest="delta_fail", type=float)
    r.add_argument("--alpha-grid-size", dest="alpha_grid_size", type=int)
    r.add_argument("--reward-mode", dest="reward_mode", choices=("auto", "known_theta", "ridge_estimated"))
    r.add_argument("--c-v", dest="c_v", type=float)
    r.add_argument("--d-exponent", dest="d_exponent", type=float)
    r.add_argument("--kappa", type=float)
    r.add_argument("--force-unit-variance", action="store_true")
    r.set_defaults(func=cmd_run)

    w = sub.add_parser(
        "sweep",
        help="seeded K-sweep writing sweep.csv, summary.csv and sweep.svg",
        description="Config file: key=value lines.\n\n" + CSV_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    w.add_argument("--config", required=True)
    w.add_argument("--workers", type=int)
    w.add_argument("--output-dir")
    w.set_defaults(func=cmd_sweep)

    k = sub.add_parser("check", help="validate an instance and run invariant checks")
    k.add_argument("--instance", required=True)
    k.add_argument("--data")
    k.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "noise", "unset") is None:
        args.noise = 1.0 if args.family == "hard" else 0.0
    try:
        return args.func(args)
    except (InstanceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
