"""Invariant checks run by ``drmdp check``."""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .robust_dp import range_shrinkage_bound, robust_policy_evaluation, robust_value_iteration


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str = ""

    def line(self):
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}" + (f": {self.detail}" if self.detail else "")


def check_value_ranges(mdp, exact):
    H = mdp.horizon
    upper = (H - np.arange(H + 1))[:, None]
    ok = bool(np.all(exact.V >= -1e-12) and np.all(exact.V <= upper + 1e-12))
    return CheckResult("values lie in [0, H - h + 1]", ok)


def check_range_shrinkage(mdp, exact):
    H = mdp.horizon
    rho = mdp.uncertainty_levels
    if np.any(rho != rho[0]) or rho[0] <= 0:
        return CheckResult("range shrinkage", True, "skipped (needs a constant rho > 0)")
    worst = 0.0
    for h in range(H):
        spread = float(exact.V[h].max() - exact.V[h].min())
        worst = max(worst, spread - range_shrinkage_bound(float(rho[0]), H, h + 1))
    return CheckResult("range shrinkage", worst <= 1e-9, f"max excess {worst:.3e}")


def check_worst_rows(mdp, exact):
    """Each worst-case factor row is a distribution within rho of its nominal row."""
    rows, mu = exact.worst_factor_rows, mdp.factor_measures
    tv = 0.5 * np.abs(rows - mu).sum(axis=2)
    excess = float(np.max(tv - mdp.uncertainty_levels[:, None]))
    simplex = bool(np.all(rows >= -1e-12) and np.allclose(rows.sum(axis=2), 1.0, atol=1e-12))
    return CheckResult("worst-case rows inside the TV balls", simplex and excess <= 1e-12, f"max TV excess {excess:.3e}")


def check_worst_rows_attain(mdp, exact):
    """Expectations under the worst rows reproduce the dual values."""
    attained = np.einsum("hix,hx->hi", exact.worst_factor_rows, exact.V[1:])
    err = float(np.max(np.abs(attained - exact.factor_values)))
    return CheckResult("worst-case rows attain the dual values", err <= 1e-9, f"max gap {err:.3e}")


def check_greedy_consistency(mdp, exact):
    ev = robust_policy_evaluation(mdp, exact.policy)
    err = float(np.max(np.abs(ev.V - exact.V)))
    return CheckResult("evaluation of the optimal policy matches value iteration", err <= 1e-9, f"max gap {err:.3e}")


def check_monotone_in_rho(mdp, exact):
    bigger = np.minimum(1.0, mdp.uncertainty_levels + 0.1)
    ev = robust_value_iteration(mdp, rho_override=bigger)
    ok = bool(np.all(ev.V <= exact.V + 1e-12))
    return CheckResult("values shrink as rho grows", ok)


def check_backends(mdp, exact):
    names = _backend.available()
    if len(names) < 2:
        return CheckResult("backend agreement", True, "skipped (only the python backend is built)")
    a, b = (_backend.get(n) for n in names[:2])
    gap = 0.0
    for h in range(mdp.horizon):
        va, _ = a.tv_inf_rows(mdp.factor_measures[h], exact.V[h + 1], float(mdp.uncertainty_levels[h]))
        vb, _ = b.tv_inf_rows(mdp.factor_measures[h], exact.V[h + 1], float(mdp.uncertainty_levels[h]))
        gap = max(gap, float(np.max(np.abs(va - vb))))
    return CheckResult("backend agreement", gap == 0.0, f"max gap {gap:.3e}")


SUITE = (
    check_value_ranges,
    check_range_shrinkage,
    check_worst_rows,
    check_worst_rows_attain,
    check_greedy_consistency,
    check_monotone_in_rho,
    check_backends,
)


def run_checks(mdp):
    """Validate ``mdp`` and run every invariant check on its exact solution."""
    mdp.validate()
    exact = robust_value_iteration(mdp)
    return [check(mdp, exact) for check in SUITE]
