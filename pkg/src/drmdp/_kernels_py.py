"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation (same summation
order), so the two backends agree to the last bit on the same inputs.
"""

import numpy as np


def tv_inf_rows(mu, values, rho):
    """Exact TV-ball infimum of ``values`` for every row of ``mu``.

    Returns ``(inf_values, alpha_star)``, both of length ``mu.shape[0]``.
    """
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    n, S = mu.shape
    order = np.argsort(values, kind="stable")
    sv = values[order]
    vmin = sv[0]
    m = mu[:, order]
    lower = np.cumsum(m * sv, axis=1)
    # tail[:, j] = sum of mass strictly above sorted position j
    tail = np.zeros_like(m)
    if S > 1:
        tail[:, :-1] = np.cumsum(m[:, :0:-1], axis=1)[:, ::-1]
    ends = np.flatnonzero(np.append(sv[1:] > sv[:-1], True))
    alphas = sv[ends]
    f = lower[:, ends] + alphas * tail[:, ends] - rho * (alphas - vmin)
    best = np.argmax(f, axis=1)
    rows = np.arange(n)
    return f[rows, best], alphas[best]


def greedy_rows(mu, values, rho):
    """Worst-case distributions in the TV ball, one per row of ``mu``.

    Mass (at most ``rho`` per row) is taken from states in decreasing order
    of ``values`` and placed on the smallest-index minimiser.
    """
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    n, S = mu.shape
    target = int(np.argmin(values))
    # decreasing value, ascending index among ties
    order = np.lexsort((np.arange(S), -values))
    out = mu.copy()
    for r in range(n):
        budget = rho
        moved = 0.0
        for s in order:
            if budget <= 0.0:
                break
            if s == target:
                continue
            take = min(out[r, s], budget)
            out[r, s] -= take
            moved += take
            budget -= take
        out[r, target] += moved
    return out


def select_alpha(z, offsets):
    """Column-wise argmax of ``z[c, i] - offsets[c]`` (first maximiser)."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    obj = z - np.asarray(offsets, dtype=np.float64)[:, None]
    idx = np.argmax(obj, axis=0)
    return obj[idx, np.arange(z.shape[1])], idx
