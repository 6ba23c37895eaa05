"""Reference computations kept independent of the code paths they check."""
import math

import numpy as np


def f11_max_min_quantile(alpha: float) -> float:
    """d with P(max/min of two iid chi2_1 > d) = alpha.

    Y2/Y1 for an unordered pair is F(1,1) with P(F <= x) = (2/pi) arctan(sqrt(x)),
    and the max/min ratio exceeds d iff F > d or F < 1/d, so the tail is
    2 (1 - (2/pi) arctan(sqrt(d))).
    """
    return math.tan(math.pi / 2 * (1 - alpha / 2)) ** 2


def f11_max_min_tail(d: float) -> float:
    return 2 * (1 - 2 / math.pi * math.atan(math.sqrt(d)))


def f11_max_min_density(d: float) -> float:
    return 2 / (math.pi * (1 + d) * math.sqrt(d))


def w_matrix(rows: np.ndarray, nu: int, fixed: bool) -> dict:
    """W statistics by direct summation, column by column, keyed by m."""
    out = {}
    for m in range(nu + 1, rows.shape[1] + 1):
        n = nu if fixed else m - 1
        out[m] = n * rows[:, m - 1] / rows[:, :n].sum(axis=1)
    return out


def union_prob(rows, nu, fixed, cutoffs):
    """Frequency of the union of {W_i > d_i} over the given cutoffs."""
    w = w_matrix(rows, nu, fixed)
    hit = np.zeros(rows.shape[0], dtype=bool)
    for i, d in cutoffs.items():
        hit |= w[i] > d
    return hit.mean()


def summed_prob_fixed(rows, nu, cutoffs):
    """Sum over i of P(max{S_nu, nu X_j / d_j, j < i} < nu X_i / d_i)."""
    s_nu = rows[:, :nu].sum(axis=1)
    total = 0.0
    for i in sorted(cutoffs):
        earlier = [nu * rows[:, j - 1] / cutoffs[j] for j in sorted(cutoffs) if j < i]
        lhs = np.max(np.vstack([s_nu] + earlier), axis=0)
        total += np.mean(lhs < nu * rows[:, i - 1] / cutoffs[i])
    return total


def grid_root(prob, lo, hi, step, alpha):
    """Smallest grid point d in [lo, hi] with prob(d) <= alpha (prob nonincreasing)."""
    grid = np.arange(lo, hi + step / 2, step)
    for d in grid:
        if prob(d) <= alpha:
            return float(d)
    raise AssertionError("no grid point reaches alpha")


def step_up_loop(x_sorted, nu, fixed, cutoffs):
    """Plain-loop first rejection index for one sorted vector; 0 if none."""
    for m in sorted(cutoffs):
        n = nu if fixed else m - 1
        s = sum(x_sorted[:n])
        w = math.inf if s == 0 and x_sorted[m - 1] > 0 else (0.0 if s == 0 else n * x_sorted[m - 1] / s)
        if w > cutoffs[m]:
            return m
    return 0


def summed_prob_seq(rows, nu, cutoffs):
    """Sum over i of P(max{S_nu, Q_j, j < i} < Q_i), Q_i = (i-1) X_i / d_i - S_{i-1} + S_nu."""
    s_nu = rows[:, :nu].sum(axis=1)
    q = {i: (i - 1) * rows[:, i - 1] / d - rows[:, : i - 1].sum(axis=1) + s_nu for i, d in cutoffs.items()}
    total = 0.0
    for i in sorted(q):
        lhs = np.max(np.vstack([s_nu] + [q[j] for j in q if j < i]), axis=0)
        total += np.mean(lhs < q[i])
    return total


def refine_root(prob, lo, hi, alpha, steps=(1.0, 0.1, 0.01)):
    """Grid search refined on successively finer grids; returns the last grid point."""
    for step in steps:
        d = grid_root(prob, lo, hi, step, alpha)
        lo, hi = max(d - step, lo), d
    return d
