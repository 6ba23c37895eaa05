"""Ratio statistics, single tests, the step-up procedures and a step-down comparator."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .model import CutoffTable, Decision, EffectEstimates, OrderedSquares, Scaling, Step

__all__ = [
    "w_statistic",
    "single_test",
    "step_up",
    "step_down_comparator",
    "ratio_statistics",
    "first_rejection",
]


def _ratio(num, den):
    # S_n = 0 only when the n smallest squares vanish: reject iff X_m > 0.
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = num / den
    return np.where(den > 0, out, np.where(num > 0, np.inf, 0.0))


def w_statistic(n: int, m: int, os: OrderedSquares) -> float:
    """Return W_{n,m} = n X_m / S_n.

    ``+inf`` when S_n = 0 < X_m, and 0 when both vanish.
    """
    if not 1 <= n < m <= os.k:
        raise ValueError(f"need 1 <= n < m <= k={os.k}, got n={n}, m={m}")
    return float(_ratio(n * os.X(m), os.S(n)))


def single_test(os: OrderedSquares, n: int, m: int, d: float) -> bool:
    """Reject H_{0,m} iff W_{n,m} > d."""
    if not d > 1:
        raise ValueError(f"cutoff must exceed 1, got {d}")
    return w_statistic(n, m, os) > d


def ratio_statistics(x: np.ndarray, prefix: np.ndarray, nu: int, scaling: Scaling) -> np.ndarray:
    """Step statistics for m = nu+1..k on a batch of sorted squares.

    Parameters
    ----------
    x, prefix : ndarray, shape (n, k)
        Row-sorted squares and their running sums.
    nu : int
    scaling : Scaling
        FIXED gives W_{nu,m}; SEQUENTIAL gives W_{m-1,m}.

    Returns
    -------
    ndarray, shape (n, k - nu)
        Column ``j`` holds the statistic for m = nu + 1 + j.
    """
    x = np.atleast_2d(x)
    prefix = np.atleast_2d(prefix)
    k = x.shape[1]
    ms = np.arange(nu + 1, k + 1)
    if Scaling(scaling) is Scaling.FIXED:
        num = nu * x[:, nu:]
        den = prefix[:, [nu - 1]]
    else:
        num = (ms - 1) * x[:, nu:]
        den = prefix[:, nu - 1 : k - 1]
    return _ratio(num, den)


def first_rejection(x: np.ndarray, prefix: np.ndarray, table: CutoffTable) -> np.ndarray:
    """Vectorized step-up scan: first m whose statistic exceeds d[m], 0 if none."""
    if not table.method.is_step_up:
        raise ValueError(f"{table.method.value} is not a step-up method")
    if np.atleast_2d(x).shape[1] != table.k:
        raise ValueError(f"data have {np.atleast_2d(x).shape[1]} effects, table expects k={table.k}")
    rejected = ratio_statistics(x, prefix, table.nu, table.method.scaling) > table.values()
    hit = rejected.any(axis=1)
    return np.where(hit, table.nu + 1 + rejected.argmax(axis=1), 0)


def _decide(os: OrderedSquares, est: EffectEstimates, m0, steps) -> Decision:
    labels = est.labels
    if m0 is None:
        return Decision(None, (), tuple(labels[i] for i in os.rank_of), steps)
    ranked = [labels[i] for i in os.rank_of]
    return Decision(m0, tuple(ranked[m0 - 1 :]), tuple(ranked[: m0 - 1]), steps)


def step_up(os: OrderedSquares, table: CutoffTable, est: EffectEstimates) -> Decision:
    """Run a step-up procedure on one dataset.

    Tests m = nu+1, nu+2, ... and stops at the first m whose statistic
    exceeds the cutoff; the effects ranked m..k are then declared active.
    The regions are nested unions, so the first new event is exactly the
    first m at which the cumulative region is entered.
    """
    if not table.method.is_step_up:
        raise ValueError(f"{table.method.value} is not a step-up method")
    if table.k != est.k or os.k != est.k:
        raise ValueError(f"table has k={table.k} but data have {est.k} effects")
    stats = ratio_statistics(os.x, os.prefix, table.nu, table.method.scaling)[0]
    steps = []
    m0 = None
    for m, w in zip(table.config.tested, stats):
        d = table.d[m]
        rejected = bool(w > d)
        steps.append(Step(m, float(w), d, rejected))
        if rejected:
            m0 = m
            break
    return _decide(os, est, m0, steps)


def step_down_comparator(
    os: OrderedSquares,
    c1: float,
    c2: float,
    critvals: Mapping[int, float],
    est: EffectEstimates,
    *,
    n1: int,
    n2: int,
) -> Decision:
    """Step-down scan with T_m = X_m / min(c1 * S_{n1}, c2 * S_{n2}).

    Starts at m = k and declares effects active while T_m exceeds
    ``critvals[m]``, stopping at the first acceptance. The scan never goes
    below ``max(n1, n2) + 1``. Critical values are supplied by the caller.
    """
    if os.k != est.k:
        raise ValueError(f"ordered squares have k={os.k} but estimates have {est.k}")
    if not 1 <= n1 < os.k or not 1 <= n2 < os.k:
        raise ValueError(f"prefix indices must lie in 1..k-1, got {n1}, {n2}")
    scan = range(os.k, max(n1, n2), -1)
    missing = [m for m in scan if m not in critvals]
    if missing:
        raise ValueError(f"missing critical values for m = {sorted(missing)}")
    denom = min(c1 * os.S(n1), c2 * os.S(n2))
    steps = []
    m0 = None
    for m in scan:
        t = float(_ratio(os.X(m), denom))
        rejected = t > critvals[m]
        steps.append(Step(m, t, float(critvals[m]), rejected))
        if not rejected:
            break
        m0 = m
    return _decide(os, est, m0, steps)
