"""Monte Carlo null sampling and cutoff solvers.

Every random draw is addressed by ``(seed, stream, replicate)`` through a
Philox counter-based generator, so a sample is a pure function of its
inputs no matter how replicates are split across chunks or threads.

At the least-favorable configuration beta_m the ``k - m`` infinite effects
never enter a statistic with index <= m, so a null sample for step ``m``
holds only the ``m`` sorted squared standard normals.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, NamedTuple, Sequence, Union

import numpy as np
from scipy.special import ndtri

from .model import CutoffTable, McSettings, Method, Scaling, TestConfig
from .procedures import first_rejection

__all__ = [
    "NullSample",
    "SingleRegion",
    "StepThresholds",
    "CutoffBudgetError",
    "sample_null",
    "quantile_d",
    "step_thresholds",
    "solve_suf_cutoffs",
    "solve_sus_cutoffs",
    "solve_joint_cutoffs",
    "solve_single_cutoffs",
    "solve_cutoffs",
    "empirical_rejection_prob",
    "standard_normals",
    "run_chunked",
    "stream_id",
]

log = logging.getLogger(__name__)

# stream domains, combined with a 32-bit index by stream_id()
NULL_DOMAIN = 0
REDRAW_DOMAIN = 1
REJECTION_DOMAIN = 2
SIMULATION_DOMAIN = 3

_MAX_REDRAWS = 16


def stream_id(domain: int, index: int = 0) -> int:
    return (domain << 32) | index


def _uniforms(seed: int, stream: int, start: int, count: int, width: int) -> np.ndarray:
    """Open-interval uniforms for rows ``start .. start+count-1``, ``width`` per row."""
    blocks = -(-width // 4)  # each Philox counter value yields four 64-bit words
    gen = np.random.Philox(
        key=np.array([seed, stream], dtype=np.uint64),
        counter=np.array([start * blocks, 0, 0, 0], dtype=np.uint64),
    )
    raw = gen.random_raw(count * blocks * 4).reshape(count, blocks * 4)[:, :width]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def standard_normals(seed: int, stream: int, start: int, count: int, width: int) -> np.ndarray:
    """Standard normal rows by inverse-CDF transform of addressed uniforms."""
    return ndtri(_uniforms(seed, stream, start, count, width))


def run_chunked(fn: Callable[[int, int], np.ndarray], total: int, chunk: int, workers: int = 1) -> np.ndarray:
    """Evaluate ``fn(start, stop)`` over consecutive replicate ranges and concatenate."""
    bounds = [(a, min(a + chunk, total)) for a in range(0, total, chunk)]
    if workers == 1 or len(bounds) == 1:
        parts = [fn(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), bounds))
    return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class NullSample:
    """Row-sorted squared standard normals (reps x m) and their running sums."""

    m: int
    reps: int
    seed: int
    rows: np.ndarray
    prefix: np.ndarray


def _null_rows(seed: int, m: int, start: int, stop: int) -> np.ndarray:
    z = standard_normals(seed, stream_id(NULL_DOMAIN, m), start, stop - start, m)
    rows = np.sort(z * z, axis=1)
    for attempt in range(_MAX_REDRAWS):
        bad = np.flatnonzero(rows[:, 0] == 0.0)
        if bad.size == 0:
            return rows
        log.warning("redrawing %d null replicates with a zero square (m=%d)", bad.size, m)
        stream = stream_id(REDRAW_DOMAIN, (attempt << 16) | m)
        for i in bad:
            z = standard_normals(seed, stream, start + int(i), 1, m)
            rows[i] = np.sort(z * z, axis=1)[0]
    raise FloatingPointError(f"could not draw a nondegenerate null replicate for m={m}")


@lru_cache(maxsize=12)
def _cached_sample(m: int, reps: int, seed: int, chunk: int, workers: int) -> NullSample:
    rows = run_chunked(lambda a, b: _null_rows(seed, m, a, b), reps, chunk, workers)
    prefix = np.cumsum(rows, axis=1)
    rows.setflags(write=False)
    prefix.setflags(write=False)
    return NullSample(m=m, reps=reps, seed=seed, rows=rows, prefix=prefix)


def sample_null(m: int, mc: McSettings) -> NullSample:
    """Draw ``mc.reps`` replicates of the m sorted null squares.

    Replicate ``r`` depends only on ``(mc.seed, m, r)``.
    """
    if m < 2:
        raise ValueError(f"null sample needs m >= 2, got {m}")
    # the cache key includes chunk/workers only so that a differently split
    # request really recomputes; the contents are identical either way
    return _cached_sample(int(m), mc.reps, mc.seed, mc.chunk, mc.workers)


def clear_cache() -> None:
    _cached_sample.cache_clear()


def _exceedance_cutoff(values: np.ndarray, tail: float) -> float:
    # fraction ~tail of the replicates lie strictly above the result
    return float(np.quantile(values, 1.0 - tail))


def quantile_d(n: int, m: int, cfg: TestConfig, mc: McSettings) -> float:
    """Upper ``alpha`` quantile of Z_{n,m} = n Y_{m,m} / (Y_{1,m} + ... + Y_{n,m})."""
    if not cfg.nu <= n < m <= cfg.k:
        raise ValueError(f"need nu={cfg.nu} <= n < m <= k={cfg.k}, got n={n}, m={m}")
    sample = sample_null(m, mc)
    z = n * sample.rows[:, m - 1] / sample.prefix[:, n - 1]
    return _exceedance_cutoff(z, cfg.alpha)


class StepThresholds(NamedTuple):
    """Per-replicate thresholds for the cutoff being solved at one step.

    The new event holds in a replicate iff the unknown cutoff is below
    ``thresholds[r]``, so the solution is the cutoff exceeded by a fraction
    ``budget`` of the replicates. ``terms`` are the estimated probabilities
    already spent by earlier events.
    """

    thresholds: np.ndarray
    budget: float
    terms: tuple[float, ...]


class CutoffBudgetError(RuntimeError):
    def __init__(self, m: int, alpha: float, terms: Sequence[float], reps: int):
        self.m = m
        self.alpha = alpha
        self.terms = tuple(terms)
        self.reps = reps
        spent = ", ".join(f"{t:.6g}" for t in self.terms)
        super().__init__(
            f"no probability left for the step m={m}: alpha={alpha} but earlier events "
            f"already spend [{spent}] (sum {sum(self.terms):.6g}) with reps={reps}; "
            "increase reps"
        )


def _step_parts(sample: NullSample, nu: int, scaling: Scaling, i: int):
    """Numerator G_i and offset H_i with W_i = G_i / H_i for the i-th statistic."""
    x, s = sample.rows, sample.prefix
    if scaling is Scaling.FIXED:
        return nu * x[:, i - 1], s[:, nu - 1]
    return (i - 1) * x[:, i - 1], s[:, i - 2]


def step_thresholds(
    sample: NullSample,
    cfg: TestConfig,
    scaling: Scaling,
    cutoffs: Mapping[int, float],
    summed: bool,
) -> StepThresholds:
    """Reduce the cutoff equation at step ``sample.m`` to per-replicate thresholds.

    Writing each event W_i > d_i as Q_i > S_nu with
    Q_i = G_i / d_i - H_i + S_nu, the running maximum
    M = max(S_nu, Q_{nu+1}, ..., Q_{m-1}) describes all earlier events.

    summed
        Sum of the telescoped events P(M_{i-1} < Q_i) must equal alpha; the
        last one holds iff d < G_m / (M - S_nu + H_m).
    union (``summed=False``, and always at the final step m = k)
        P(union of all events) must equal alpha; replicates already in the
        union of earlier events spend ``p0``, the rest reject iff d < W_m.
    """
    m = sample.m
    scaling = Scaling(scaling)
    if not cfg.nu < m <= cfg.k:
        raise ValueError(f"step m={m} outside {cfg.nu + 1}..{cfg.k}")
    base = sample.prefix[:, cfg.nu - 1]
    running = base
    terms = []
    for i in range(cfg.nu + 1, m):
        g, h = _step_parts(sample, cfg.nu, scaling, i)
        q = g / cutoffs[i] - h + base
        if summed:
            terms.append(float(np.mean(q > running)))
        running = np.maximum(running, q)
    g, h = _step_parts(sample, cfg.nu, scaling, m)
    if summed and m < cfg.k:
        t = g / (running - base + h)
    else:
        earlier = running > base
        terms = [float(np.mean(earlier))] if m > cfg.nu + 1 else []
        t = np.where(earlier, 0.0, g / h)
    return StepThresholds(t, cfg.alpha - sum(terms), tuple(terms))


def _solve(cfg: TestConfig, method: Method, mc: McSettings) -> CutoffTable:
    d: dict[int, float] = {}
    for m in cfg.tested:
        if method is Method.SINGLE_FIXED:
            d[m] = quantile_d(cfg.nu, m, cfg, mc)
        elif method is Method.SINGLE_SEQ:
            d[m] = quantile_d(m - 1, m, cfg, mc)
        else:
            summed = method in (Method.SUF, Method.SUS)
            st = step_thresholds(sample_null(m, mc), cfg, method.scaling, d, summed)
            if st.budget * mc.reps < 1.0:
                raise CutoffBudgetError(m, cfg.alpha, st.terms, mc.reps)
            d[m] = _exceedance_cutoff(st.thresholds, st.budget)
        log.debug("%s d[%d] = %.6g", method.value, m, d[m])
    return CutoffTable(method, cfg.k, cfg.nu, cfg.alpha, d, mc.reps, mc.seed)


def solve_suf_cutoffs(cfg: TestConfig, mc: McSettings) -> CutoffTable:
    """Fixed-scaling step-up cutoffs from the summed-event equations."""
    return _solve(cfg, Method.SUF, mc)


def solve_sus_cutoffs(cfg: TestConfig, mc: McSettings) -> CutoffTable:
    """Sequential-scaling step-up cutoffs from the summed-event equations."""
    return _solve(cfg, Method.SUS, mc)


def solve_joint_cutoffs(cfg: TestConfig, scaling: Scaling | str, mc: McSettings) -> CutoffTable:
    """Cutoffs making the whole union exactly level alpha at every beta_m.

    These (SUFI/SUSI) are offered for comparison; their strong level
    control is not established, see ``CutoffTable.proven_level``.
    """
    method = Method.SUFI if Scaling(scaling) is Scaling.FIXED else Method.SUSI
    return _solve(cfg, method, mc)


def solve_single_cutoffs(cfg: TestConfig, scaling: Scaling | str, mc: McSettings) -> CutoffTable:
    """Per-hypothesis quantiles d_{nu,m} (fixed) or d_{m-1,m} (sequential)."""
    method = Method.SINGLE_FIXED if Scaling(scaling) is Scaling.FIXED else Method.SINGLE_SEQ
    return _solve(cfg, method, mc)


def solve_cutoffs(cfg: TestConfig, method: Method | str, mc: McSettings) -> CutoffTable:
    if not isinstance(method, Method):
        method = Method.parse(method)
    return _solve(cfg, method, mc)


@dataclass(frozen=True)
class SingleRegion:
    """The single-hypothesis region {W_{n,m} > d}."""

    n: int
    m: int
    d: float

    def __post_init__(self):
        if not 1 <= self.n < self.m:
            raise ValueError(f"need 1 <= n < m, got n={self.n}, m={self.m}")
        if not self.d > 1:
            raise ValueError(f"cutoff must exceed 1, got {self.d}")


Region = Union[SingleRegion, CutoffTable]


def empirical_rejection_prob(region: Region, beta: Sequence[float], mc: McSettings) -> tuple[float, float]:
    """Frequency of a false rejection with estimates drawn from N(beta, 1).

    For a single region this is the plain rejection frequency. For a
    step-up table it is the frequency of asserting some true null false,
    i.e. of a first rejection at m0 <= N, N being the number of zeros in
    ``beta``. Returns the estimate and its binomial standard error.
    """
    beta = np.asarray(beta, dtype=float)
    k = beta.shape[0]
    n_zero = int(np.sum(beta == 0))
    if isinstance(region, CutoffTable):
        if region.k != k:
            raise ValueError(f"beta has length {k}, table expects k={region.k}")
        if n_zero < region.nu:
            raise ValueError(f"beta has {n_zero} zero effects, fewer than nu={region.nu}")
    else:
        if region.m > k:
            raise ValueError(f"region tests m={region.m} but beta has length {k}")
        if n_zero < region.n:
            raise ValueError(f"beta has {n_zero} zero effects, fewer than n={region.n}")

    def chunk(a: int, b: int) -> np.ndarray:
        est = beta + standard_normals(mc.seed, stream_id(REJECTION_DOMAIN), a, b - a, k)
        x = np.sort(est * est, axis=1)
        s = np.cumsum(x, axis=1)
        if isinstance(region, CutoffTable):
            m0 = first_rejection(x, s, region)
            return (m0 > 0) & (m0 <= n_zero)
        w = region.n * x[:, region.m - 1] / s[:, region.n - 1]
        return w > region.d

    hits = run_chunked(chunk, mc.reps, mc.chunk, mc.workers)
    p = float(hits.mean())
    return p, float(np.sqrt(p * (1.0 - p) / mc.reps))
