"""Domain types shared by every module.

All values are immutable after construction and validate their invariants
eagerly, raising ``ValueError`` on violation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np

__all__ = [
    "Method",
    "Scaling",
    "TestConfig",
    "EffectEstimates",
    "OrderedSquares",
    "CutoffTable",
    "Step",
    "Decision",
    "McSettings",
    "order_squares",
]

MIN_REPS = 1000
_UINT64_MAX = 2**64 - 1


class Scaling(str, enum.Enum):
    """Denominator choice of the ratio statistic."""

    FIXED = "fixed"  # W_{nu,m}: mean of the nu smallest squares
    SEQUENTIAL = "sequential"  # W_{m-1,m}: mean of the m-1 smallest squares


class Method(str, enum.Enum):
    SUF = "SUF"
    SUS = "SUS"
    SUFI = "SUFI"
    SUSI = "SUSI"
    SINGLE_FIXED = "SINGLE_FIXED"
    SINGLE_SEQ = "SINGLE_SEQ"

    @classmethod
    def parse(cls, name: str) -> "Method":
        key = name.strip().upper().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown method {name!r}; expected one of {choices}") from None

    @property
    def scaling(self) -> Scaling:
        if self in (Method.SUF, Method.SUFI, Method.SINGLE_FIXED):
            return Scaling.FIXED
        return Scaling.SEQUENTIAL

    @property
    def is_step_up(self) -> bool:
        return self in (Method.SUF, Method.SUS, Method.SUFI, Method.SUSI)

    @property
    def proven_level(self) -> bool:
        """False for the joint-union cutoffs, whose strong level control is unproven."""
        return self not in (Method.SUFI, Method.SUSI)


@dataclass(frozen=True)
class TestConfig:
    """Problem size ``k``, assumed minimum number of zero effects ``nu``, and level ``alpha``."""

    __test__ = False  # not a pytest class

    k: int
    nu: int
    alpha: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValueError(f"k must be an integer >= 2, got {self.k!r}")
        if int(self.nu) != self.nu or not 1 <= self.nu <= self.k - 1:
            raise ValueError(f"nu must satisfy 1 <= nu <= k-1 = {self.k - 1}, got {self.nu!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "nu", int(self.nu))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def tested(self) -> range:
        """Indices m = nu+1..k of the hypotheses H_{0,m} in the family."""
        return range(self.nu + 1, self.k + 1)


@dataclass(frozen=True)
class EffectEstimates:
    labels: tuple[str, ...]
    values: tuple[float, ...]
    scales: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        labels = tuple(str(v) for v in self.labels)
        values = tuple(float(v) for v in self.values)
        if len(labels) < 2:
            raise ValueError("need at least two effects")
        if len(values) != len(labels):
            raise ValueError(f"{len(labels)} labels but {len(values)} values")
        if len(set(labels)) != len(labels):
            seen = set()
            dupes = [x for x in labels if x in seen or seen.add(x)]
            raise ValueError(f"duplicate effect labels: {sorted(set(dupes))}")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("effect estimates must be finite")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)
        if self.scales is not None:
            scales = tuple(float(v) for v in self.scales)
            if len(scales) != len(labels):
                raise ValueError(f"{len(labels)} labels but {len(scales)} scales")
            if not all(s > 0 and math.isfinite(s) for s in scales):
                raise ValueError("scales must be finite and strictly positive")
            object.__setattr__(self, "scales", scales)

    @property
    def k(self) -> int:
        return len(self.labels)

    def standardized(self) -> np.ndarray:
        v = np.asarray(self.values, dtype=float)
        if self.scales is None:
            return v
        return v / np.asarray(self.scales, dtype=float)


@dataclass(frozen=True, eq=False)
class OrderedSquares:
    """Sorted squared standardized estimates X_1 <= ... <= X_k.

    ``rank_of[m - 1]`` is the 0-based input index of the effect ranked ``m``;
    ``prefix[n - 1]`` is S_n, the sum of the ``n`` smallest squares.
    """

    x: np.ndarray
    rank_of: np.ndarray
    prefix: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        rank_of = np.array(self.rank_of, dtype=np.intp)
        prefix = np.array(self.prefix, dtype=float)
        k = x.shape[0]
        if x.ndim != 1 or rank_of.shape != (k,) or prefix.shape != (k,):
            raise ValueError("x, rank_of and prefix must be 1-d arrays of equal length")
        if np.any(x < 0) or np.any(np.diff(x) < 0):
            raise ValueError("x must be nonnegative and nondecreasing")
        if not np.array_equal(np.sort(rank_of), np.arange(k)):
            raise ValueError("rank_of must be a permutation of 0..k-1")
        for arr in (x, rank_of, prefix):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "rank_of", rank_of)
        object.__setattr__(self, "prefix", prefix)

    @property
    def k(self) -> int:
        return self.x.shape[0]

    def X(self, m: int) -> float:
        """The m-th smallest square (1-based)."""
        return float(self.x[m - 1])

    def S(self, n: int) -> float:
        """Sum of the n smallest squares; S(0) is 0."""
        return float(self.prefix[n - 1]) if n > 0 else 0.0


@dataclass(frozen=True, eq=False)
class CutoffTable:
    """Critical values d[m] for m = nu+1..k, tagged with method and MC provenance."""

    method: Method
    k: int
    nu: int
    alpha: float
    d: Mapping[int, float]
    reps: int
    seed: int

    def __post_init__(self):
        if not isinstance(self.method, Method):
            object.__setattr__(self, "method", Method.parse(self.method))
        cfg = TestConfig(self.k, self.nu, self.alpha)
        d = {int(m): float(v) for m, v in dict(self.d).items()}
        if sorted(d) != list(cfg.tested):
            raise ValueError(
                f"cutoff domain must be exactly {cfg.nu + 1}..{cfg.k}, got {sorted(d)}"
            )
        bad = {m: v for m, v in d.items() if not (math.isfinite(v) and v > 1.0)}
        if bad:
            raise ValueError(f"cutoffs must be finite and > 1, offending entries: {bad}")
        object.__setattr__(self, "d", MappingProxyType(dict(sorted(d.items()))))

    def __eq__(self, other):
        if not isinstance(other, CutoffTable):
            return NotImplemented
        return (
            self.method == other.method
            and self.config == other.config
            and dict(self.d) == dict(other.d)
            and self.reps == other.reps
            and self.seed == other.seed
        )

    @property
    def config(self) -> TestConfig:
        return TestConfig(self.k, self.nu, self.alpha)

    @property
    def proven_level(self) -> bool:
        return self.method.proven_level

    def values(self) -> np.ndarray:
        return np.array([self.d[m] for m in self.config.tested])


@dataclass(frozen=True)
class Step:
    m: int
    statistic: float
    cutoff: float
    rejected: bool


@dataclass(frozen=True)
class Decision:
    m0: Optional[int]
    active_labels: tuple[str, ...]
    inactive_labels: tuple[str, ...]
    steps: tuple[Step, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "active_labels", tuple(self.active_labels))
        object.__setattr__(self, "inactive_labels", tuple(self.inactive_labels))
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.m0 is None and self.active_labels:
            raise ValueError("no rejection index but active effects declared")
        if set(self.active_labels) & set(self.inactive_labels):
            raise ValueError("an effect cannot be both active and inactive")
        if self.m0 is not None:
            k = len(self.active_labels) + len(self.inactive_labels)
            if len(self.active_labels) != k - self.m0 + 1:
                raise ValueError(
                    f"m0={self.m0} implies {k - self.m0 + 1} active effects, "
                    f"got {len(self.active_labels)}"
                )

    @property
    def n_active(self) -> int:
        return len(self.active_labels)


@dataclass(frozen=True)
class McSettings:
    """Monte Carlo effort and reproducibility settings.

    Results depend only on ``reps`` and ``seed``; ``chunk`` and ``workers``
    control how the work is split and never change the output.
    """

    reps: int = 500_000
    seed: int = 0
    chunk: int = 65_536
    workers: int = 1

    def __post_init__(self):
        if int(self.reps) != self.reps or self.reps < MIN_REPS:
            raise ValueError(f"reps must be an integer >= {MIN_REPS}, got {self.reps!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed <= _UINT64_MAX:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if int(self.chunk) != self.chunk or self.chunk < 1:
            raise ValueError(f"chunk must be a positive integer, got {self.chunk!r}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValueError(f"workers must be a positive integer, got {self.workers!r}")
        for name in ("reps", "seed", "chunk", "workers"):
            object.__setattr__(self, name, int(getattr(self, name)))


def order_squares(est: EffectEstimates) -> OrderedSquares:
    """Square the standardized estimates and sort them.

    Ties are broken by input position, so the result is deterministic.
    Prefix sums accumulate smallest terms first.

    >>> os = order_squares(EffectEstimates(("a", "b", "c"), (3.0, -1.0, 2.0)))
    >>> os.x.tolist(), os.prefix.tolist(), os.rank_of.tolist()
    ([1.0, 4.0, 9.0], [1.0, 5.0, 14.0], [1, 2, 0])
    """
    sq = est.standardized() ** 2
    order = np.argsort(sq, kind="stable")
    x = sq[order]
    return OrderedSquares(x=x, rank_of=order, prefix=np.cumsum(x))

