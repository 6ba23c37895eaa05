"""Replicated-data study of the step-up procedures over configurations C1-C6.

Each trial draws estimates from N(beta_i, 1), runs a procedure and scores
it on four measures:

* EER   some true null asserted false (a first rejection at m0 <= N)
* PCSN  the declared number of inactive effects equals N
* PCCS  the declared active set equals the true active set
* Power fraction of the true active effects that are declared active
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .model import CutoffTable, Method
from .montecarlo import SIMULATION_DOMAIN, run_chunked, standard_normals, stream_id
from .procedures import first_rejection

__all__ = [
    "CASE_IDS",
    "SimCase",
    "SimulationMetrics",
    "CellResult",
    "make_case",
    "cell_seed",
    "run_cell",
    "run_grid",
    "result_rows",
    "render_plot",
    "DEFAULT_S_VALUES",
]

CASE_IDS = ("C1", "C2", "C3", "C4", "C5", "C6")
DEFAULT_S_VALUES = (0.0, 1.0, 2.0, 4.0, 8.0)
METRICS = ("eer", "pcsn", "pccs", "power")

# (number of nonzero effects at the top, graded multiples i*s or all equal s)
_RECIPES = {
    "C1": (1, False),
    "C2": (3, False),
    "C3": (5, False),
    "C4": (7, False),
    "C5": (3, True),
    "C6": (5, True),
}


@dataclass(frozen=True)
class SimCase:
    id: str
    k: int
    s: float
    beta: tuple[float, ...]

    @property
    def N(self) -> int:
        """Number of zero effects."""
        return sum(1 for b in self.beta if b == 0)

    def check(self, nu: int) -> None:
        if self.N < nu:
            raise ValueError(f"case {self.id} at s={self.s} has N={self.N} zero effects, fewer than nu={nu}")


def make_case(case_id: str, s: float, k: int = 15) -> SimCase:
    """Build the parameter vector for one configuration.

    C1-C4 set the last 1, 3, 5, 7 effects to ``s``; C5 and C6 set the last
    3 and 5 effects to ``s, 2s, 3s, ...``. All other effects are zero.
    """
    case_id = case_id.upper()
    if case_id not in _RECIPES:
        raise ValueError(f"unknown case {case_id!r}; expected one of {', '.join(CASE_IDS)}")
    if not s >= 0:
        raise ValueError(f"signal scale must be nonnegative, got {s}")
    n_active, graded = _RECIPES[case_id]
    if n_active >= k:
        raise ValueError(f"case {case_id} needs k > {n_active}")
    beta = [0.0] * k
    for i in range(1, n_active + 1):
        beta[k - n_active + i - 1] = i * s if graded else s
    return SimCase(case_id, k, float(s), tuple(float(b) for b in beta))


@dataclass(frozen=True)
class SimulationMetrics:
    eer: float
    eer_se: float
    pcsn: float
    pcsn_se: float
    pccs: float
    pccs_se: float
    power: Optional[float]  # None when there are no active effects
    power_se: Optional[float]
    trials: int


def _freq(events: np.ndarray) -> tuple[float, float]:
    p = float(events.mean())
    return p, math.sqrt(p * (1.0 - p) / events.size)


def cell_seed(seed: int, case_id: str, s: float) -> int:
    """Seed for one (case, s) cell, shared by all methods (common random numbers)."""
    bits = int(np.float64(s).view(np.uint64))
    ss = np.random.SeedSequence([seed, CASE_IDS.index(case_id.upper()), bits])
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def run_cell(
    case: SimCase,
    table: CutoffTable,
    trials: int,
    seed: int,
    *,
    chunk: int = 65_536,
    workers: int = 1,
) -> SimulationMetrics:
    """Score the step-up procedure of ``table`` on ``trials`` datasets drawn for ``case``."""
    if not table.method.is_step_up:
        raise ValueError(f"{table.method.value} is not a step-up method")
    if table.k != case.k:
        raise ValueError(f"table has k={table.k} but case has k={case.k}")
    case.check(table.nu)
    if trials < 1:
        raise ValueError("need at least one trial")
    beta = np.asarray(case.beta)
    k, n_zero = case.k, case.N
    truth = beta != 0
    n_true = int(truth.sum())

    def chunk_scores(a: int, b: int) -> np.ndarray:
        est = beta + standard_normals(seed, stream_id(SIMULATION_DOMAIN), a, b - a, k)
        sq = est * est
        order = np.argsort(sq, axis=1, kind="stable")
        x = np.take_along_axis(sq, order, axis=1)
        m0 = first_rejection(x, np.cumsum(x, axis=1), table)
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, np.arange(k)[None, :], axis=1)
        declared = (m0 > 0)[:, None] & (rank >= (m0 - 1)[:, None])
        out = np.empty((b - a, 4))
        out[:, 0] = (m0 > 0) & (m0 <= n_zero)
        out[:, 1] = (k - declared.sum(axis=1)) == n_zero
        out[:, 2] = np.all(declared == truth, axis=1)
        out[:, 3] = (declared & truth).sum(axis=1) / n_true if n_true else np.nan
        return out

    scores = run_chunked(chunk_scores, trials, chunk, workers)
    eer, eer_se = _freq(scores[:, 0])
    pcsn, pcsn_se = _freq(scores[:, 1])
    pccs, pccs_se = _freq(scores[:, 2])
    if n_true:
        power = float(scores[:, 3].mean())
        power_se = float(scores[:, 3].std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    else:
        power = power_se = None
    return SimulationMetrics(eer, eer_se, pcsn, pcsn_se, pccs, pccs_se, power, power_se, trials)


@dataclass(frozen=True)
class CellResult:
    case: str
    s: float
    method: Method
    metrics: SimulationMetrics
    seed: int  # master seed of the grid


def run_grid(
    cases: Sequence[str],
    s_values: Sequence[float],
    tables: Iterable[CutoffTable],
    trials: int,
    seed: int,
    *,
    k: int = 15,
    chunk: int = 65_536,
    workers: int = 1,
) -> list[CellResult]:
    """Run every (case, s, method) cell; methods are taken from ``tables``."""
    tables = list(tables)
    if not cases or not s_values or not tables:
        raise ValueError("empty simulation grid")
    out = []
    for cid in cases:
        for s in s_values:
            case = make_case(cid, s, k)
            cs = cell_seed(seed, cid, s)
            for table in tables:
                metrics = run_cell(case, table, trials, cs, chunk=chunk, workers=workers)
                out.append(CellResult(case.id, float(s), table.method, metrics, seed))
    return out


def result_rows(results: Iterable[CellResult]) -> list[dict]:
    """Flatten to ``case,s,method,metric,value,reps,seed`` records.

    Every metric gets a companion ``<metric>_se`` row; power is ``None``
    (written as NA) when the case has no active effects.
    """
    rows = []
    for r in results:
        for name in METRICS:
            for key in (name, f"{name}_se"):
                rows.append(
                    {
                        "case": r.case,
                        "s": r.s,
                        "method": r.method.value,
                        "metric": key,
                        "value": getattr(r.metrics, key),
                        "reps": r.metrics.trials,
                        "seed": r.seed,
                    }
                )
    return rows


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def render_plot(rows: Sequence[Mapping], metric: str, case: Optional[str] = None) -> str:
    """Render one line per method of ``metric`` against ``s`` as an SVG document.

    ``rows`` are result records as produced by ``result_rows`` or read back
    from results.csv. Missing (NA) values are skipped. The output is a pure
    function of the input.
    """
    metric = metric.lower()
    if case is None:
        cases = [r["case"] for r in rows]
        if not cases:
            raise ValueError("no results to plot")
        case = cases[0]
    pts: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        if r["case"] != case or r["metric"] != metric or r["value"] is None:
            continue
        pts.setdefault(r["method"], []).append((float(r["s"]), float(r["value"])))
    if not pts:
        raise ValueError(f"no {metric!r} values for case {case!r}")

    width, height = 480, 320
    left, right, top, bottom = 56, 104, 32, 44
    pw, ph = width - left - right, height - top - bottom
    xs = [x for series in pts.values() for x, _ in series]
    x0, x1 = min(xs), max(xs)
    span = (x1 - x0) or 1.0

    def sx(x: float) -> float:
        return left + (x - x0) / span * pw

    def sy(y: float) -> float:
        return top + (1.0 - y) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="18" text-anchor="middle" font-size="13">'
        f"{escape(str(case))}: {metric.upper()}</text>",
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(tick)
        out.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(tick)}</text>')
    for tick in sorted(set(xs)):
        x = sx(tick)
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 16}" text-anchor="middle">{_fmt(tick)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">s</text>')
    out.append(
        f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + ph / 2:.1f})">{metric.upper()}</text>'
    )
    for i, method in enumerate(sorted(pts)):
        color = _COLORS[i % len(_COLORS)]
        series = sorted(pts[method])
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in series)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        for x, y in series:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
        ly = top + 12 + 16 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{left + pw + 36}" y="{ly + 4}">{escape(str(method))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
