"""CSV readers and writers, and least-squares effects from two-level designs.

File layouts (headers mandatory)::

    estimates.csv   label,estimate[,scale]
    design.csv      <effect columns...>,y     (effect entries -1 / 1)
    cutoffs.csv     method,k,nu,alpha,reps,seed
                    <metadata row>
                    m,d
                    <one row per m>
    results.csv     case,s,method,metric,value,reps,seed
"""
from __future__ import annotations

import csv
import io
import math
from contextlib import contextmanager
from dataclasses import dataclass
from os import PathLike
from typing import IO, Iterable, Iterator, Union

import numpy as np

from .model import CutoffTable, EffectEstimates

__all__ = [
    "InputError",
    "DesignData",
    "estimate_effects",
    "parse_estimates",
    "parse_design",
    "write_estimates",
    "write_cutoffs",
    "read_cutoffs",
    "cutoffs_text",
    "write_results",
    "read_results",
    "format_float",
]

Source = Union[str, PathLike, IO[str]]


class InputError(ValueError):
    """Malformed input file; the message names the line and column."""

    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.column = column


def format_float(v: float) -> str:
    """Shortest-safe text for a float; 17 significant digits round-trip exactly."""
    return format(float(v), ".17g")


@contextmanager
def _open(src: Source, mode: str = "r") -> Iterator[IO[str]]:
    if hasattr(src, "read") or hasattr(src, "write"):
        yield src  # type: ignore[misc]
    else:
        with open(src, mode, newline="") as fh:
            yield fh


def _rows(src: Source) -> list[tuple[int, list[str]]]:
    with _open(src) as fh:
        rows = [
            (n, [c.strip() for c in row])
            for n, row in enumerate(csv.reader(fh), start=1)
            if row and any(c.strip() for c in row)
        ]
    return rows


def _number(text: str, line: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise InputError(f"not a number: {text!r}", line, column) from None
    if not math.isfinite(v):
        raise InputError(f"not a finite number: {text!r}", line, column)
    return v


def _integer(text: str, line: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise InputError(f"not an integer: {text!r}", line, column) from None


def parse_estimates(src: Source) -> EffectEstimates:
    rows = _rows(src)
    if not rows:
        raise InputError("no data rows")
    line, header = rows[0]
    header = [h.lower() for h in header]
    if header[:2] != ["label", "estimate"] or len(header) > 3 or (len(header) == 3 and header[2] != "scale"):
        raise InputError(f"header must be label,estimate[,scale], got {','.join(header)}", line)
    if len(rows) == 1:
        raise InputError("no data rows")
    labels, values, scales = [], [], []
    seen: dict[str, int] = {}
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise InputError(f"expected {len(header)} fields, got {len(row)}", line)
        label = row[0]
        if not label:
            raise InputError("empty label", line, "label")
        if label in seen:
            raise InputError(f"duplicate label {label!r} (first on line {seen[label]})", line, "label")
        seen[label] = line
        labels.append(label)
        values.append(_number(row[1], line, "estimate"))
        if len(header) == 3:
            a = _number(row[2], line, "scale")
            if a <= 0:
                raise InputError(f"scale must be positive, got {row[2]!r}", line, "scale")
            scales.append(a)
    if len(labels) < 2:
        raise InputError("need at least two effects")
    return EffectEstimates(tuple(labels), tuple(values), tuple(scales) if scales else None)


def write_estimates(est: EffectEstimates, dst: Source) -> None:
    with _open(dst, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if est.scales is None:
            w.writerow(["label", "estimate"])
            w.writerows([lab, format_float(v)] for lab, v in zip(est.labels, est.values))
        else:
            w.writerow(["label", "estimate", "scale"])
            w.writerows(
                [lab, format_float(v), format_float(a)]
                for lab, v, a in zip(est.labels, est.values, est.scales)
            )


@dataclass(frozen=True, eq=False)
class DesignData:
    """A two-level orthogonal design: ±1 effect columns and a response ``y``."""

    factors: tuple[str, ...]
    x: np.ndarray  # (M, k) integer matrix of ±1
    y: np.ndarray  # (M,)

    def __post_init__(self):
        x = np.array(self.x, dtype=np.int64)
        y = np.array(self.y, dtype=float)
        factors = tuple(self.factors)
        if x.ndim != 2 or x.shape[1] != len(factors) or y.shape != (x.shape[0],):
            raise ValueError("design matrix, factor names and response disagree in shape")
        if len(factors) < 2:
            raise ValueError("need at least two effect columns")
        if len(set(factors)) != len(factors):
            raise ValueError("duplicate factor names")
        if not np.all(np.abs(x) == 1):
            raise ValueError("effect columns must contain only -1 and 1")
        sums = x.sum(axis=0)
        for j in np.flatnonzero(sums):
            raise ValueError(f"column {factors[j]!r} is not orthogonal to the intercept (sum {sums[j]})")
        gram = x.T @ x
        off = np.argwhere(np.triu(gram, 1) != 0)
        if off.size:
            i, j = off[0]
            raise ValueError(
                f"columns {factors[i]!r} and {factors[j]!r} are not orthogonal (inner product {gram[i, j]})"
            )
        for arr in (x, y):
            arr.setflags(write=False)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def runs(self) -> int:
        return self.x.shape[0]

    @property
    def saturated(self) -> bool:
        return self.runs == len(self.factors) + 1


def estimate_effects(dd: DesignData) -> EffectEstimates:
    """Least-squares coefficients <c_j, y> / M with scale 1/sqrt(M).

    These are half of the classical "effect" (contrast / (M/2)); the ratio
    statistics are unaffected by the factor.
    """
    M = dd.runs
    beta = dd.x.T @ dd.y / M
    return EffectEstimates(dd.factors, tuple(beta), tuple([1.0 / math.sqrt(M)] * len(dd.factors)))


def parse_design(src: Source) -> DesignData:
    rows = _rows(src)
    if not rows:
        raise InputError("no data rows")
    line, header = rows[0]
    if header.count("y") != 1:
        raise InputError("header must name exactly one response column 'y'", line)
    yi = header.index("y")
    factors = [h for i, h in enumerate(header) if i != yi]
    if any(not f for f in factors):
        raise InputError("empty column name in header", line)
    if len(rows) == 1:
        raise InputError("no data rows")
    xs, ys = [], []
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise InputError(f"expected {len(header)} fields, got {len(row)}", line)
        xrow = []
        for i, (name, cell) in enumerate(zip(header, row)):
            if i == yi:
                ys.append(_number(cell, line, name))
            elif cell in ("1", "+1"):
                xrow.append(1)
            elif cell == "-1":
                xrow.append(-1)
            else:
                raise InputError(f"effect entries must be -1 or 1, got {cell!r}", line, name)
        xs.append(xrow)
    try:
        return DesignData(tuple(factors), np.array(xs), np.array(ys))
    except ValueError as exc:
        raise InputError(str(exc)) from None


_CUTOFF_META = ["method", "k", "nu", "alpha", "reps", "seed"]


def write_cutoffs(table: CutoffTable, dst: Source) -> None:
    with _open(dst, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_CUTOFF_META)
        w.writerow([table.method.value, table.k, table.nu, format_float(table.alpha), table.reps, table.seed])
        w.writerow(["m", "d"])
        w.writerows([m, format_float(d)] for m, d in table.d.items())


def cutoffs_text(table: CutoffTable) -> str:
    buf = io.StringIO()
    write_cutoffs(table, buf)
    return buf.getvalue()


def read_cutoffs(src: Source) -> CutoffTable:
    rows = _rows(src)
    if not rows:
        raise InputError("no data rows")
    line, header = rows[0]
    if [h.lower() for h in header] != _CUTOFF_META:
        raise InputError(f"header must be {','.join(_CUTOFF_META)}", line)
    if len(rows) < 3:
        raise InputError("no data rows")
    line, meta = rows[1]
    if len(meta) != len(_CUTOFF_META):
        raise InputError(f"expected {len(_CUTOFF_META)} metadata fields, got {len(meta)}", line)
    method = meta[0]
    k = _integer(meta[1], line, "k")
    nu = _integer(meta[2], line, "nu")
    alpha = _number(meta[3], line, "alpha")
    reps = _integer(meta[4], line, "reps")
    seed = _integer(meta[5], line, "seed")
    line, sub = rows[2]
    if [h.lower() for h in sub] != ["m", "d"]:
        raise InputError("expected the m,d header after the metadata row", line)
    d: dict[int, float] = {}
    for line, row in rows[3:]:
        if len(row) != 2:
            raise InputError(f"expected 2 fields, got {len(row)}", line)
        m = _integer(row[0], line, "m")
        if m in d:
            raise InputError(f"duplicate m={m}", line, "m")
        d[m] = _number(row[1], line, "d")
    if not d:
        raise InputError("no data rows")
    try:
        return CutoffTable(method, k, nu, alpha, d, reps, seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None


RESULT_FIELDS = ["case", "s", "method", "metric", "value", "reps", "seed"]


def write_results(rows: Iterable[dict], dst: Source) -> None:
    with _open(dst, "w") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            out = dict(r)
            for key in ("s", "value"):
                v = out[key]
                out[key] = "NA" if v is None or (isinstance(v, float) and math.isnan(v)) else format_float(v)
            w.writerow(out)


def read_results(src: Source) -> list[dict]:
    rows = _rows(src)
    if not rows:
        raise InputError("no data rows")
    line, header = rows[0]
    if header != RESULT_FIELDS:
        raise InputError(f"header must be {','.join(RESULT_FIELDS)}", line)
    out = []
    for line, row in rows[1:]:
        if len(row) != len(RESULT_FIELDS):
            raise InputError(f"expected {len(RESULT_FIELDS)} fields, got {len(row)}", line)
        rec = dict(zip(RESULT_FIELDS, row))
        rec["s"] = _number(rec["s"], line, "s")
        rec["value"] = None if rec["value"] == "NA" else _number(rec["value"], line, "value")
        rec["reps"] = _integer(rec["reps"], line, "reps")
        rec["seed"] = _integer(rec["seed"], line, "seed")
        out.append(rec)
    if not out:
        raise InputError("no data rows")
    return out
