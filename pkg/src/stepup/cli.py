"""Command-line entry point: ``stepup {cutoffs,analyze,effects,simulate,plot}``.

Exit codes: 0 success, 2 invalid input, 3 numerical/solver failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import ingest, simulation
from .model import CutoffTable, EffectEstimates, McSettings, Method, TestConfig, order_squares
from .montecarlo import CutoffBudgetError, solve_cutoffs
from .procedures import ratio_statistics, step_up

EXIT_INPUT = 2
EXIT_SOLVER = 3

_METHOD_CHOICES = ["single-fixed", "single-seq", "suf", "sus", "sufi", "susi"]
_STEP_UP_CHOICES = ["suf", "sus", "sufi", "susi"]


class UsageError(Exception):
    pass


def _add_mc(p: argparse.ArgumentParser, seed_required: bool = True) -> None:
    p.add_argument("--reps", type=int, default=500_000, help="Monte Carlo replicates per step (default 500000)")
    p.add_argument("--seed", type=int, required=seed_required, default=None, help="RNG seed (unsigned 64-bit)")
    p.add_argument("--chunk", type=int, default=65_536, help="replicates per work unit")
    p.add_argument("--workers", type=int, default=1, help="worker threads; never changes results")


def _mc(args) -> McSettings:
    if args.seed is None:
        raise UsageError("--seed is required whenever cutoffs are solved")
    return McSettings(reps=args.reps, seed=args.seed, chunk=args.chunk, workers=args.workers)


def format_cutoffs(table: CutoffTable) -> str:
    flag = "" if table.proven_level else "  (strong level control not established)"
    lines = [
        f"{table.method.value} cutoffs  k={table.k} nu={table.nu} alpha={table.alpha:g} "
        f"reps={table.reps} seed={table.seed}{flag}",
        f"{'m':>4} {'d':>10}",
    ]
    lines += [f"{m:>4} {d:>10.1f}" for m, d in table.d.items()]
    return "\n".join(lines)


def format_report(est: EffectEstimates, table: CutoffTable) -> str:
    """Per-step table in the layout m / effect / estimate / X_m / statistic / cutoff / decision."""
    os_ = order_squares(est)
    decision = step_up(os_, table, est)
    stats = ratio_statistics(os_.x, os_.prefix, table.nu, table.method.scaling)[0]
    stat_name = "W_nu,m" if table.method.scaling.value == "fixed" else "W_m-1,m"
    tested = {s.m: s for s in decision.steps}
    head = (
        f"{table.method.value}  k={table.k} nu={table.nu} alpha={table.alpha:g}  "
        f"S_{table.nu} = {os_.S(table.nu):.2f}"
    )
    lines = [
        head,
        f"{'m':>4} {'effect':>10} {'estimate':>10} {'X_m':>10} {stat_name:>10} {'cutoff':>10}  decision",
    ]
    for j, m in enumerate(table.config.tested):
        idx = int(os_.rank_of[m - 1])
        verdict = ""
        if m in tested:
            verdict = "reject" if tested[m].rejected else "accept"
        lines.append(
            f"{m:>4} {est.labels[idx]:>10} {est.values[idx]:>10.4g} {os_.X(m):>10.2f} "
            f"{stats[j]:>10.1f} {table.d[m]:>10.1f}  {verdict}"
        )
    n = decision.n_active
    noun = "effect" if n == 1 else "effects"
    tail = f": {', '.join(decision.active_labels)}" if n else ""
    lines.append(f"{n} active {noun}{tail}")
    return "\n".join(lines)


def _cmd_cutoffs(args) -> int:
    cfg = TestConfig(args.k, args.nu, args.alpha)
    table = solve_cutoffs(cfg, Method.parse(args.method), _mc(args))
    if args.out:
        ingest.write_cutoffs(table, args.out)
    print(format_cutoffs(table))
    return 0


def _load_estimates(args) -> EffectEstimates:
    if args.estimates:
        return ingest.parse_estimates(args.estimates)
    return ingest.estimate_effects(ingest.parse_design(args.design))


def _cmd_analyze(args) -> int:
    est = _load_estimates(args)
    if args.cutoffs:
        table = ingest.read_cutoffs(args.cutoffs)
        if args.method and Method.parse(args.method) is not table.method:
            raise UsageError(f"--method {args.method} disagrees with cutoffs file method {table.method.value}")
        if table.k != est.k:
            raise UsageError(f"cutoffs are for k={table.k} but the data have {est.k} effects")
    else:
        if not args.method:
            raise UsageError("--method is required when cutoffs are solved")
        if args.nu is None:
            raise UsageError("--nu is required when cutoffs are solved")
        table = solve_cutoffs(TestConfig(est.k, args.nu, args.alpha), Method.parse(args.method), _mc(args))
    if not table.method.is_step_up:
        raise UsageError(f"{table.method.value} is not a step-up method")
    print(format_report(est, table))
    return 0


def _cmd_effects(args) -> int:
    est = ingest.estimate_effects(ingest.parse_design(args.design))
    if args.out:
        ingest.write_estimates(est, args.out)
    else:
        ingest.write_estimates(est, sys.stdout)
    return 0


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _cmd_simulate(args) -> int:
    mc = _mc(args)
    cfg = TestConfig(args.k, args.nu, args.alpha)
    methods = [Method.parse(m) for m in _split(args.method)]
    if not all(m.is_step_up for m in methods):
        raise UsageError("simulate accepts step-up methods only")
    cases = [c.upper() for c in _split(args.case)]
    try:
        s_values = [float(s) for s in _split(args.s)]
    except ValueError:
        raise UsageError(f"--s must be a comma-separated list of numbers, got {args.s!r}") from None
    provided = {t.method: t for t in (ingest.read_cutoffs(p) for p in args.cutoffs or [])}
    tables = []
    for m in methods:
        t = provided.get(m) or solve_cutoffs(cfg, m, mc)
        if t.config != cfg:
            raise UsageError(f"cutoffs for {m.value} were solved for a different (k, nu, alpha)")
        tables.append(t)
    results = simulation.run_grid(
        cases, s_values, tables, args.trials, args.seed, k=args.k, chunk=args.chunk, workers=args.workers
    )
    rows = simulation.result_rows(results)
    if args.out:
        ingest.write_results(rows, args.out)
    else:
        ingest.write_results(rows, sys.stdout)
    for r in results:
        m = r.metrics
        power = "NA" if m.power is None else f"{m.power:.4f}"
        print(
            f"{r.case} s={r.s:g} {r.method.value:<4} EER={m.eer:.4f} PCSN={m.pcsn:.4f} "
            f"PCCS={m.pccs:.4f} Power={power}",
            file=sys.stderr,
        )
    return 0


def _cmd_plot(args) -> int:
    rows = ingest.read_results(args.results)
    svg = simulation.render_plot(rows, args.metric, args.case.upper() if args.case else None)
    if args.out:
        Path(args.out).write_text(svg)
    else:
        sys.stdout.write(svg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stepup", description="Step-up tests for active effects in orthogonal saturated designs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cutoffs", help="solve a cutoff table by Monte Carlo")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--method", choices=_METHOD_CHOICES, type=str.lower, required=True)
    p.add_argument("--out", help="write cutoffs.csv here")
    _add_mc(p)
    p.set_defaults(func=_cmd_cutoffs)

    p = sub.add_parser("analyze", help="run a step-up procedure on data")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--estimates", help="estimates.csv")
    src.add_argument("--design", help="design.csv")
    p.add_argument("--cutoffs", help="precomputed cutoffs.csv (no Monte Carlo is run)")
    p.add_argument("--method", choices=_STEP_UP_CHOICES, type=str.lower)
    p.add_argument("--nu", type=int)
    p.add_argument("--alpha", type=float, default=0.05)
    _add_mc(p, seed_required=False)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("effects", help="least-squares effects of a two-level design")
    p.add_argument("--design", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_effects)

    p = sub.add_parser("simulate", help="simulation study over cases C1-C6")
    p.add_argument("--case", default=",".join(simulation.CASE_IDS))
    p.add_argument("--s", default=",".join(f"{s:g}" for s in simulation.DEFAULT_S_VALUES))
    p.add_argument("--method", default="suf,sus")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--nu", type=int, default=7)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--cutoffs", action="append", help="precomputed cutoffs.csv (repeatable)")
    p.add_argument("--out", help="write results.csv here")
    _add_mc(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("plot", help="render results.csv as SVG")
    p.add_argument("--results", required=True)
    p.add_argument("--metric", default="power", choices=list(simulation.METRICS))
    p.add_argument("--case")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CutoffBudgetError, FloatingPointError) as exc:
        print(f"stepup: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, ValueError, OSError) as exc:
        print(f"stepup: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
