"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary
under "acceptance criteria".
"""
import math

import numpy as np
import pytest

from conftest import (
    DATA,
    REF_CFG,
    REF_MC,
    FILTRATION_CUTOFFS,
    FILTRATION_M,
    FILTRATION_S7,
    FILTRATION_W_FIXED,
    FILTRATION_W_SEQ,
    FILTRATION_X,
    record_acceptance,
)
from oracles import f11_max_min_density, f11_max_min_quantile, w_matrix
from stepup import (
    EffectEstimates,
    McSettings,
    Method,
    OrderedSquares,
    Scaling,
    SingleRegion,
    TestConfig,
    empirical_rejection_prob,
    order_squares,
    quantile_d,
    step_up,
    w_statistic,
)
from stepup.cli import main
from stepup.ingest import read_cutoffs, write_cutoffs
from stepup.simulation import CASE_IDS, DEFAULT_S_VALUES, run_grid


def record(n, ok, detail):
    record_acceptance(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")


def report(n, ok, detail):
    record(n, ok, detail)
    assert ok, detail


def rounded_squares() -> OrderedSquares:
    # only S_7 and X_8..X_15 are given; spread S_7 evenly over the first seven
    x = np.array([FILTRATION_S7 / 7] * 7 + FILTRATION_X)
    return OrderedSquares(x, np.arange(15), np.cumsum(x))


def test_criterion_1_table_statistics(filtration):
    os = rounded_squares()
    fixed = [w_statistic(7, m, os) for m in FILTRATION_M]
    seq = [w_statistic(m - 1, m, os) for m in FILTRATION_M]
    dev = [(abs(a - b), f"W_7,{m}") for m, a, b in zip(FILTRATION_M, fixed, FILTRATION_W_FIXED)]
    dev += [(abs(a - b), f"W_{m - 1},{m}") for m, a, b in zip(FILTRATION_M, seq, FILTRATION_W_SEQ)]
    err, where = max(dev)
    # the same statistics from full-precision estimates, for the record
    full = order_squares(filtration)
    err_full = max(
        [abs(w_statistic(7, m, full) - b) for m, b in zip(FILTRATION_M, FILTRATION_W_FIXED)]
        + [abs(w_statistic(m - 1, m, full) - b) for m, b in zip(FILTRATION_M, FILTRATION_W_SEQ)]
    )
    report(
        1,
        err <= 0.05,
        f"largest deviation {err:.3f} at {where} from rounded X_m and S_7 = 15.11 (tol 0.05); "
        f"full-precision estimates give {err_full:.3f}",
    )


def test_criterion_2_cutoff_tables(ref_tables):
    worst = {}
    for method, ref in FILTRATION_CUTOFFS.items():
        got = ref_tables[method].values()
        worst[method] = float(np.max(np.abs(got / np.array(ref) - 1)))
    ok = all(v <= 0.05 for v in worst.values())
    detail = ", ".join(f"{m.value} {v:.1%}" for m, v in worst.items())
    report(2, ok, f"max relative deviation at reps={REF_MC.reps}: {detail} (tol 5%)")


def test_criterion_3_filtration_decisions(ref_tables, filtration, tmp_path, capsys):
    expected = {Method.SUF: 4, Method.SUFI: 4, Method.SUS: 5, Method.SUSI: 5}
    got = {}
    for method, table in ref_tables.items():
        path = tmp_path / f"{method.value}.csv"
        write_cutoffs(table, path)
        assert main(["analyze", "--estimates", str(DATA / "filtration_estimates.csv"), "--cutoffs", str(path)]) == 0
        last = capsys.readouterr().out.splitlines()[-1]
        got[method] = int(last.split()[0])
        assert step_up(order_squares(filtration), table, filtration).n_active == got[method]
    ok = got == expected
    report(3, ok, "active counts " + ", ".join(f"{m.value}={n}" for m, n in got.items()) + " (want 4, 4, 5, 5)")


def test_criterion_4_f11_quantile():
    reps = 1_000_000
    exact = f11_max_min_quantile(0.05)
    d = quantile_d(1, 2, TestConfig(2, 1, 0.05), McSettings(reps=reps, seed=20070101, workers=4))
    se = math.sqrt(0.05 * 0.95 / reps) / f11_max_min_density(exact)
    ok = abs(d - exact) <= 3 * se
    report(4, ok, f"d_1,2 = {d:.2f}, closed form {exact:.3f}, |diff| = {abs(d - exact):.2f} <= 3 SE = {3 * se:.2f}")


@pytest.mark.parametrize("method", [Method.SUF, Method.SUS])
def test_criterion_5_strong_level_control(ref_tables, method):
    lines = []
    ok = True
    for m in (8, 11, 15):
        beta = [0.0] * m + [10.0] * (15 - m)
        p, se = empirical_rejection_prob(ref_tables[method], beta, McSettings(reps=100_000, seed=500 + m, workers=4))
        ok &= p <= 0.05 + 3 * se
        lines.append(f"m={m} EER={p:.4f}+-{se:.4f}")
    report(5, ok, f"{method.value}: " + ", ".join(lines) + " (bound 0.05 + 3 SE)")


def test_criterion_6_least_favorable_configuration():
    mc = McSettings(reps=200_000, seed=600, workers=4)
    d = quantile_d(7, 11, REF_CFG, REF_MC)
    region = SingleRegion(7, 11, d)
    lfc, _ = empirical_rejection_prob(region, [0.0] * 11 + [1e6] * 4, mc)
    configs = {
        "11 zeros + 4 x 3": [0.0] * 11 + [3.0] * 4,
        "12 zeros + 2,5,8": [0.0] * 12 + [2.0, 5.0, 8.0],
        "13 zeros + 1.5, 6": [0.0] * 13 + [1.5, 6.0],
    }
    ok = True
    parts = []
    for i, (name, beta) in enumerate(configs.items()):
        p, se = empirical_rejection_prob(region, beta, McSettings(reps=200_000, seed=601 + i, workers=4))
        ok &= p <= lfc + 3 * se
        parts.append(f"{name}: {p:.4f}")
    report(6, ok, f"R_7,11 LFC rate {lfc:.4f}; " + "; ".join(parts))


def test_criterion_7_simulation_grid(ref_tables):
    tables = [ref_tables[Method.SUF], ref_tables[Method.SUS]]
    results = run_grid(CASE_IDS, DEFAULT_S_VALUES, tables, 10_000, seed=7, workers=4)
    assert len(results) == 60
    by_cell = {(r.case, r.s, r.method): r.metrics for r in results}
    eer_ok = all(r.metrics.eer <= 0.05 + 3 * r.metrics.eer_se for r in results)
    null_ok = all(r.metrics.pcsn == 1 - r.metrics.eer for r in results if r.s == 0)
    pccs_ok = all(r.metrics.pccs <= r.metrics.pcsn for r in results)
    power_ok = True
    worst = math.inf
    for cid in ("C1", "C2", "C5"):
        for s in DEFAULT_S_VALUES[1:]:
            sus, suf = by_cell[(cid, s, Method.SUS)], by_cell[(cid, s, Method.SUF)]
            margin = sus.power - suf.power + 3 * math.hypot(sus.power_se, suf.power_se)
            worst = min(worst, margin)
            power_ok &= margin >= 0
    over = [f"{r.case} s={r.s:g} {r.method.value} {r.metrics.eer:.4f}" for r in results if r.metrics.eer > 0.05 + 3 * r.metrics.eer_se]
    max_eer = max(r.metrics.eer for r in results)
    detail = f"cells above 0.05 + 3 SE: {', '.join(over)}" if over else "every cell within 0.05 + 3 SE"
    record(7, eer_ok, f"(a) max EER over 60 cells = {max_eer:.4f}; {detail}")
    record(7, null_ok, "(b) PCSN = 1 - EER at s = 0 in every cell")
    record(7, pccs_ok, "(c) PCCS <= PCSN in every cell")
    record(7, power_ok, f"(d) SUS power >= SUF power - 3 SE in C1, C2, C5 (smallest slack {worst:.4f})")
    assert eer_ok and null_ok and pccs_ok and power_ok


def test_criterion_8_cli_determinism(tmp_path):
    base = ["cutoffs", "--k", "15", "--nu", "7", "--method", "sus", "--reps", "200000", "--seed", "99"]
    outs = []
    for i, extra in enumerate([["--workers", "1"], ["--workers", "1"], ["--workers", "8", "--chunk", "4099"]]):
        path = tmp_path / f"c{i}.csv"
        assert main([*base, *extra, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    report(8, ok, "cutoffs.csv byte-identical across reruns and workers 1 vs 8")
    assert read_cutoffs(tmp_path / "c0.csv").reps == 200_000


def test_criterion_9_structural_invariants(ref_tables, filtration):
    finite = all(np.all(np.isfinite(t.values())) and np.all(t.values() > 1) for t in ref_tables.values())

    scale_ok = True
    rng = np.random.default_rng(9)
    datasets = [filtration] + [
        EffectEstimates(filtration.labels, tuple(rng.normal(size=15) + np.r_[np.zeros(10), rng.uniform(0, 6, 5)]))
        for _ in range(50)
    ]
    for est in datasets:
        for table in ref_tables.values():
            base = step_up(order_squares(est), table, est)
            for c in (1e-3, 1.0, 1e3):
                scaled = EffectEstimates(est.labels, tuple(c * v for v in est.values))
                got = step_up(order_squares(scaled), table, scaled)
                scale_ok &= (got.m0, got.active_labels) == (base.m0, base.active_labels)

    x = np.sort(rng.chisquare(1, size=(1000, 15)) * rng.uniform(0.5, 3, size=(1000, 1)), axis=1)
    x[:, 10:] *= rng.uniform(1, 50, size=(1000, 5))
    x = np.sort(x, axis=1)
    s = np.cumsum(x, axis=1)
    identity_ok = True
    for method in (Method.SUS, Method.SUSI):
        for i, d in ref_tables[method].d.items():
            w = (i - 1) * x[:, i - 1] / s[:, i - 2]
            q = (i - 1) * x[:, i - 1] / d - s[:, i - 2] + s[:, 6]
            identity_ok &= np.array_equal(w > d, s[:, 6] < q)

    nest_ok = True
    for method, table in ref_tables.items():
        w = w_matrix(x, 7, method.scaling is Scaling.FIXED)
        member = np.zeros(len(x), dtype=bool)
        for m in FILTRATION_M:
            grown = member | (w[m] > table.d[m])
            nest_ok &= bool(np.all(grown[member]))
            member = grown

    ok = finite and scale_ok and identity_ok and nest_ok
    report(
        9,
        ok,
        f"finite>1={finite}, scale invariance={scale_ok}, "
        f"threshold identity on 1000 datasets={identity_ok}, union nesting={nest_ok}",
    )
