from pathlib import Path

import pytest

from stepup import EffectEstimates, McSettings, Method, TestConfig, solve_cutoffs
from stepup.ingest import parse_estimates

DATA = Path(__file__).parent / "data"

# reference values for the filtration-rate example, k = 15, nu = 7, alpha = 0.05
FILTRATION_M = list(range(8, 16))
FILTRATION_X = [6.89, 9.77, 17.02, 97.52, 213.89, 276.39, 328.52, 467.64]
FILTRATION_S7 = 15.11
FILTRATION_W_FIXED = [3.2, 4.5, 7.9, 45.2, 99.1, 128.0, 152.2, 216.7]
FILTRATION_W_SEQ = [3.2, 3.6, 4.8, 20.0, 16.1, 9.2, 6.7, 6.8]
FILTRATION_CUTOFFS = {
    Method.SUFI: [14.9, 26.5, 38.4, 52.2, 67.7, 85.0, 104.5, 126.3],
    Method.SUF: [14.9, 28.0, 42.0, 58.5, 77.5, 99.1, 124.1, 123.4],
    Method.SUSI: [14.9, 16.4, 16.0, 15.5, 15.1, 14.6, 14.3, 14.0],
    Method.SUS: [14.9, 16.7, 16.3, 15.7, 15.2, 14.8, 14.5, 13.9],
}

REF_CFG = TestConfig(k=15, nu=7, alpha=0.05)
REF_MC = McSettings(reps=500_000, seed=20070101, workers=4)


@pytest.fixture(scope="session")
def filtration() -> EffectEstimates:
    return parse_estimates(DATA / "filtration_estimates.csv")


@pytest.fixture(scope="session")
def design_path() -> Path:
    return DATA / "filtration_design.csv"


@pytest.fixture(scope="session")
def ref_tables():
    """The four k=15, nu=7 step-up tables at half a million replicates."""
    return {m: solve_cutoffs(REF_CFG, m, REF_MC) for m in FILTRATION_CUTOFFS}


_acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
