"""Step-up simultaneous tests for active effects in orthogonal saturated designs."""
from .model import (
    CutoffTable,
    Decision,
    EffectEstimates,
    McSettings,
    Method,
    OrderedSquares,
    Scaling,
    Step,
    TestConfig,
    order_squares,
)
from .montecarlo import (
    CutoffBudgetError,
    SingleRegion,
    empirical_rejection_prob,
    quantile_d,
    sample_null,
    solve_cutoffs,
    solve_joint_cutoffs,
    solve_single_cutoffs,
    solve_sus_cutoffs,
    solve_suf_cutoffs,
)
from .procedures import single_test, step_down_comparator, step_up, w_statistic

__version__ = "0.1.0"

__all__ = [
    "CutoffBudgetError",
    "CutoffTable",
    "Decision",
    "EffectEstimates",
    "McSettings",
    "Method",
    "OrderedSquares",
    "Scaling",
    "SingleRegion",
    "Step",
    "TestConfig",
    "empirical_rejection_prob",
    "order_squares",
    "quantile_d",
    "sample_null",
    "single_test",
    "solve_cutoffs",
    "solve_joint_cutoffs",
    "solve_single_cutoffs",
    "solve_suf_cutoffs",
    "solve_sus_cutoffs",
    "step_down_comparator",
    "step_up",
    "w_statistic",
]
