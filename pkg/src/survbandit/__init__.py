"""Exact solvers and diagnostics for budget-constrained bandits with absorbing ruin."""
from .backend import NAME as BACKEND
from .model import (
    ActionModel,
    BudgetLattice,
    OutcomeSpace,
    ProblemError,
    Shaping,
    SurvivalProblem,
    build_budget_lattice,
    clipped_reward,
    expected_clipped_reward,
    load_problem,
    make_problem,
    one_step_survival,
    transition_distribution,
    validate_problem,
)
from .solver import (
    SolveTables,
    conditional_return,
    constant_policy,
    evaluate_policy,
    outcome_occupancy,
    solve,
)

__version__ = "0.1.0"
