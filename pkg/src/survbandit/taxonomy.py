"""Behaviour classification of optimal policies and sufficient-condition checkers.

Each checker evaluates a sufficient condition for a behaviour (survival
preference, risk seeking) and, where it holds, confirms the solved policy
actually shows that behaviour. A failed premise is reported as such and never
evaluated vacuously.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .model import (
    SurvivalProblem,
    desired_probability,
    optimistic_reward,
)
from .solver import SolveTables

ARGMAX_TOL = 1e-12

EVALUATED = "evaluated"
PREMISE_UNMET = "premise unmet"
NOT_EVALUABLE = "not evaluable"


def _argmax_set(values, tol: float = ARGMAX_TOL) -> list[int]:
    values = np.asarray(values, dtype=float)
    best = values.max()
    return [int(i) for i in np.flatnonzero(values >= best - tol * max(1.0, abs(best)))]


def expected_rewards(problem: SurvivalProblem) -> np.ndarray:
    return np.array([problem.expected_reward(a) for a in range(problem.n_actions)])


def optimistic_rewards(problem: SurvivalProblem) -> np.ndarray:
    return np.array([optimistic_reward(problem, a) for a in range(problem.n_actions)])


def risk_neutral_set(problem: SurvivalProblem) -> list[int]:
    return _argmax_set(expected_rewards(problem))


def risk_neutral_action(problem: SurvivalProblem) -> int:
    """Maximiser of the plain expected reward; ties go to the lowest index."""
    return risk_neutral_set(problem)[0]


def optimistic_set(problem: SurvivalProblem) -> list[int]:
    return _argmax_set(optimistic_rewards(problem))


def optimistic_action(problem: SurvivalProblem) -> int:
    return optimistic_set(problem)[0]


# ---------------------------------------------------------------------------
# vectorised per-step quantities over budgets 1..hi


def _step_terms(problem: SurvivalProblem, tables: SolveTables, t: int, hi: int):
    """Per action over budgets ``1..hi``: clipped mean (real units), one-step
    survival, survival through T, survival-weighted return (tabled policy after
    step ``t``) and one-step stopping probability."""
    ptr, out, prob = problem.csr
    r = problem.reward_table()[t - 1]
    b = np.arange(1, hi + 1, dtype=np.int64)
    n = problem.n_actions
    mean = np.zeros((n, hi))
    p1 = np.zeros((n, hi))
    plong = np.zeros((n, hi))
    wret = np.zeros((n, hi))
    die = np.zeros((n, hi))
    g = problem.g
    for a in range(n):
        for k in range(ptr[a], ptr[a + 1]):
            p = prob[k]
            cl = np.maximum(-b, r[out[k]])
            nb = b + cl
            alive = nb > 0
            nbc = np.where(alive, nb, 0)
            mean[a] += p * cl
            p1[a] += np.where(alive, p, 0.0)
            die[a] += np.where(alive, 0.0, p)
            s = tables.surv[t + 1, nbc]
            plong[a] += np.where(alive, p * s, 0.0)
            wret[a] += np.where(alive, p * (cl / g * s + tables.wret[t + 1, nbc]), 0.0)
    return mean / g, p1, plong, wret, die


def _member(chosen: np.ndarray, values: np.ndarray, tol: float = ARGMAX_TOL) -> np.ndarray:
    """``values[chosen[j], j]`` is within tolerance of the column maximum."""
    best = values.max(axis=0)
    got = values[chosen, np.arange(values.shape[1])]
    return got >= best - tol * np.maximum(1.0, np.abs(best))


# ---------------------------------------------------------------------------
# behaviour grid


@dataclass(frozen=True, eq=False)
class BehaviorReport:
    """Flags indexed ``[t, b]`` over ``t in 1..T`` and lattice budgets (row 0 unused)."""

    problem: SurvivalProblem
    chosen: np.ndarray
    risk_neutral: np.ndarray
    short_term_survival: np.ndarray
    long_term_survival: np.ndarray
    risk_seeking: np.ndarray
    tie: np.ndarray

    def cell(self, t: int, b: int) -> dict[str, Any]:
        return {
            "action": self.problem.action_labels[self.chosen[t, b]],
            "risk_neutral": bool(self.risk_neutral[t, b]),
            "short_term_survival": bool(self.short_term_survival[t, b]),
            "long_term_survival": bool(self.long_term_survival[t, b]),
            "risk_seeking": bool(self.risk_seeking[t, b]),
            "tie": bool(self.tie[t, b]),
        }


def classify_behavior(problem: SurvivalProblem, tables: SolveTables) -> BehaviorReport:
    T = problem.horizon
    M = tables.lattice.max_budget
    shape = (T + 1, M + 1)
    chosen = np.zeros(shape, dtype=np.int64)
    flags = {k: np.zeros(shape, dtype=bool) for k in ("rn", "st", "lt", "rs")}
    rn = set(risk_neutral_set(problem))
    rs = set(optimistic_set(problem))
    for t in range(1, T + 1):
        pol = tables.policy[t, 1 : M + 1]
        chosen[t, 1:] = pol
        _, p1, plong, _, _ = _step_terms(problem, tables, t, M)
        flags["rn"][t, 1:] = np.isin(pol, list(rn))
        flags["rs"][t, 1:] = np.isin(pol, list(rs))
        flags["st"][t, 1:] = _member(pol, p1)
        flags["lt"][t, 1:] = _member(pol, plong)
    tie = np.zeros(shape, dtype=bool)
    tie[1:] = tables.tie[1 : T + 1, : M + 1]
    return BehaviorReport(problem, chosen, flags["rn"], flags["st"], flags["lt"], flags["rs"], tie)


def export_behavior_csv(report: BehaviorReport, path: str | Path) -> None:
    labels = report.problem.action_labels
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "budget_units", "action_label", "risk_neutral", "short_surv",
                     "long_surv", "risk_seeking", "tie"])
        T, width = report.chosen.shape
        for t in range(1, T):
            for b in range(1, width):
                wr.writerow([t, b, labels[report.chosen[t, b]],
                             int(report.risk_neutral[t, b]), int(report.short_term_survival[t, b]),
                             int(report.long_term_survival[t, b]), int(report.risk_seeking[t, b]),
                             int(report.tie[t, b])])


# ---------------------------------------------------------------------------
# risk-neutral budget threshold


def lemma1_threshold(problem: SurvivalProblem, t: int) -> int:
    """Budget (units) from which the risk-neutral action is optimal at step ``t``.

    Above ``(T-t)*max|R| + |min R|`` no outcome can clip or stop the agent on
    any remaining step, so every future value is budget-independent and the
    choice reduces to the plain expected reward.
    """
    T = problem.horizon
    if not 1 <= t <= T:
        raise ValueError(f"step {t} outside 1..{T}")
    loss = max(0, -problem.min_reward)
    return (T - t) * problem.max_abs_reward + loss


# ---------------------------------------------------------------------------
# sufficient-condition checkers


@dataclass
class ConditionReport:
    condition_name: str
    t: int
    status: str
    inputs: dict[str, Any] = field(default_factory=dict)
    threshold: float | None = None
    holds: bool = False
    guaranteed_behavior_verified: bool | None = None
    covered_cells: list[int] = field(default_factory=list)
    failed_cells: list[int] = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        for k, v in d["inputs"].items():
            if isinstance(v, float) and math.isinf(v):
                d["inputs"][k] = "inf"
        return d


def _check_shaping(problem: SurvivalProblem):
    if problem.shaping is not None:
        raise ValueError("condition checkers expect an unshaped problem")


def _value_bounds(tables: SolveTables, t: int, b_hi: int) -> tuple[float, float]:
    """Max and min of ``v_{t+1}`` over positive budgets any covered cell can reach."""
    hi = max(tables.lattice.max_budget, b_hi + tables.lattice.step_gain)
    row = tables.v[t + 1, 1 : hi + 1]
    return float(row.max()), float(row.min())


def _dominant(values: np.ndarray) -> int | None:
    """First action whose row dominates every other row at every budget."""
    best = values.max(axis=0)
    for a in range(values.shape[0]):
        if np.all(values[a] >= best - ARGMAX_TOL):
            return a
    return None


def _optimal_q(tables: SolveTables, t: int, b: int, a: int) -> bool:
    """``a`` attains the optimal q at the cell (within the solver tie tolerance)."""
    q = tables.q[t, b]
    best = q.max()
    return bool(q[a] >= best - ARGMAX_TOL * max(1.0, abs(best)))


def check_short_term_aversion(
    problem: SurvivalProblem, tables: SolveTables, t: int, b_hat: int
) -> ConditionReport:
    _check_shaping(problem)
    name = "short_term_risk_aversion"
    M = tables.lattice.max_budget
    if not 1 <= b_hat <= M:
        raise ValueError("b_hat must be a positive lattice budget")
    mean, p1, _, _, die = _step_terms(problem, tables, t, max(M, b_hat))
    a_hat = _dominant(p1[:, :M])
    if a_hat is None:
        return ConditionReport(name, t, PREMISE_UNMET,
                               note="no action maximises one-step survival at every budget")
    others = [a for a in range(problem.n_actions) if a != a_hat]
    cols = slice(0, b_hat)
    inputs: dict[str, Any] = {"a_hat": problem.action_labels[a_hat], "b_hat": b_hat}
    if not others:
        return ConditionReport(name, t, PREMISE_UNMET, inputs, note="single action")
    # gaps from stopping masses avoid the rounding in 1 - P(stop)
    beta_hat = float(np.min(die[others, cols] - die[a_hat, cols]))
    eps_hat = float(np.max(mean[others, cols] - mean[a_hat, cols]))
    eps_stated = float(np.max(mean[a_hat, cols] - mean[others, cols]))
    v_hi, v_lo = _value_bounds(tables, t, b_hat)
    inputs.update(beta_hat=beta_hat, eps_hat=eps_hat, eps_hat_a_hat_minus_a=eps_stated,
                  v_upper=v_hi, v_lower=v_lo)
    if beta_hat <= 0:
        return ConditionReport(name, t, PREMISE_UNMET, inputs,
                               note="survival gap is not positive")
    if v_hi <= 0:
        return ConditionReport(name, t, NOT_EVALUABLE, inputs,
                               note="upper value bound is not positive")
    threshold = (eps_hat + v_hi - v_lo) / v_hi
    holds = beta_hat >= threshold
    rep = ConditionReport(name, t, EVALUATED, inputs, threshold, holds)
    if holds:
        pol = tables.policy[t, 1 : b_hat + 1]
        ok = _member(pol, p1[:, cols])
        for j in np.flatnonzero(~ok):
            if _optimal_q(tables, t, j + 1, a_hat):
                ok[j] = True
        rep.covered_cells = list(range(1, b_hat + 1))
        rep.failed_cells = [int(j) + 1 for j in np.flatnonzero(~ok)]
        rep.guaranteed_behavior_verified = not rep.failed_cells
    return rep


def check_long_term_aversion(
    problem: SurvivalProblem, tables: SolveTables, t: int, b_hat: int
) -> ConditionReport:
    """Long-horizon survival condition, evaluated per budget ``1..b_hat``.

    The gap compared against ``b * beta_hat`` is the largest advantage of any
    other action over the survival-dominant one in survival-weighted return;
    the variant measured from the optimistic action is reported alongside.
    """
    _check_shaping(problem)
    name = "long_term_risk_aversion"
    M = tables.lattice.max_budget
    if not 1 <= b_hat <= M:
        raise ValueError("b_hat must be a positive lattice budget")
    _, _, plong, wret, _ = _step_terms(problem, tables, t, max(M, b_hat))
    a_hat = _dominant(plong[:, :M])
    if a_hat is None:
        return ConditionReport(name, t, PREMISE_UNMET,
                               note="no action maximises survival through T at every budget")
    others = [a for a in range(problem.n_actions) if a != a_hat]
    inputs: dict[str, Any] = {"a_hat": problem.action_labels[a_hat], "b_hat": b_hat}
    if not others:
        return ConditionReport(name, t, PREMISE_UNMET, inputs, note="single action")
    cols = slice(0, b_hat)
    a_bar = optimistic_action(problem)
    beta_hat = float(np.min(plong[a_hat, cols] - plong[others, cols]))
    eps_hat = float(np.max(wret[others, cols] - wret[a_hat, cols]))
    eps_opt = float(np.max(wret[a_bar, cols] - wret[:, cols]))
    inputs.update(beta_hat=beta_hat, eps_hat=eps_hat, eps_hat_optimistic=eps_opt,
                  a_bar=problem.action_labels[a_bar])
    if beta_hat <= 0:
        return ConditionReport(name, t, PREMISE_UNMET, inputs,
                               note="survival gap is not positive")
    g = problem.g
    budgets = np.arange(1, b_hat + 1)
    holding = budgets[beta_hat * budgets / g >= eps_hat]
    rep = ConditionReport(name, t, EVALUATED, inputs,
                          threshold=eps_hat / beta_hat * g, holds=bool(holding.size))
    rep.note = "threshold is the smallest budget (units) at which the condition holds"
    if holding.size:
        pol = tables.policy[t, holding]
        ok = _member(pol, plong[:, holding - 1])
        for j in np.flatnonzero(~ok):
            if _optimal_q(tables, t, int(holding[j]), a_hat):
                ok[j] = True
        rep.covered_cells = [int(b) for b in holding]
        rep.failed_cells = [int(b) for b in holding[~ok]]
        rep.guaranteed_behavior_verified = not rep.failed_cells
    return rep


def seeking_budget_cap(problem: SurvivalProblem) -> float:
    """Largest budget (units) at which every action's one-step survival equals
    its probability of a desired outcome: the smallest loss magnitude in any
    support, infinite when no action can lose."""
    r = problem.outcome_space.rewards
    losses = [-r[i] for a in problem.actions for i, _ in a.support if r[i] < 0]
    return float(min(losses)) if losses else math.inf


def check_risk_seeking(
    problem: SurvivalProblem, tables: SolveTables, t: int, budget: int
) -> ConditionReport:
    _check_shaping(problem)
    name = "risk_seeking"
    c = seeking_budget_cap(problem)
    inputs: dict[str, Any] = {"c": c, "budget": budget}
    if budget <= 0 or budget > c:
        return ConditionReport(name, t, PREMISE_UNMET, inputs,
                               note="budget outside (0, c]")
    a_bar = optimistic_action(problem)
    r_hat = optimistic_rewards(problem)
    v_hi, v_lo = _value_bounds(tables, t, budget)
    g = problem.g
    b_real = budget / g
    p_bar = desired_probability(problem, a_bar)
    margins = {}
    for a in range(problem.n_actions):
        if a == a_bar:
            continue
        rhs = v_hi * desired_probability(problem, a) - v_lo * p_bar + b_real
        margins[problem.action_labels[a]] = float(r_hat[a_bar] - r_hat[a] - rhs)
    inputs.update(a_bar=problem.action_labels[a_bar], v_upper=v_hi, v_lower=v_lo,
                  margins=margins)
    holds = all(m >= 0 for m in margins.values())
    rep = ConditionReport(name, t, EVALUATED, inputs, threshold=0.0, holds=holds,
                          note="threshold applies to the smallest margin")
    if holds:
        chosen = int(tables.policy[t, budget])
        ok = chosen in optimistic_set(problem) or _optimal_q(tables, t, budget, a_bar)
        rep.covered_cells = [budget]
        rep.failed_cells = [] if ok else [budget]
        rep.guaranteed_behavior_verified = ok
    return rep
