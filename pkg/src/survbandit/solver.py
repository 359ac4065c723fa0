"""Exact finite-horizon backward induction over the budget lattice.

Tables are indexed ``[t, b]`` with ``t`` in ``1..T+1`` and ``b`` in budget
units. Row ``T+1`` is the all-zero boundary. The arrays are wider than the
lattice (``width >= max_budget``) so that every lattice cell is computed
exactly; cells whose successors would leave the array are NaN.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backend
from .model import (
    PROB_TOL,
    BudgetLattice,
    SurvivalProblem,
    build_budget_lattice,
    clipped_reward,
    one_step_survival,
)

TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SolveTables:
    problem: SurvivalProblem
    lattice: BudgetLattice
    v: np.ndarray        # [t, b] optimal value-to-go, real units
    q: np.ndarray        # [t, b, a]
    policy: np.ndarray   # [t, b] action index, -1 where undefined
    surv: np.ndarray     # [t, b] survival probability through step T under policy
    wret: np.ndarray     # [t, b] E[return-to-go * 1{survive}], real units
    tie: np.ndarray      # [t, b] more than one action within tie tolerance
    principal: bool = False

    @property
    def horizon(self) -> int:
        return self.problem.horizon

    @property
    def width(self) -> int:
        return self.v.shape[1] - 1

    def exact_limit(self, t: int) -> int:
        """Largest budget whose row-``t`` entries are exact."""
        return self.width - (self.horizon - t + 1) * self.lattice.step_gain

    def first_action(self, budget: int) -> int:
        return int(self.policy[1, budget])


@dataclass(frozen=True, eq=False)
class PolicyEvalTables:
    problem: SurvivalProblem
    lattice: BudgetLattice
    policy: np.ndarray
    v_pi: np.ndarray
    surv_pi: np.ndarray
    wret_pi: np.ndarray
    principal: bool = False


def _width(problem: SurvivalProblem, lattice: BudgetLattice) -> int:
    return lattice.max_budget + problem.horizon * lattice.step_gain


def solve(problem: SurvivalProblem, *, principal: bool = False, kernels=None) -> SolveTables:
    """Optimal tables by backward induction.

    With ``principal=True`` the per-step reward is the unclipped reward while
    the budget is positive (the principal's liability); the budget dynamics and
    stopping rule are unchanged.

    Ties in ``q`` (within ``TIE_TOL`` relative) go to the action with the
    higher one-step survival, then to the lowest index.
    """
    k = kernels or backend.kernels
    lattice = build_budget_lattice(problem)
    ptr, out, prob = problem.csr
    res = k.backward_optimal(
        np.ascontiguousarray(problem.reward_table()),
        ptr, out, prob,
        _width(problem, lattice), lattice.step_gain,
        principal, TIE_TOL, PROB_TOL,
    )
    g = float(problem.g)
    return SolveTables(
        problem=problem,
        lattice=lattice,
        v=res["v"] / g,
        q=res["q"] / g,
        policy=res["policy"],
        surv=res["surv"],
        wret=res["wret"] / g,
        tie=res["tie"],
        principal=principal,
    )


def constant_policy(problem: SurvivalProblem, action: int | str) -> np.ndarray:
    """Policy table that plays ``action`` in every cell."""
    lattice = build_budget_lattice(problem)
    a = problem.action_index(action)
    return np.full((problem.horizon + 2, _width(problem, lattice) + 1), a, dtype=np.int64)


def _full_policy(problem: SurvivalProblem, policy, width: int) -> np.ndarray:
    pol = np.asarray(policy, dtype=np.int64)
    T = problem.horizon
    if pol.ndim != 2:
        raise ValueError("policy must be a 2-d table indexed [t, b]")
    if pol.shape[0] == T:  # rows 1..T without padding rows
        pol = np.vstack([np.zeros((1, pol.shape[1]), np.int64), pol, np.zeros((1, pol.shape[1]), np.int64)])
    elif pol.shape[0] == T + 1:
        pol = np.vstack([pol, np.zeros((1, pol.shape[1]), np.int64)])
    elif pol.shape[0] != T + 2:
        raise ValueError(f"policy has {pol.shape[0]} rows for horizon {T}")
    if pol.shape[1] < width + 1:
        # cells above the supplied range repeat the last column
        pol = np.pad(pol, ((0, 0), (0, width + 1 - pol.shape[1])), mode="edge")
    return np.ascontiguousarray(pol[:, : width + 1])


def evaluate_policy(
    problem: SurvivalProblem, policy, *, principal: bool = False, kernels=None
) -> PolicyEvalTables:
    k = kernels or backend.kernels
    lattice = build_budget_lattice(problem)
    width = _width(problem, lattice)
    pol = _full_policy(problem, policy, width)
    ptr, out, prob = problem.csr
    res = k.backward_evaluate(
        np.ascontiguousarray(problem.reward_table()),
        ptr, out, prob, width, lattice.step_gain, principal, pol,
    )
    g = float(problem.g)
    return PolicyEvalTables(
        problem, lattice, pol, res["v"] / g, res["surv"], res["wret"] / g, principal
    )


def _check_cell(problem: SurvivalProblem, t: int, budget: int) -> None:
    if budget <= 0:
        raise ValueError("budget 0 is absorbing")
    if not 1 <= t <= problem.horizon:
        raise ValueError(f"step {t} outside 1..{problem.horizon}")


def _successors(problem: SurvivalProblem, t: int, budget: int, action: int):
    """(prob, clipped reward units, next budget) per support outcome, in kernel order."""
    ptr, out, prob = problem.csr
    r = problem.reward_table()[t - 1]
    for k in range(ptr[action], ptr[action + 1]):
        cl = clipped_reward(int(r[out[k]]), budget)
        yield float(prob[k]), cl, budget + cl


def action_prefixed_survival(
    problem: SurvivalProblem, tables: SolveTables, t: int, budget: int, action: int | str
) -> float:
    """Probability of surviving through step T after playing ``action`` at ``(t, budget)``
    and following the tabled policy afterwards."""
    _check_cell(problem, t, budget)
    a = problem.action_index(action)
    total = 0.0
    for p, _, nb in _successors(problem, t, budget, a):
        if nb > 0:
            total += p * tables.surv[t + 1, nb]
    return total


def conditional_return(
    problem: SurvivalProblem, tables: SolveTables, t: int, budget: int, action: int | str
) -> tuple[float, float]:
    """Expected return-to-go conditioned on surviving through step T, and that
    survival probability, for ``action`` at ``(t, budget)`` then the tabled policy."""
    _check_cell(problem, t, budget)
    a = problem.action_index(action)
    g = problem.g
    p_surv = 0.0
    weighted = 0.0
    for p, cl, nb in _successors(problem, t, budget, a):
        if nb > 0:
            s = tables.surv[t + 1, nb]
            p_surv += p * s
            weighted += p * (cl / g * s + tables.wret[t + 1, nb])
    if p_surv <= 0.0:
        raise ZeroDivisionError(
            f"survival probability is 0 at t={t}, b={budget}, action={problem.action_labels[a]}"
        )
    return weighted / p_surv, p_surv


def horizon_value_gap(
    problem: SurvivalProblem, tables: SolveTables, t: int, budget: int, action: int | str
) -> tuple[float, float]:
    """Growth of ``q`` when one more step remains: ``q_t - q_{t+1}`` at ``(budget, action)``.

    Returns ``(gap, lower_bound)`` with ``lower_bound = dv * P1(action, budget)``,
    ``dv`` being the smallest ``v_{t+1} - v_{t+2}`` over positive budgets.
    """
    T = problem.horizon
    if not 1 <= t <= T - 1:
        raise ValueError("the horizon gap needs 1 <= t <= T-1")
    if budget <= 0:
        raise ValueError("budget 0 is absorbing")
    a = problem.action_index(action)
    gap = 0.0
    for p, _, nb in _successors(problem, t, budget, a):
        if nb > 0:
            gap += p * (tables.v[t + 1, nb] - tables.v[t + 2, nb])
    hi = max(tables.lattice.max_budget, budget + tables.lattice.step_gain)
    dv = float(np.min(tables.v[t + 1, 1 : hi + 1] - tables.v[t + 2, 1 : hi + 1]))
    return gap, dv * one_step_survival(problem, a, budget)


def outcome_occupancy(
    problem: SurvivalProblem,
    tables: SolveTables,
    outcome: int | str,
    start: tuple[int, int] | None = None,
) -> tuple[np.ndarray, float]:
    """Per-cell probability of drawing ``outcome`` and the probability of ever
    drawing it from ``start = (t, budget)`` (default ``(1, initial_budget)``)."""
    space = problem.outcome_space
    y = space.index(outcome) if isinstance(outcome, str) else int(outcome)
    if not 0 <= y < len(space):
        raise ValueError(f"unknown outcome index {y}")
    T = problem.horizon
    M = tables.lattice.max_budget
    pa = np.array([a.prob(y) for a in problem.actions])
    inst = np.zeros((T + 2, M + 1))
    for t in range(1, T + 1):
        inst[t, 1:] = pa[tables.policy[t, 1 : M + 1]]

    t0, b0 = start if start is not None else (1, problem.initial_budget)
    _check_cell(problem, t0, b0)
    ptr, out, prob = problem.csr
    rewards = problem.reward_table()
    width = tables.width
    mass = np.zeros(width + 1)
    mass[b0] = 1.0
    hit = 0.0
    for t in range(t0, T + 1):
        live = np.flatnonzero(mass[1:]) + 1
        if live.size == 0:
            break
        acts = tables.policy[t, live]
        hit += math.fsum(mass[live] * pa[acts])
        new = np.zeros(width + 1)
        for a in np.unique(acts):
            bs = live[acts == a]
            m = mass[bs]
            for k in range(ptr[a], ptr[a + 1]):
                if out[k] == y:
                    continue
                nb = bs + np.maximum(-bs, rewards[t - 1, out[k]])
                keep = nb > 0
                np.add.at(new, nb[keep], m[keep] * prob[k])
        mass = new
    return inst, hit


def export_tables_csv(tables: SolveTables, path: str | Path, digits: int = 12) -> None:
    """Write ``t, budget_units, budget_real, action_label, v, surv, q_<a>...`` rows."""
    problem = tables.problem
    labels = problem.action_labels
    g = problem.g
    M = tables.lattice.max_budget
    fmt = f"{{:.{digits}g}}".format
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "budget_units", "budget_real", "action_label", "v", "surv"]
                    + [f"q_{a}" for a in labels])
        for t in range(1, problem.horizon + 1):
            for b in range(M + 1):
                wr.writerow(
                    [t, b, fmt(b / g), labels[tables.policy[t, b]], fmt(tables.v[t, b]),
                     fmt(tables.surv[t, b])]
                    + [fmt(x) for x in tables.q[t, b]]
                )
