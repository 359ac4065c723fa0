"""Principal/agent misalignment under limited liability and its mitigation.

The principal sees the same budget dynamics and stopping rule as the agent but
bears the full (unclipped) loss of the outcome that stops the agent.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .model import (
    OutcomeSpace,
    Shaping,
    SurvivalProblem,
    one_step_survival,
    problem_to_dict,
)
from .solver import SolveTables, evaluate_policy, outcome_occupancy, solve

GAP_TOL = 1e-9


def principal_value(problem: SurvivalProblem, policy) -> np.ndarray:
    """Principal value-to-go ``[t, b]`` of ``policy``, real units."""
    return evaluate_policy(problem, policy, principal=True).v_pi


@dataclass
class PrincipalReport:
    agent_value: float
    principal_value_under_agent_policy: float
    principal_optimal_value: float
    misalignment_gap: float
    divergence_cells: list[tuple[int, int]]
    agent_first_action: str = ""
    principal_first_action: str = ""

    def to_dict(self) -> dict[str, Any]:
        d = dict(self.__dict__)
        d["divergence_cells"] = [list(c) for c in self.divergence_cells]
        return d


def misalignment_report(problem: SurvivalProblem) -> PrincipalReport:
    """Compare the agent's optimal policy with the principal's on the same lattice.

    A cell diverges when the agent's choice is not optimal for the principal
    there (ties in the principal's q are not divergence). Only budgets
    reachable at each step from the initial budget are scanned.
    """
    agent = solve(problem)
    boss = solve(problem, principal=True)
    under_agent = evaluate_policy(problem, agent.policy, principal=True).v_pi
    b0 = problem.initial_budget
    cells = []
    for t in range(1, problem.horizon + 1):
        hi = agent.lattice.reachable_max(b0, t)
        q = boss.q[t, 1 : hi + 1]
        best = q.max(axis=1)
        got = q[np.arange(hi), agent.policy[t, 1 : hi + 1]]
        bad = got < best - GAP_TOL * np.maximum(1.0, np.abs(best))
        cells.extend((t, int(b) + 1) for b in np.flatnonzero(bad))
    labels = problem.action_labels
    return PrincipalReport(
        agent_value=float(agent.v[1, b0]),
        principal_value_under_agent_policy=float(under_agent[1, b0]),
        principal_optimal_value=float(boss.v[1, b0]),
        misalignment_gap=float(boss.v[1, b0] - under_agent[1, b0]),
        divergence_cells=cells,
        agent_first_action=labels[agent.policy[1, b0]] if b0 > 0 else "",
        principal_first_action=labels[boss.policy[1, b0]] if b0 > 0 else "",
    )


# ---------------------------------------------------------------------------
# reward shaping


@dataclass
class ShapingResult:
    feasible: bool
    boosted_outcomes: list[str]
    bonus: int  # granularity units
    shaped_problem: SurvivalProblem
    lifetime_occupancy: float | None = None
    cell_probability: float | None = None
    status: str = ""
    witness: dict[str, list[str]] = field(default_factory=dict)
    audit: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "feasible": self.feasible,
            "status": self.status,
            "boosted_outcomes": self.boosted_outcomes,
            "bonus_units": self.bonus,
            "bonus": self.bonus / self.shaped_problem.g,
            "lifetime_occupancy": self.lifetime_occupancy,
            "cell_probability": self.cell_probability,
            "witness": self.witness,
            "audit": self.audit,
            "shaped_problem": problem_to_dict(self.shaped_problem),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def shaped(problem: SurvivalProblem, outcomes, bonus: int, start: int, end: int) -> SurvivalProblem:
    return problem.replace(shaping=Shaping(tuple(outcomes), int(bonus), start, end))


def _avoid_stats(problem, y, t, budget):
    tables = solve(problem)
    inst, life = outcome_occupancy(problem, tables, y, start=(t, budget))
    return float(inst[t, budget]), life


def find_shaping(
    problem: SurvivalProblem,
    avoid_outcome: int | str,
    t: int,
    budget: int,
    *,
    persistent: bool = True,
) -> ShapingResult:
    """Smallest outcome bonus that keeps the agent from ever drawing ``avoid_outcome``.

    Feasible when some action's support is disjoint from the support of every
    action that can emit the avoided outcome; the bonus goes to that support.
    With ``persistent`` the bonus applies on steps ``t..T`` and the search
    target is a zero probability of ever drawing the outcome from
    ``(t, budget)``; otherwise it applies on step ``t`` only and the target is
    the cell itself. The bonus is bracketed by doubling, then bisected.
    """
    space = problem.outcome_space
    y = space.index(avoid_outcome) if isinstance(avoid_outcome, str) else int(avoid_outcome)
    if not 1 <= t <= problem.horizon:
        raise ValueError(f"step {t} outside 1..{problem.horizon}")
    if budget <= 0:
        raise ValueError("budget must be positive")
    labels = space.labels
    emitters = [a for a in problem.actions if y in a.outcomes]

    def passes(prob: SurvivalProblem) -> tuple[bool, float, float]:
        cell, life = _avoid_stats(prob, y, t, budget)
        return ((life if persistent else cell) == 0.0), cell, life

    if not emitters:
        ok, cell, life = passes(problem)
        return ShapingResult(True, [], 0, problem, life, cell, status="outcome cannot be emitted")

    emitted = frozenset().union(*(a.outcomes for a in emitters))
    candidates = [a for a in problem.actions if not (a.outcomes & emitted)]
    if not candidates:
        witness = {
            a.label: sorted(labels[i] for i in a.outcomes & emitted)
            for a in problem.actions
            if a not in emitters
        }
        witness.update({a.label: [labels[y]] for a in emitters})
        return ShapingResult(False, [], 0, problem, status="not guaranteed: no disjoint-support action",
                             witness=witness)

    cap = 2 * problem.horizon * problem.max_abs_reward
    end = problem.horizon if persistent else t
    audit: list[dict[str, Any]] = []
    best: tuple[int, Any, SurvivalProblem, float, float] | None = None
    for cand in candidates:
        boosted = tuple(sorted(cand.outcomes))

        def check(s: int):
            prob = shaped(problem, boosted, s, t, end) if s else problem
            ok, cell, life = passes(prob)
            audit.append({"action": cand.label, "bonus_units": s, "pass": ok,
                          "cell_probability": cell, "lifetime_occupancy": life})
            return ok, prob, cell, life

        ok, prob, cell, life = check(0)
        if ok:
            return ShapingResult(True, [], 0, problem, life, cell,
                                 status="already avoided", audit=audit)
        lo, hi = 0, 1
        found = None
        while True:
            res = check(hi)
            if res[0]:
                found = res
                break
            if hi >= cap:
                break
            lo, hi = hi, min(2 * hi, cap)
        if found is None:
            continue
        while hi - lo > 1:
            mid = (lo + hi) // 2
            res = check(mid)
            if res[0]:
                hi, found = mid, res
            else:
                lo = mid
        if best is None or hi < best[0]:
            best = (hi, boosted, found[1], found[2], found[3])
    if best is None:
        return ShapingResult(False, [], 0, problem,
                             status=f"anomaly: search cap of {cap} units exceeded", audit=audit)
    s, boosted, prob, cell, life = best
    return ShapingResult(True, [labels[i] for i in boosted], s, prob, life, cell,
                         status="shaped", audit=audit)


# ---------------------------------------------------------------------------
# limited liability makes penalties ineffective


def with_reward(problem: SurvivalProblem, outcome: int | str, reward_units: int) -> SurvivalProblem:
    space = problem.outcome_space
    y = space.index(outcome) if isinstance(outcome, str) else int(outcome)
    rewards = list(space.rewards)
    rewards[y] = int(reward_units)
    return problem.replace(outcome_space=OutcomeSpace(space.labels, tuple(rewards), space.granularity))


def fully_clipped_cells(
    problem: SurvivalProblem, tables: SolveTables, outcome: int | str
) -> list[tuple[int, int]]:
    """Cells whose chosen action can stop the agent, with every loss of that
    action clipped to the whole budget, and where ``outcome`` clips at every
    budget still reachable before T. Lowering that outcome's reward cannot
    change anything the agent computes at these cells."""
    space = problem.outcome_space
    y = space.index(outcome) if isinstance(outcome, str) else int(outcome)
    r = space.rewards
    gain = tables.lattice.step_gain
    cells = []
    for t in range(1, problem.horizon + 1):
        for b in range(1, tables.lattice.max_budget + 1):
            a = problem.actions[tables.policy[t, b]]
            losses = [r[i] for i in a.outcomes if r[i] < 0]
            if not losses or max(losses) > -b:
                continue
            if r[y] > -(b + (problem.horizon - t) * gain):
                continue
            cells.append((t, b))
    return cells


def horizon_extension_estimate(
    problem: SurvivalProblem,
    tables: SolveTables,
    budget: int,
    safe_action: int | str,
    risky_action: int | str,
) -> float:
    """Heuristic number of extra horizon steps before ``safe_action`` overtakes
    ``risky_action`` at ``budget``: ``v_1(budget)`` over their one-step survival
    gap at the smallest positive budget (proportionality constant 1)."""
    gap = one_step_survival(problem, safe_action, 1) - one_step_survival(problem, risky_action, 1)
    if gap <= 0:
        raise ValueError("the safe action must survive strictly more often at the smallest budget")
    return float(tables.v[1, budget]) / gap
