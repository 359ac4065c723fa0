"""Monte-Carlo rollouts of the budget dynamics and a random problem generator.

Randomness comes from numpy's Philox-4x64 counter-based generator keyed by
the seed. Rollout ``i`` of a batch owns the counter block starting at
``i * ceil(T/4)``, i.e. uniforms ``i*Tp .. i*Tp + T - 1`` of the stream with
``Tp = 4*ceil(T/4)``. A single rollout can therefore be replayed without
generating the others, and batch results do not depend on batch layout.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ActionModel, OutcomeSpace, ProblemError, SurvivalProblem


@dataclass
class RolloutTrace:
    seed: int
    index: int
    initial_budget: int
    # (t, budget_before, action, outcome, clipped_reward, budget_after), units
    steps: list[tuple[int, int, int, int, int, int]] = field(default_factory=list)
    terminated_early: bool = False
    total_clipped_return: int = 0
    total_principal_return: int = 0

    @property
    def final_budget(self) -> int:
        return self.steps[-1][5] if self.steps else self.initial_budget


@dataclass
class RolloutStats:
    n: int
    mean_return: float
    std_error: float
    survival_rate: float
    mean_principal_return: float
    survival_std_error: float = 0.0


def _block(horizon: int) -> int:
    return 4 * -(-horizon // 4)


def _uniforms(seed: int, horizon: int, n: int, first: int = 0) -> np.ndarray:
    bg = np.random.Philox(key=seed)
    tp = _block(horizon)
    if first:
        bg.advance(first * tp // 4)
    return np.random.Generator(bg).random((n, tp))[:, :horizon]


def _policy_table(problem: SurvivalProblem, policy) -> np.ndarray:
    pol = np.asarray(getattr(policy, "policy", policy), dtype=np.int64)
    T = problem.horizon
    if pol.ndim != 2:
        raise ValueError("policy must be a 2-d table indexed [t, b]")
    if pol.shape[0] == T:
        pol = np.vstack([np.full((1, pol.shape[1]), -1), pol])
    elif pol.shape[0] not in (T + 1, T + 2):
        raise ValueError(f"policy has {pol.shape[0]} rows for horizon {T}")
    return pol


def _cumulative(problem: SurvivalProblem):
    """Per-action outcome indices and cumulative probabilities (last entry forced to 1)."""
    ptr, out, prob = problem.csr
    table = []
    for a in range(problem.n_actions):
        lo, hi = ptr[a], ptr[a + 1]
        cum = np.cumsum(prob[lo:hi])
        cum[-1] = 1.0
        table.append((out[lo:hi], cum))
    return table


def _lookup(pol: np.ndarray, t: int, budgets: np.ndarray, n_actions: int) -> np.ndarray:
    if budgets.size and budgets.max() >= pol.shape[1]:
        b = int(budgets.max())
        raise ValueError(f"policy undefined at t={t}, b={b}: budget beyond the table")
    acts = pol[t, budgets]
    bad = (acts < 0) | (acts >= n_actions)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise ValueError(f"policy undefined at t={t}, b={int(budgets[j])}")
    return acts


def _simulate(problem: SurvivalProblem, pol: np.ndarray, u: np.ndarray, record: bool = False):
    """Vectorised rollouts; one row of ``u`` per rollout."""
    n = u.shape[0]
    rewards = problem.reward_table()
    cum = _cumulative(problem)
    budget = np.full(n, problem.initial_budget, dtype=np.int64)
    principal = np.zeros(n, dtype=np.int64)
    steps = []
    for t in range(1, problem.horizon + 1):
        live = np.flatnonzero(budget > 0)
        if live.size == 0:
            break
        acts = _lookup(pol, t, budget[live], problem.n_actions)
        ys = np.empty(live.size, dtype=np.int64)
        for a in np.unique(acts):
            m = acts == a
            outs, c = cum[a]
            ys[m] = outs[np.searchsorted(c, u[live[m], t - 1], side="right")]
        before = budget[live]
        raw = rewards[t - 1, ys]
        clipped = np.maximum(raw, -before)
        budget[live] = before + clipped
        principal[live] += raw
        if record:
            steps.append((t, before, acts, ys, clipped, budget[live].copy()))
    return budget, principal, steps


def rollout(problem: SurvivalProblem, policy, seed: int, index: int = 0) -> RolloutTrace:
    """Single trajectory; identical ``(seed, index)`` give identical traces."""
    pol = _policy_table(problem, policy)
    u = _uniforms(seed, problem.horizon, 1, first=index)
    final, principal, steps = _simulate(problem, pol, u, record=True)
    trace = RolloutTrace(seed, index, problem.initial_budget)
    for t, before, acts, ys, cl, after in steps:
        trace.steps.append((t, int(before[0]), int(acts[0]), int(ys[0]), int(cl[0]), int(after[0])))
    trace.total_clipped_return = int(final[0]) - problem.initial_budget
    trace.total_principal_return = int(principal[0])
    trace.terminated_early = any(s[5] == 0 and s[0] < problem.horizon for s in trace.steps)
    return trace


def _mean_and_se(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    mean = math.fsum(x) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def estimate(problem: SurvivalProblem, policy, n: int, seed: int, chunk: int = 65536) -> RolloutStats:
    """Aggregate rollouts ``0..n-1`` of ``seed``; returns are in real units."""
    if n < 1:
        raise ValueError("n must be at least 1")
    pol = _policy_table(problem, policy)
    finals, princ = [], []
    for first in range(0, n, chunk):
        m = min(chunk, n - first)
        f, p, _ = _simulate(problem, pol, _uniforms(seed, problem.horizon, m, first=first))
        finals.append(f)
        princ.append(p)
    final = np.concatenate(finals)
    g = problem.g
    ret = (final - problem.initial_budget) / g
    mean, se = _mean_and_se(ret)
    alive = (final > 0).astype(float)
    rate, rate_se = _mean_and_se(alive)
    return RolloutStats(
        n=n,
        mean_return=mean,
        std_error=se,
        survival_rate=rate,
        mean_principal_return=math.fsum(np.concatenate(princ) / g) / n,
        survival_std_error=rate_se,
    )


def random_problem(
    n_actions: int,
    n_outcomes: int,
    support_size: int,
    reward_span: int,
    seed: int,
    *,
    initial_budget: int = 10,
    horizon: int = 10,
    max_tries: int = 1000,
) -> SurvivalProblem:
    """Outcomes ``-span..span`` with reward equal to the outcome's value; each
    action puts a uniform simplex draw on ``support_size`` distinct outcomes.

    Draws where every action has negative mean are rejected and redrawn from
    the same stream, since such a problem has no admissible solution here.
    """
    if n_actions < 1 or support_size < 1 or reward_span < 0:
        raise ProblemError("sizes must be positive")
    if n_outcomes != 2 * reward_span + 1:
        raise ProblemError(f"{n_outcomes} outcomes do not cover -{reward_span}..{reward_span}")
    if support_size > n_outcomes:
        raise ProblemError("support larger than the outcome set")
    rewards = np.arange(-reward_span, reward_span + 1)
    space = OutcomeSpace(tuple(str(r) for r in rewards), tuple(int(r) for r in rewards), 1)
    rng = np.random.Generator(np.random.Philox(key=seed))
    for _ in range(max_tries):
        actions = []
        for a in range(n_actions):
            idx = np.sort(rng.choice(n_outcomes, size=support_size, replace=False))
            e = rng.exponential(size=support_size)
            p = e / e.sum()
            actions.append(ActionModel(f"a{a}", tuple((int(i), float(q)) for i, q in zip(idx, p))))
        if max(float(np.dot([q for _, q in a.support], rewards[[i for i, _ in a.support]]))
               for a in actions) >= 0:
            return SurvivalProblem(space, tuple(actions), initial_budget, horizon)
    raise ProblemError("could not draw a problem with a non-negative-mean action")


def export_trace_csv(problem: SurvivalProblem, trace: RolloutTrace, path: str | Path) -> None:
    g = problem.g
    fmt = "{:.12g}".format
    labels = problem.outcome_space.labels
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "t", "budget_before", "action", "outcome", "clipped_reward", "budget_after"])
        for i, (t, before, a, y, cl, after) in enumerate(trace.steps):
            wr.writerow([i, t, fmt(before / g), problem.action_labels[a], labels[y],
                         fmt(cl / g), fmt(after / g)])


def export_stats_csv(stats: RolloutStats, path: str | Path) -> None:
    fmt = "{:.12g}".format
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n", "mean_return", "std_error", "survival_rate", "mean_principal_return"])
        wr.writerow([stats.n, fmt(stats.mean_return), fmt(stats.std_error),
                     fmt(stats.survival_rate), fmt(stats.mean_principal_return)])
