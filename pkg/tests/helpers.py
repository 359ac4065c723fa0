"""Independent oracles and instance generators shared by the tests.

The oracles walk outcome paths one by one with exact rational arithmetic,
applying the budget update and the stop-at-zero rule directly. They share no
code with the solver beyond reading the problem definition.
"""
from fractions import Fraction

import numpy as np

from survbandit.model import ActionModel, OutcomeSpace, SurvivalProblem


def _step_rewards(problem, t):
    """Rewards on step ``t`` including any shaping bonus."""
    r = list(problem.outcome_space.rewards)
    s = problem.shaping
    if s is not None and s.start <= t <= s.end:
        for i in s.outcomes:
            r[i] += s.bonus
    return r


def brute_force_value(problem: SurvivalProblem, budget: int | None = None, t: int = 1,
                      principal: bool = False) -> Fraction:
    """Best expected return over all history-dependent plans, by exhaustive expectimax
    over every action choice and outcome path (no state merging)."""
    b0 = problem.initial_budget if budget is None else budget
    g = problem.g
    T = problem.horizon

    def node(t, b):
        if t > T or b <= 0:
            return Fraction(0)
        r = _step_rewards(problem, t)
        best = None
        for a in problem.actions:
            total = Fraction(0)
            for i, p in a.support:
                gain = r[i] if r[i] > -b else -b
                step = r[i] if principal else gain
                total += Fraction(p) * (step + node(t + 1, b + gain))
            best = total if best is None or total > best else best
        return best

    return node(t, b0) / g


def enumerate_policy(problem: SurvivalProblem, choose, budget: int | None = None, t: int = 1,
                     principal: bool = False):
    """(expected return, survival probability) of ``choose(t, b) -> action index``,
    by walking every outcome path."""
    b0 = problem.initial_budget if budget is None else budget
    T = problem.horizon

    def node(t, b):
        if b <= 0:
            return Fraction(0), Fraction(0)
        if t > T:
            return Fraction(0), Fraction(1)
        r = _step_rewards(problem, t)
        a = problem.actions[choose(t, b)]
        ret = surv = Fraction(0)
        for i, p in a.support:
            gain = r[i] if r[i] > -b else -b
            step = r[i] if principal else gain
            v, s = node(t + 1, b + gain)
            ret += Fraction(p) * (step + v)
            surv += Fraction(p) * s
        return ret, surv

    v, s = node(t, b0)
    return v / problem.g, s


def random_instance(rng: np.random.Generator, n_actions=3, n_outcomes=4, horizon=4,
                    reward_range=(-6, 6), budget_range=(1, 8), granularity=1,
                    zero_prob=0.0) -> SurvivalProblem:
    """Random small problem; redrawn until some action has a non-negative mean."""
    while True:
        rewards = rng.integers(reward_range[0], reward_range[1] + 1, size=n_outcomes)
        space = OutcomeSpace(tuple(f"y{i}" for i in range(n_outcomes)),
                             tuple(int(r) for r in rewards), granularity)
        actions = []
        for a in range(n_actions):
            k = int(rng.integers(1, n_outcomes + 1))
            idx = np.sort(rng.choice(n_outcomes, size=k, replace=False))
            w = rng.exponential(size=k)
            if zero_prob and rng.random() < zero_prob:
                w = np.ones(k)
            p = w / w.sum()
            actions.append(ActionModel(f"a{a}", tuple((int(i), float(q)) for i, q in zip(idx, p))))
        means = [sum(q * rewards[i] for i, q in a.support) for a in actions]
        if max(means) >= 0:
            b0 = int(rng.integers(budget_range[0], budget_range[1] + 1))
            return SurvivalProblem(space, tuple(actions), b0, horizon)


def random_instances(seed: int, count: int, **kw):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        shape = {
            "n_actions": int(rng.integers(1, kw.get("max_actions", 3) + 1)),
            "n_outcomes": int(rng.integers(1, kw.get("max_outcomes", 4) + 1)),
            "horizon": int(rng.integers(1, kw.get("max_horizon", 4) + 1)),
        }
        extra = {k: v for k, v in kw.items() if k not in ("max_actions", "max_outcomes", "max_horizon")}
        out.append(random_instance(rng, **shape, **extra))
    return out

