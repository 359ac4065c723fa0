"""Survival decision problems: outcomes, actions, budgets and one-step quantities.

Rewards and budgets are integers in units of ``1/granularity``; probabilities
are floats. Every real-valued quantity returned here is converted back to
real units by dividing by the granularity once, at the end.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

PROB_TOL = 1e-12
REWARD_TOL = 1e-9


class ProblemError(ValueError):
    """Raised for malformed or inconsistent problem descriptions."""


@dataclass(frozen=True)
class OutcomeSpace:
    labels: tuple[str, ...]
    rewards: tuple[int, ...]  # granularity units
    granularity: int = 1

    def __post_init__(self):
        if not self.labels:
            raise ProblemError("outcome space is empty")
        if len(set(self.labels)) != len(self.labels):
            raise ProblemError("outcome labels must be unique")
        if len(self.labels) != len(self.rewards):
            raise ProblemError("one reward per outcome is required")
        if self.granularity < 1:
            raise ProblemError("granularity must be a positive integer")

    def __len__(self):
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ProblemError(f"unknown outcome {label!r}") from None

    @property
    def desired(self) -> tuple[int, ...]:
        # reward exactly 0 counts as desired
        return tuple(i for i, r in enumerate(self.rewards) if r >= 0)

    @property
    def undesired(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.rewards) if r < 0)


@dataclass(frozen=True)
class ActionModel:
    label: str
    support: tuple[tuple[int, float], ...]  # (outcome index, probability)

    def __post_init__(self):
        idx = [i for i, _ in self.support]
        if not idx:
            raise ProblemError(f"action {self.label!r} has an empty support")
        if len(set(idx)) != len(idx):
            raise ProblemError(f"action {self.label!r} repeats an outcome")
        for i, p in self.support:
            if not (0.0 < p <= 1.0):
                raise ProblemError(f"action {self.label!r}: probability {p} outside (0, 1]")
        total = math.fsum(p for _, p in self.support)
        if abs(total - 1.0) > PROB_TOL:
            raise ProblemError(
                f"action {self.label!r}: distribution sums to {total:.12g}, not 1"
            )

    def prob(self, outcome: int) -> float:
        for i, p in self.support:
            if i == outcome:
                return p
        return 0.0

    @property
    def outcomes(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.support)


@dataclass(frozen=True)
class Shaping:
    """Outcome bonus added to the rewards of ``outcomes`` on steps ``start..end``."""

    outcomes: tuple[int, ...]
    bonus: int  # granularity units
    start: int
    end: int


@dataclass(frozen=True)
class SurvivalProblem:
    outcome_space: OutcomeSpace
    actions: tuple[ActionModel, ...]
    initial_budget: int
    horizon: int
    shaping: Shaping | None = None

    def __post_init__(self):
        if not self.actions:
            raise ProblemError("the action set is empty")
        if self.initial_budget < 0:
            raise ProblemError("initial budget must be non-negative")
        if self.horizon < 1:
            raise ProblemError("horizon must be a positive integer")
        n = len(self.outcome_space)
        for a in self.actions:
            for i, _ in a.support:
                if not 0 <= i < n:
                    raise ProblemError(f"action {a.label!r}: outcome index {i} out of range")
        labels = [a.label for a in self.actions]
        if len(set(labels)) != len(labels):
            raise ProblemError("action labels must be unique")
        if max(self.expected_reward(a) for a in range(len(self.actions))) < -PROB_TOL:
            raise ProblemError("at least one action needs a non-negative expected reward")
        if self.shaping is not None:
            s = self.shaping
            if not 1 <= s.start <= s.end <= self.horizon:
                raise ProblemError("shaping steps must lie within 1..horizon")

    # convenience accessors -------------------------------------------------

    @property
    def g(self) -> int:
        return self.outcome_space.granularity

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def action_labels(self) -> list[str]:
        return [a.label for a in self.actions]

    def action_index(self, action: int | str) -> int:
        if isinstance(action, str):
            for i, a in enumerate(self.actions):
                if a.label == action:
                    return i
            raise ProblemError(f"unknown action {action!r}")
        if not 0 <= action < len(self.actions):
            raise ProblemError(f"unknown action index {action}")
        return int(action)

    def to_units(self, value: float) -> int:
        return _to_units(value, self.g, "budget")

    def replace(self, **changes) -> "SurvivalProblem":
        kw = dict(
            outcome_space=self.outcome_space,
            actions=self.actions,
            initial_budget=self.initial_budget,
            horizon=self.horizon,
            shaping=self.shaping,
        )
        kw.update(changes)
        return SurvivalProblem(**kw)

    def expected_reward(self, action: int | str) -> float:
        """Plain (unclipped) expected reward in real units."""
        a = self.actions[self.action_index(action)]
        r = self.outcome_space.rewards
        return math.fsum(p * r[i] for i, p in a.support) / self.g

    # compiled arrays used by the kernels ---------------------------------

    def reward_table(self) -> np.ndarray:
        """Per-step rewards, shape ``(horizon, n_outcomes)``, int64 units."""
        base = np.asarray(self.outcome_space.rewards, dtype=np.int64)
        table = np.tile(base, (self.horizon, 1))
        if self.shaping is not None:
            s = self.shaping
            for i in s.outcomes:
                table[s.start - 1 : s.end, i] += s.bonus
        return table

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Action supports as (ptr, outcome, prob), each sorted by base reward.

        Sorting by reward makes the next-budget sum run in increasing budget
        order, which fixes the floating summation order.
        """
        rewards = self.outcome_space.rewards
        ptr = [0]
        out: list[int] = []
        prob: list[float] = []
        for a in self.actions:
            for i, p in sorted(a.support, key=lambda ip: (rewards[ip[0]], ip[0])):
                out.append(i)
                prob.append(p)
            ptr.append(len(out))
        return (
            np.asarray(ptr, dtype=np.int64),
            np.asarray(out, dtype=np.int64),
            np.asarray(prob, dtype=np.float64),
        )

    @property
    def max_positive_reward(self) -> int:
        """Largest positive per-step reward in units over all steps, 0 if none."""
        return max(0, int(self.reward_table().max()))

    @property
    def max_abs_reward(self) -> int:
        return int(np.abs(self.reward_table()).max())

    @property
    def min_reward(self) -> int:
        return int(self.reward_table().min())


def _to_units(value: float, g: int, what: str) -> int:
    scaled = float(value) * g
    units = round(scaled)
    if abs(scaled - units) > REWARD_TOL:
        raise ProblemError(f"{what} {value} is not representable with granularity {g}")
    return int(units)


# ---------------------------------------------------------------------------
# external format


def validate_problem(raw: Mapping[str, Any]) -> SurvivalProblem:
    """Build a validated problem from a parsed problem description."""
    try:
        g = int(raw.get("granularity", 1))
        outcomes = raw["outcomes"]
        actions = raw["actions"]
        b0 = raw["initial_budget"]
        horizon = int(raw["horizon"])
    except KeyError as exc:
        raise ProblemError(f"missing field {exc.args[0]!r}") from None
    if g < 1:
        raise ProblemError("granularity must be a positive integer")
    if not outcomes:
        raise ProblemError("outcome space is empty")
    labels = tuple(str(o["label"]) for o in outcomes)
    rewards = tuple(_to_units(o["reward"], g, f"reward of {o['label']!r}") for o in outcomes)
    space = OutcomeSpace(labels, rewards, g)
    if not actions:
        raise ProblemError("the action set is empty")
    models = []
    for a in actions:
        probs = a.get("probs", {})
        support = tuple(
            (space.index(str(lbl)), float(p)) for lbl, p in probs.items() if float(p) != 0.0
        )
        models.append(ActionModel(str(a["label"]), support))
    if float(b0) < 0:
        raise ProblemError("initial budget must be non-negative")
    shaping = None
    if raw.get("shaping"):
        s = raw["shaping"]
        shaping = Shaping(
            outcomes=tuple(space.index(str(lbl)) for lbl in s["outcomes"]),
            bonus=_to_units(s["bonus"], g, "shaping bonus"),
            start=int(s.get("start", 1)),
            end=int(s.get("end", horizon)),
        )
    return SurvivalProblem(space, tuple(models), _to_units(b0, g, "initial budget"), horizon, shaping)


def problem_to_dict(problem: SurvivalProblem) -> dict[str, Any]:
    g = problem.g
    space = problem.outcome_space
    d: dict[str, Any] = {
        "granularity": g,
        "outcomes": [
            {"label": lbl, "reward": _real(r, g)} for lbl, r in zip(space.labels, space.rewards)
        ],
        "actions": [
            {"label": a.label, "probs": {space.labels[i]: p for i, p in a.support}}
            for a in problem.actions
        ],
        "initial_budget": _real(problem.initial_budget, g),
        "horizon": problem.horizon,
    }
    if problem.shaping is not None:
        s = problem.shaping
        d["shaping"] = {
            "outcomes": [space.labels[i] for i in s.outcomes],
            "bonus": _real(s.bonus, g),
            "start": s.start,
            "end": s.end,
        }
    return d


def _real(units: int, g: int) -> int | float:
    return units // g if units % g == 0 else units / g


def load_problem(path: str | Path) -> SurvivalProblem:
    """Read a YAML or JSON problem description."""
    text = Path(path).read_text()
    return validate_problem(yaml.safe_load(text))


def dump_problem(problem: SurvivalProblem, path: str | Path) -> None:
    path = Path(path)
    d = problem_to_dict(problem)
    if path.suffix == ".json":
        path.write_text(json.dumps(d, indent=2) + "\n")
    else:
        path.write_text(yaml.safe_dump(d, sort_keys=False))


# ---------------------------------------------------------------------------
# one-step quantities


def clipped_reward(reward: int, budget: int) -> int:
    """Limited-liability reward: never below ``-budget``, zero once stopped."""
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if budget == 0:
        return 0
    return max(-budget, reward)


def expected_clipped_reward(problem: SurvivalProblem, action: int | str, budget: int) -> float:
    a = problem.actions[problem.action_index(action)]
    r = problem.outcome_space.rewards
    return math.fsum(p * clipped_reward(r[i], budget) for i, p in a.support) / problem.g


def optimistic_reward(problem: SurvivalProblem, action: int | str) -> float:
    """Expected reward counting desired (non-negative) outcomes only."""
    a = problem.actions[problem.action_index(action)]
    r = problem.outcome_space.rewards
    return math.fsum(p * r[i] for i, p in a.support if r[i] >= 0) / problem.g


def desired_probability(problem: SurvivalProblem, action: int | str) -> float:
    a = problem.actions[problem.action_index(action)]
    r = problem.outcome_space.rewards
    return math.fsum(p for i, p in a.support if r[i] >= 0)


def one_step_survival(problem: SurvivalProblem, action: int | str, budget: int) -> float:
    if budget <= 0:
        raise ValueError("one-step survival is undefined at budget 0")
    a = problem.actions[problem.action_index(action)]
    r = problem.outcome_space.rewards
    return math.fsum(p for i, p in a.support if r[i] > -budget)


@dataclass(frozen=True)
class BudgetLattice:
    """Dense budget range ``[0, max_budget]`` in units; 0 is absorbing."""

    max_budget: int
    granularity: int = 1
    step_gain: int = 0  # largest positive per-step reward

    def __len__(self):
        return self.max_budget + 1

    def __contains__(self, budget: int) -> bool:
        return 0 <= budget <= self.max_budget

    @property
    def budgets(self) -> np.ndarray:
        return np.arange(self.max_budget + 1, dtype=np.int64)

    def reachable_max(self, initial_budget: int, t: int) -> int:
        """Largest budget reachable at step ``t`` (1-based) from ``initial_budget``."""
        return initial_budget + (t - 1) * self.step_gain


def build_budget_lattice(problem: SurvivalProblem) -> BudgetLattice:
    gain = problem.max_positive_reward
    return BudgetLattice(problem.initial_budget + problem.horizon * gain, problem.g, gain)


def transition_distribution(
    problem: SurvivalProblem, budget: int, action: int | str, t: int = 1
) -> dict[int, float]:
    """Next-budget distribution ``{b': prob}`` (units) from ``budget`` under ``action``."""
    if budget <= 0:
        raise ValueError("budget 0 is absorbing; no transitions out")
    a = problem.actions[problem.action_index(action)]
    r = problem.reward_table()[t - 1]
    dist: dict[int, float] = {}
    for i, p in a.support:
        nb = budget + clipped_reward(int(r[i]), budget)
        dist[nb] = dist.get(nb, 0.0) + p
    return dict(sorted(dist.items()))


def make_problem(
    outcomes: Sequence[tuple[str, float]],
    actions: Mapping[str, Mapping[str, float]],
    initial_budget: float,
    horizon: int,
    granularity: int = 1,
) -> SurvivalProblem:
    """Shorthand constructor going through the same validation as files."""
    raw = {
        "granularity": granularity,
        "outcomes": [{"label": lbl, "reward": r} for lbl, r in outcomes],
        "actions": [{"label": lbl, "probs": dict(p)} for lbl, p in actions.items()],
        "initial_budget": initial_budget,
        "horizon": horizon,
    }
    return validate_problem(raw)
