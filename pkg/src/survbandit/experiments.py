"""Scenario sweeps and regret grids written as CSV."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import scenarios
from .model import SurvivalProblem, load_problem
from .sim import random_problem
from .solver import PolicyEvalTables, SolveTables, solve
from .taxonomy import classify_behavior

SCENARIOS = ("assistant", "gambler", "random10", "file")
FMT = "{:.12g}".format


def best_mean_reward(problem: SurvivalProblem) -> float:
    return max(problem.expected_reward(a) for a in range(problem.n_actions))


def regret(problem: SurvivalProblem, tables, t: int, budget: int) -> tuple[float, float]:
    """Value at ``(t, budget)`` minus what always earning the best mean reward
    would collect over the remaining ``T - t + 1`` steps, and that per step.

    ``tables`` may be optimal (``SolveTables``) or an evaluated policy.
    """
    T = problem.horizon
    if not 1 <= t <= T:
        raise ValueError(f"step {t} outside 1..{T}")
    v = tables.v_pi if isinstance(tables, PolicyEvalTables) else tables.v
    steps = T - t + 1
    reg = float(v[t, budget]) - steps * best_mean_reward(problem)
    return reg, reg / steps


# ---------------------------------------------------------------------------
# configuration


def _int_list(spec, what: str) -> list[int]:
    return [int(x) for x in _num_list(spec, what)]


def _num_list(spec, what: str) -> list[float]:
    """A list, a scalar, or ``"lo..hi"`` / ``"lo..hi:step"`` (inclusive)."""
    if isinstance(spec, str):
        m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*(?::\s*(\d+))?\s*", spec)
        if not m:
            raise ValueError(f"cannot read {what} range {spec!r}")
        lo, hi, step = int(m[1]), int(m[2]), int(m[3] or 1)
        vals = list(range(lo, hi + 1, step))
    elif isinstance(spec, (int, float)):
        vals = [spec]
    else:
        vals = list(spec or [])
    if not vals:
        raise ValueError(f"{what} list is empty")
    return vals


@dataclass
class ScenarioConfig:
    scenario: str
    horizons: list[int]
    budgets: list[float]
    seeds: list[int] = field(default_factory=lambda: [0])
    output_dir: Path = Path("out")
    problem_file: Path | None = None
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        self.horizons = _int_list(self.horizons, "horizon")
        self.budgets = _num_list(self.budgets, "budget")
        self.seeds = _int_list(self.seeds, "seed")
        if min(self.horizons) < 1:
            raise ValueError("horizons must be positive")
        if min(self.budgets) <= 0:
            raise ValueError("budgets must be positive")
        self.output_dir = Path(self.output_dir)
        if self.scenario == "file":
            if self.problem_file is None:
                raise ValueError("scenario 'file' needs problem_file")
            self.problem_file = Path(self.problem_file)

    @classmethod
    def from_dict(cls, raw: dict[str, Any], base: Path | None = None) -> "ScenarioConfig":
        raw = dict(raw)
        known = {"scenario", "horizons", "budgets", "seeds", "output_dir", "problem_file"}
        opts = {k: raw.pop(k) for k in list(raw) if k not in known}
        if "scenario" not in raw or "horizons" not in raw or "budgets" not in raw:
            raise ValueError("config needs scenario, horizons and budgets")
        if base is not None and raw.get("problem_file"):
            raw["problem_file"] = base / raw["problem_file"]
        return cls(**raw, options=opts)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: expected a mapping")
        return cls.from_dict(raw, base=path.parent)


def base_problem(config: ScenarioConfig, seed: int = 0) -> SurvivalProblem:
    """The scenario's problem at the largest horizon and budget of the sweep."""
    T = max(config.horizons)
    if config.scenario == "assistant":
        p = scenarios.assistant(horizon=T, without=tuple(config.options.get("without", ())))
    elif config.scenario == "gambler":
        p = scenarios.gambler(horizon=T)
    elif config.scenario == "random10":
        o = config.options
        p = random_problem(
            int(o.get("n_actions", 10)), int(o.get("n_outcomes", 41)),
            int(o.get("support_size", 4)), int(o.get("reward_span", 20)), seed,
            horizon=T,
        )
    else:
        p = load_problem(config.problem_file).replace(horizon=T)
    return p.replace(initial_budget=max(p.to_units(b) for b in config.budgets))


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    """First-step results per (horizon, budget units)."""

    problem: SurvivalProblem
    horizons: list[int]
    budgets: list[int]
    rows: list[dict[str, Any]]


def sweep(problem: SurvivalProblem, horizons, budgets_units) -> SweepResult:
    """Solve once at the largest horizon and read shorter horizons off later
    rows: with time-invariant rewards, step ``T-h+1`` of a length-``T`` problem
    is step 1 of a length-``h`` problem. Shaped problems are solved per horizon."""
    horizons = sorted(set(int(h) for h in horizons))
    budgets = sorted(set(int(b) for b in budgets_units))
    H = max(horizons)
    p = problem.replace(horizon=H, initial_budget=max(budgets))
    jobs = []
    if p.shaping is None:
        tables = solve(p)
        report = classify_behavior(p, tables)
        jobs = [(h, p, tables, report, H - h + 1) for h in horizons]
    else:
        for h in horizons:
            q = p.replace(horizon=h, shaping=None if p.shaping.start > h else
                          p.shaping.__class__(p.shaping.outcomes, p.shaping.bonus,
                                              p.shaping.start, min(p.shaping.end, h)))
            tb = solve(q)
            jobs.append((h, q, tb, classify_behavior(q, tb), 1))
    labels = p.action_labels
    g = p.g
    rows = []
    for h, q, tb, rep, t in jobs:
        rstar = best_mean_reward(q)
        for b in budgets:
            v = float(tb.v[t, b])
            reg = v - h * rstar
            rows.append({
                "horizon": h, "budget_units": b, "budget": b / g, "t": t,
                "action": labels[tb.policy[t, b]], "v": v, "surv": float(tb.surv[t, b]),
                "regret": reg, "regret_rate": reg / h,
                "risk_neutral": bool(rep.risk_neutral[t, b]),
                "short_surv": bool(rep.short_term_survival[t, b]),
                "long_surv": bool(rep.long_term_survival[t, b]),
                "risk_seeking": bool(rep.risk_seeking[t, b]),
                "tie": bool(rep.tie[t, b]),
            })
    return SweepResult(p, horizons, budgets, rows)


def policy_grid(result: SweepResult) -> dict[tuple[int, int], str]:
    return {(r["horizon"], r["budget_units"]): r["action"] for r in result.rows}


def write_grids(result: SweepResult, out_dir: Path, stem: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = {
        "policy": (["horizon", "t", "budget", "action", "v", "surv"],
                   lambda r: [r["horizon"], 1, FMT(r["budget"]), r["action"], FMT(r["v"]), FMT(r["surv"])]),
        "behavior": (["horizon", "budget", "action", "risk_neutral", "short_surv", "long_surv",
                      "risk_seeking", "tie"],
                     lambda r: [r["horizon"], FMT(r["budget"]), r["action"]]
                     + [int(r[k]) for k in ("risk_neutral", "short_surv", "long_surv",
                                            "risk_seeking", "tie")]),
        "regret": (["budget", "horizon", "regret", "regret_rate", "first_action"],
                   lambda r: [FMT(r["budget"]), r["horizon"], FMT(r["regret"]),
                              FMT(r["regret_rate"]), r["action"]]),
    }
    paths = []
    for name, (header, row) in specs.items():
        path = out_dir / f"{stem}_{name}.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for r in result.rows:
                wr.writerow(row(r))
        paths.append(path)
    return paths


def run_scenario(config: ScenarioConfig) -> list[Path]:
    """Sweep the configured scenario and write policy, behaviour and regret grids."""
    out = config.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    seeds = config.seeds if config.scenario == "random10" else [None]
    stem = config.problem_file.stem if config.scenario == "file" else config.scenario
    paths = []
    for seed in seeds:
        p = base_problem(config, seed or 0)
        units = [p.to_units(b) for b in config.budgets]
        res = sweep(p, config.horizons, units)
        name = stem if seed is None else f"{stem}_seed{seed}"
        paths += write_grids(res, out, name)
    return paths


def regret_sign_summary(result: SweepResult) -> dict[str, np.ndarray]:
    """Regret as a (horizon x budget) array in sweep order."""
    idx_h = {h: i for i, h in enumerate(result.horizons)}
    idx_b = {b: j for j, b in enumerate(result.budgets)}
    grid = np.zeros((len(result.horizons), len(result.budgets)))
    for r in result.rows:
        grid[idx_h[r["horizon"]], idx_b[r["budget_units"]]] = r["regret"]
    return {"horizons": np.array(result.horizons), "budgets": np.array(result.budgets), "regret": grid}
