"""Built-in problems: the assistant dialogue and the two-coin gambler."""
from .model import SurvivalProblem, make_problem

ASSISTANT_OUTCOMES = [("vd", -100), ("d", -20), ("n", 1), ("s", 10)]
ASSISTANT_ACTIONS = {
    "a_o": {"n": 1.0},
    "a_m": {"d": 0.1, "s": 0.9},
    "a_e": {"vd": 0.05, "s": 0.95},
}

GAMBLER_OUTCOMES = [("bad", -10), ("safe", 1), ("good", 10)]
GAMBLER_ACTIONS = {
    "golden": {"bad": 0.5, "good": 0.5},
    "silver": {"safe": 1.0},
}


def assistant(initial_budget: float = 10, horizon: int = 5, without=()) -> SurvivalProblem:
    """Dissatisfaction-terminated dialogue; ``without`` drops actions by label."""
    actions = {k: v for k, v in ASSISTANT_ACTIONS.items() if k not in without}
    return make_problem(ASSISTANT_OUTCOMES, actions, initial_budget, horizon)


def gambler(initial_budget: float = 1, horizon: int = 3) -> SurvivalProblem:
    return make_problem(GAMBLER_OUTCOMES, GAMBLER_ACTIONS, initial_budget, horizon)


BUILTIN = {"assistant": assistant, "gambler": gambler}
