import csv
import filecmp

import numpy as np
import pytest
import yaml

from survbandit import experiments as ex, scenarios
from survbandit.model import dump_problem
from survbandit.solver import constant_policy, evaluate_policy, solve


class TestRegret:
    def test_gambler_example(self):
        g = scenarios.gambler(1, 3)
        reg, rate = ex.regret(g, solve(g), 1, 1)
        assert reg == 2.875 and rate == 2.875 / 3

    def test_silver_always_zero(self):
        g = scenarios.gambler(1, 6)
        ev = evaluate_policy(g, constant_policy(g, "silver"))
        for t in range(1, 7):
            for b in (1, 4, 20):
                assert ex.regret(g, ev, t, b) == (0.0, 0.0)

    def test_assistant_large_budget(self):
        p = scenarios.assistant(100, 60)
        tb = solve(p)
        rates = [abs(ex.regret(p, tb, 1, b)[1]) for b in (20, 50, 100)]
        assert rates[-1] < 0.03 and rates[-1] <= rates[0]

    def test_bad_step(self):
        g = scenarios.gambler(1, 3)
        with pytest.raises(ValueError):
            ex.regret(g, solve(g), 4, 1)


@pytest.fixture(scope="module")
def assistant():
    return ex.sweep(scenarios.assistant(), range(1, 201), range(1, 101))


class TestSweep:
    def test_matches_direct_solves(self, assistant):
        rows = {(r["horizon"], r["budget_units"]): r for r in assistant.rows}
        for h, b in [(1, 1), (7, 3), (50, 25), (133, 80), (200, 100)]:
            tb = solve(scenarios.assistant(b, h))
            r = rows[(h, b)]
            assert r["v"] == tb.v[1, b] and r["surv"] == tb.surv[1, b]
            assert r["action"] == tb.problem.action_labels[tb.policy[1, b]]

    def test_regimes(self, assistant):
        grid = ex.policy_grid(assistant)
        assert all(grid[(h, b)] == "a_e" for h in range(1, 6) for b in range(1, 21))
        assert all(grid[(h, b)] == "a_o" for h in range(190, 201) for b in range(1, 21))
        assert all(grid[(h, b)] == "a_m" for h in range(150, 201) for b in range(21, 101))
        assert any(grid[(100, b)] == "a_e" for b in range(1, 21))
        assert not any(grid[(200, b)] == "a_e" for b in range(1, 21))

    def test_regret_signs(self, assistant):
        s = ex.regret_sign_summary(assistant)
        reg = s["regret"]
        assert np.all(reg[:5, :5] > 0)      # low budget, short horizon
        assert np.all(reg[-10:, :5] < 0)    # low budget, long horizon
        rate = reg[-1] / 200
        assert abs(rate[-1]) < abs(rate[0])

    def test_gambler_non_negative(self):
        res = ex.sweep(scenarios.gambler(), range(1, 21), range(1, 31))
        assert min(r["regret"] for r in res.rows) >= 0

    def test_shaped_problem_solved_per_horizon(self):
        from survbandit.model import Shaping
        p = scenarios.assistant(10, 6).replace(shaping=Shaping((2,), 5, 1, 6))
        res = ex.sweep(p, [2, 6], [10])
        r2 = [r for r in res.rows if r["horizon"] == 2][0]
        direct = solve(p.replace(horizon=2, shaping=Shaping((2,), 5, 1, 2)))
        assert r2["v"] == direct.v[1, 10]


class TestConfig:
    def test_ranges(self):
        cfg = ex.ScenarioConfig("gambler", "1..5", "2..10:4")
        assert cfg.horizons == [1, 2, 3, 4, 5] and cfg.budgets == [2, 6, 10]

    @pytest.mark.parametrize("kw", [
        dict(scenario="poker", horizons=[1], budgets=[1]),
        dict(scenario="gambler", horizons=[], budgets=[1]),
        dict(scenario="gambler", horizons=[1], budgets=[0]),
        dict(scenario="file", horizons=[1], budgets=[1]),
        dict(scenario="gambler", horizons="a..b", budgets=[1]),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ex.ScenarioConfig(**kw)

    def test_load(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump({"scenario": "random10", "horizons": [3], "budgets": [5],
                                        "seeds": [1, 2], "output_dir": str(tmp_path / "o"),
                                        "support_size": 3}))
        cfg = ex.ScenarioConfig.load(path)
        assert cfg.seeds == [1, 2] and cfg.options == {"support_size": 3}
        p = ex.base_problem(cfg, 1)
        assert all(len(a.support) == 3 for a in p.actions)


class TestRunScenario:
    def test_gambler_outputs(self, tmp_path):
        cfg = ex.ScenarioConfig("gambler", "1..20", "1..30", output_dir=tmp_path)
        paths = ex.run_scenario(cfg)
        assert [p.name for p in paths] == ["gambler_policy.csv", "gambler_behavior.csv", "gambler_regret.csv"]
        rows = list(csv.DictReader(open(tmp_path / "gambler_regret.csv")))
        assert len(rows) == 600
        assert all(float(r["regret"]) >= 0 for r in rows)
        h3 = [r for r in rows if r["horizon"] == "3" and r["budget"] == "1"][0]
        assert h3["regret"] == "2.875" and h3["first_action"] == "golden"
        pol = list(csv.reader(open(tmp_path / "gambler_policy.csv")))
        assert pol[0] == ["horizon", "t", "budget", "action", "v", "surv"]

    def test_random_deterministic(self, tmp_path):
        cfg = dict(scenario="random10", horizons="1..6", budgets="1..8", seeds=[4])
        a = ex.run_scenario(ex.ScenarioConfig(**cfg, output_dir=tmp_path / "a"))
        b = ex.run_scenario(ex.ScenarioConfig(**cfg, output_dir=tmp_path / "b"))
        assert [x.name for x in a] == [x.name for x in b]
        assert all(filecmp.cmp(x, y, shallow=False) for x, y in zip(a, b))

    def test_file_scenario(self, tmp_path):
        dump_problem(scenarios.gambler(), tmp_path / "coins.yaml")
        cfg = ex.ScenarioConfig("file", [3], [1], output_dir=tmp_path / "o",
                                problem_file=tmp_path / "coins.yaml")
        paths = ex.run_scenario(cfg)
        assert paths[0].name == "coins_policy.csv"

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "f"
        blocker.write_text("")
        cfg = ex.ScenarioConfig("gambler", [1], [1], output_dir=blocker / "sub")
        with pytest.raises(OSError):
            ex.run_scenario(cfg)

    def test_twelve_digits(self, tmp_path):
        cfg = ex.ScenarioConfig("assistant", [7], [3], output_dir=tmp_path)
        ex.run_scenario(cfg)
        row = list(csv.DictReader(open(tmp_path / "assistant_policy.csv")))[0]
        assert row["v"] == f"{solve(scenarios.assistant(3, 7)).v[1, 3]:.12g}"


@pytest.mark.parametrize("name", ["assistant", "gambler", "random10"])
def test_bundled_configs_load(name):
    from pathlib import Path
    path = Path(__file__).parent.parent / "configs" / f"{name}.yaml"
    cfg = ex.ScenarioConfig.load(path)
    assert cfg.scenario == name and cfg.horizons[0] == 1
