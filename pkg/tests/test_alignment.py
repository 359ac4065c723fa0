import json

import numpy as np
import pytest

from survbandit import alignment as al, scenarios
from survbandit.model import expected_clipped_reward, load_problem, make_problem
from survbandit.solver import constant_policy, evaluate_policy, outcome_occupancy, solve

from helpers import brute_force_value, random_instances

RANDOM = random_instances(41, 60, max_actions=5, max_outcomes=8, max_horizon=8,
                          reward_range=(-12, 12), budget_range=(1, 15))


class TestPrincipalValue:
    def test_one_step_golden(self):
        g = scenarios.gambler(1, 1)
        pol = constant_policy(g, "golden")
        assert evaluate_policy(g, pol).v_pi[1, 1] == 4.5
        assert al.principal_value(g, pol)[1, 1] == 0.0
        assert expected_clipped_reward(g, "golden", 1) == 4.5

    def test_silver_equal(self):
        g = scenarios.gambler(1, 5)
        pol = constant_policy(g, "silver")
        pv = al.principal_value(g, pol)
        for t in range(1, 6):
            assert np.all(pv[t, 1:30] == 5 - t + 1)

    @pytest.mark.parametrize("p", RANDOM[:30], ids=lambda p: f"T{p.horizon}A{p.n_actions}")
    def test_dominance(self, p):
        tb = solve(p)
        M = tb.lattice.max_budget
        T = p.horizon
        rng = np.random.default_rng(p.horizon * 7 + p.n_actions)
        pols = [tb.policy, rng.integers(0, p.n_actions, size=tb.policy.shape)]
        for pol in pols:
            agent = evaluate_policy(p, pol).v_pi[1 : T + 1, : M + 1]
            boss = al.principal_value(p, pol)[1 : T + 1, : M + 1]
            assert np.all(boss <= agent + 1e-9)

    def test_principal_solve_matches_enumeration(self):
        for p in random_instances(43, 25):
            tb = solve(p, principal=True)
            want = float(brute_force_value(p, principal=True))
            assert abs(tb.v[1, p.initial_budget] - want) <= 1e-9


class TestMisalignment:
    def test_gambler(self):
        rep = al.misalignment_report(scenarios.gambler(1, 3))
        assert rep.agent_first_action == "golden"
        assert rep.principal_first_action == "silver"
        assert rep.misalignment_gap > 0
        assert (1, 1) in rep.divergence_cells

    def test_no_negative_rewards(self):
        p = make_problem([("x", 0), ("y", 2), ("z", 5)],
                         {"a": {"x": 0.5, "z": 0.5}, "b": {"y": 1.0}}, 1, 5)
        rep = al.misalignment_report(p)
        assert rep.misalignment_gap == 0 and rep.divergence_cells == []

    def test_assistant_short_horizon(self):
        p = scenarios.assistant(5, 3)
        rep = al.misalignment_report(p)
        assert rep.agent_first_action == "a_e"
        assert any(t == 1 and b <= 5 for t, b in rep.divergence_cells)
        assert rep.misalignment_gap > 0

    @pytest.mark.parametrize("p", RANDOM, ids=lambda p: f"T{p.horizon}A{p.n_actions}")
    def test_invariants(self, p):
        rep = al.misalignment_report(p)
        assert rep.misalignment_gap >= -1e-9
        assert rep.principal_value_under_agent_policy <= rep.agent_value + 1e-9

    def test_export(self):
        d = al.misalignment_report(scenarios.gambler(1, 3)).to_dict()
        json.dumps(d)
        assert d["divergence_cells"][0] == [1, 1]


class TestShaping:
    def test_assistant_feasible(self):
        p = scenarios.assistant(10, 5)
        res = al.find_shaping(p, "vd", 1, 10)
        assert res.feasible and res.boosted_outcomes == ["n"]
        assert res.lifetime_occupancy == 0.0
        tb = solve(res.shaped_problem)
        _, life = outcome_occupancy(res.shaped_problem, tb, "vd", start=(1, 10))
        assert life == 0.0

    def test_minimal_and_monotone(self):
        p = scenarios.assistant(10, 5)
        res = al.find_shaping(p, "vd", 1, 10)
        s = res.bonus
        assert s > 0

        def life(bonus):
            q = al.shaped(p, [2], bonus, 1, 5)
            return outcome_occupancy(q, solve(q), "vd", start=(1, 10))[1]

        assert life(s - 1) > 0
        for bonus in (s, s + 1, 2 * s):
            assert life(bonus) == 0.0

    def test_audit_trail(self):
        res = al.find_shaping(scenarios.assistant(10, 5), "vd", 1, 10)
        tried = [e["bonus_units"] for e in res.audit]
        assert tried[:2] == [0, 1]
        assert any(e["pass"] for e in res.audit) and not res.audit[0]["pass"]

    def test_infeasible_without_safe_action(self):
        p = scenarios.assistant(10, 5, without=("a_o",))
        res = al.find_shaping(p, "vd", 1, 10)
        assert not res.feasible
        assert "not guaranteed" in res.status
        assert res.witness["a_m"] == ["s"]

    def test_unreachable_outcome(self):
        p = make_problem([("x", -5), ("y", 1), ("z", 3)], {"a": {"y": 1.0}, "b": {"z": 0.5, "y": 0.5}}, 2, 4)
        res = al.find_shaping(p, "x", 1, 2)
        assert res.feasible and res.bonus == 0 and res.lifetime_occupancy == 0

    def test_already_avoided(self):
        p = make_problem([("die", -5), ("ok", 2), ("jackpot", 3)],
                         {"safe": {"ok": 1.0}, "risky": {"die": 0.5, "jackpot": 0.5}}, 1, 6)
        res = al.find_shaping(p, "die", 1, 1)
        assert res.feasible and res.bonus == 0 and res.status == "already avoided"

    def test_tiny_occupancy_still_counts(self):
        # a long horizon leaves a vanishing but nonzero chance of the risky action late on
        res = al.find_shaping(scenarios.assistant(10, 300), "vd", 1, 5)
        assert res.feasible and res.bonus > 0
        assert 0 < res.audit[0]["lifetime_occupancy"] < 1e-3

    def test_single_step(self):
        p = scenarios.assistant(10, 5)
        res = al.find_shaping(p, "vd", 1, 10, persistent=False)
        assert res.feasible and res.cell_probability == 0.0
        q = res.shaped_problem
        assert q.shaping.start == q.shaping.end == 1
        tb = solve(q)
        assert q.action_labels[tb.policy[1, 10]] != "a_e"

    @pytest.mark.parametrize("p", RANDOM[:25], ids=lambda p: f"T{p.horizon}A{p.n_actions}")
    def test_soundness_random(self, p):
        space = p.outcome_space
        for y in range(len(space)):
            res = al.find_shaping(p, y, 1, p.initial_budget)
            if res.feasible:
                tb = solve(res.shaped_problem)
                _, life = outcome_occupancy(res.shaped_problem, tb, y, start=(1, p.initial_budget))
                assert life == 0.0

    def test_save(self, tmp_path):
        res = al.find_shaping(scenarios.assistant(10, 5), "vd", 1, 10)
        path = tmp_path / "s.json"
        res.save(path)
        d = json.loads(path.read_text())
        assert d["bonus_units"] == res.bonus and d["audit"]
        prob = tmp_path / "p.json"
        prob.write_text(json.dumps(d["shaped_problem"]))
        assert load_problem(prob).shaping.bonus == res.bonus

    def test_bad_arguments(self):
        p = scenarios.assistant(10, 5)
        with pytest.raises(ValueError):
            al.find_shaping(p, "vd", 6, 10)
        with pytest.raises(ValueError):
            al.find_shaping(p, "vd", 1, 0)


class TestPenaltyFutility:
    @pytest.mark.parametrize("T,b0", [(5, 10), (20, 30), (60, 20)])
    def test_assistant(self, T, b0):
        p = scenarios.assistant(b0, T)
        tb = solve(p)
        cells = al.fully_clipped_cells(p, tb, "vd")
        assert cells
        for lower in (-101, -150, -1000):
            q = al.with_reward(p, "vd", lower)
            tq = solve(q)
            for t, b in cells:
                assert np.array_equal(tq.q[t, b], tb.q[t, b])
                assert tq.policy[t, b] == tb.policy[t, b]

    def test_final_step_clipping(self):
        # at t = T only the current budget matters
        p = scenarios.assistant(10, 5)
        tb = solve(p)
        T = p.horizon
        for b in range(1, 21):
            a = p.actions[tb.policy[T, b]]
            negs = [p.outcome_space.rewards[i] for i in a.outcomes if p.outcome_space.rewards[i] < 0]
            if negs and max(negs) <= -b:
                q = solve(al.with_reward(p, "vd", -500))
                assert np.array_equal(q.q[T, b], tb.q[T, b])


class TestHorizonEstimate:
    def test_gambler(self):
        g = scenarios.gambler(1, 3)
        tb = solve(g)
        assert al.horizon_extension_estimate(g, tb, 1, "silver", "golden") == tb.v[1, 1] / 0.5

    def test_direct_ratio(self):
        p = make_problem([("die", -1), ("w", 10)], {"safe": {"w": 1.0}, "doom": {"die": 1.0}}, 1, 1)
        tb = solve(p)
        assert tb.v[1, 1] == 10
        assert al.horizon_extension_estimate(p, tb, 1, "safe", "doom") == 10

    def test_assistant_flip(self):
        # observed flip at the lowest budget versus the estimate from a one-step problem
        est = al.horizon_extension_estimate(scenarios.assistant(1, 1), solve(scenarios.assistant(1, 1)),
                                            1, "a_o", "a_e")
        big = solve(scenarios.assistant(1, 400))
        flip = next(h for h in range(1, 401) if big.policy[400 - h + 1, 1] == 0)
        assert 100 <= flip <= 200
        assert flip / 4 <= est <= flip * 4

    def test_non_positive_gap(self):
        g = scenarios.gambler(1, 3)
        with pytest.raises(ValueError):
            al.horizon_extension_estimate(g, solve(g), 1, "golden", "silver")
