import csv
import json

import pytest
import yaml

from survbandit.cli import main


def run(capsys, *args):
    code = main(list(args))
    return code, capsys.readouterr()


def test_solve(tmp_path, capsys):
    code, out = run(capsys, "solve", "--scenario", "gambler", "--horizon", "3", "--budget", "1",
                    "--out", str(tmp_path))
    assert code == 0
    d = json.loads(out.out)
    assert d["v1"] == 5.875 and d["first_action"] == "golden"
    assert (tmp_path / "tables.csv").exists()


def test_solve_principal(tmp_path, capsys):
    code, out = run(capsys, "solve", "--scenario", "gambler", "--horizon", "3", "--budget", "1",
                    "--principal", "--out", str(tmp_path))
    assert json.loads(out.out)["v1"] == 3.0


def test_classify(tmp_path, capsys):
    code, out = run(capsys, "classify", "--scenario", "assistant", "--horizon", "200", "--budget", "20",
                    "--check", "long", "--at-budget", "20", "--out", str(tmp_path))
    d = json.loads(out.out)
    assert d["condition"]["holds"] and d["condition"]["guaranteed_behavior_verified"]


def test_sweep(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"scenario": "gambler", "horizons": "1..4", "budgets": [1, 2],
                                   "output_dir": str(tmp_path / "default")}))
    code, out = run(capsys, "sweep", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 0
    assert len(json.loads(out.out)["files"]) == 3
    assert (tmp_path / "o" / "gambler_regret.csv").exists()


def test_sweep_needs_config(capsys):
    code, out = run(capsys, "sweep")
    assert code == 2 and "config" in out.err


def test_regret(capsys):
    code, out = run(capsys, "regret", "--scenario", "gambler", "--horizon", "3", "--budget", "1")
    assert json.loads(out.out)["regret"] == 2.875


def test_shape(tmp_path, capsys):
    code, out = run(capsys, "shape", "--avoid", "vd", "--budget", "10", "--horizon", "5",
                    "--out", str(tmp_path))
    assert code == 0
    d = json.loads(out.out)
    assert d["feasible"] and d["lifetime_occupancy"] == 0
    assert (tmp_path / "shaped_problem.yaml").exists()


def test_shape_infeasible(tmp_path, capsys):
    prob = tmp_path / "p.yaml"
    prob.write_text(yaml.safe_dump({
        "granularity": 1,
        "outcomes": [{"label": "vd", "reward": -100}, {"label": "d", "reward": -20},
                     {"label": "s", "reward": 10}],
        "actions": [{"label": "a_m", "probs": {"d": 0.1, "s": 0.9}},
                    {"label": "a_e", "probs": {"vd": 0.05, "s": 0.95}}],
        "initial_budget": 10, "horizon": 5,
    }))
    code, out = run(capsys, "shape", "--problem", str(prob), "--avoid", "vd", "--out", str(tmp_path))
    assert code == 1 and not json.loads(out.out)["feasible"]


def test_misalign(tmp_path, capsys):
    code, out = run(capsys, "misalign", "--scenario", "gambler", "--horizon", "3", "--budget", "1",
                    "--out", str(tmp_path))
    d = json.loads(out.out)
    assert d["misalignment_gap"] == 2.75
    assert json.loads((tmp_path / "misalignment.json").read_text())["divergence_cells"][0] == [1, 1]


def test_simulate(tmp_path, capsys):
    args = ["simulate", "--scenario", "gambler", "--horizon", "3", "--budget", "1", "--n", "2000",
            "--seed", "3", "--out", str(tmp_path)]
    code, out = run(capsys, *args)
    first = (tmp_path / "stats.csv").read_text()
    run(capsys, *args)
    assert (tmp_path / "stats.csv").read_text() == first
    rows = list(csv.reader(open(tmp_path / "trace.csv")))
    assert rows[0][0] == "step"


def test_simulate_constant(tmp_path, capsys):
    code, out = run(capsys, "simulate", "--scenario", "gambler", "--policy", "silver", "--n", "50",
                    "--out", str(tmp_path))
    assert json.loads(out.out)["survival_rate"] == 1.0


def test_gen_random(tmp_path, capsys):
    code, out = run(capsys, "gen-random", "--seed", "2", "--out", str(tmp_path))
    path = json.loads(out.out)["problem"]
    d = yaml.safe_load(open(path))
    assert len(d["actions"]) == 10 and len(d["outcomes"]) == 41
    # the file feeds back into the other commands
    code, out = run(capsys, "solve", "--problem", path, "--out", str(tmp_path))
    assert code == 0


def test_errors(tmp_path, capsys):
    code, out = run(capsys, "solve", "--problem", str(tmp_path / "missing.yaml"))
    assert code == 2 and "error" in out.err
    with pytest.raises(SystemExit):
        main(["nonsense"])
