"""Command-line entry point: ``survbandit <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import alignment, experiments, scenarios, sim, solver, taxonomy
from .model import ProblemError, dump_problem, load_problem

log = logging.getLogger("survbandit")


def _problem(args):
    """Problem from --problem, --scenario or --config, with budget/horizon overrides."""
    if args.problem:
        p = load_problem(args.problem)
    elif args.config:
        cfg = experiments.ScenarioConfig.load(args.config)
        p = experiments.base_problem(cfg, args.seed or 0)
    else:
        p = scenarios.BUILTIN[args.scenario]()
    changes = {}
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.budget is not None:
        changes["initial_budget"] = p.to_units(args.budget)
    return p.replace(**changes) if changes else p


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_solve(args) -> int:
    p = _problem(args)
    tb = solver.solve(p, principal=args.principal)
    path = _out(args) / "tables.csv"
    solver.export_tables_csv(tb, path)
    b0 = p.initial_budget
    _dump({
        "v1": float(tb.v[1, b0]),
        "first_action": p.action_labels[tb.policy[1, b0]] if b0 > 0 else None,
        "survival": float(tb.surv[1, b0]),
        "tables": str(path),
    })
    return 0


def cmd_classify(args) -> int:
    p = _problem(args)
    tb = solver.solve(p)
    rep = taxonomy.classify_behavior(p, tb)
    path = _out(args) / "behavior.csv"
    taxonomy.export_behavior_csv(rep, path)
    result = {"behavior": str(path)}
    if args.check:
        b = p.to_units(args.at_budget) if args.at_budget is not None else p.initial_budget
        fn = {
            "short": taxonomy.check_short_term_aversion,
            "long": taxonomy.check_long_term_aversion,
            "seeking": taxonomy.check_risk_seeking,
        }[args.check]
        result["condition"] = fn(p, tb, args.t, b).to_dict()
    _dump(result)
    return 0


def cmd_sweep(args) -> int:
    if not args.config:
        print("sweep needs --config", file=sys.stderr)
        return 2
    cfg = experiments.ScenarioConfig.load(args.config)
    if args.out_given:
        cfg.output_dir = Path(args.out)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    paths = experiments.run_scenario(cfg)
    _dump({"files": [str(x) for x in paths]})
    return 0


def cmd_regret(args) -> int:
    p = _problem(args)
    tb = solver.solve(p)
    b = p.to_units(args.at_budget) if args.at_budget is not None else p.initial_budget
    reg, rate = experiments.regret(p, tb, args.t, b)
    _dump({"t": args.t, "budget": b / p.g, "regret": reg, "regret_rate": rate})
    return 0


def cmd_shape(args) -> int:
    p = _problem(args)
    b = p.to_units(args.at_budget) if args.at_budget is not None else p.initial_budget
    res = alignment.find_shaping(p, args.avoid, args.t, b, persistent=not args.single_step)
    out = _out(args)
    res.save(out / "shaping.json")
    if res.feasible:
        dump_problem(res.shaped_problem, out / "shaped_problem.yaml")
    d = res.to_dict()
    d.pop("audit")
    d.pop("shaped_problem")
    _dump(d)
    return 0 if res.feasible else 1


def cmd_misalign(args) -> int:
    p = _problem(args)
    rep = alignment.misalignment_report(p)
    path = _out(args) / "misalignment.json"
    path.write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
    d = rep.to_dict()
    d["divergence_cells"] = len(d["divergence_cells"])
    d["report"] = str(path)
    _dump(d)
    return 0


def cmd_simulate(args) -> int:
    p = _problem(args)
    pol = solver.solve(p).policy if args.policy == "optimal" else solver.constant_policy(p, args.policy)
    seed = args.seed or 0
    stats = sim.estimate(p, pol, args.n, seed)
    out = _out(args)
    sim.export_stats_csv(stats, out / "stats.csv")
    sim.export_trace_csv(p, sim.rollout(p, pol, seed), out / "trace.csv")
    _dump(stats.__dict__)
    return 0


def cmd_gen_random(args) -> int:
    p = sim.random_problem(args.actions, 2 * args.span + 1, args.support, args.span, args.seed or 0,
                           initial_budget=args.budget or 10, horizon=args.horizon or 10)
    path = _out(args) / f"random_seed{args.seed or 0}.yaml"
    dump_problem(p, path)
    _dump({"problem": str(path)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario config (YAML)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--problem", help="problem file (YAML or JSON)")
    common.add_argument("--scenario", choices=sorted(scenarios.BUILTIN), default="assistant")
    common.add_argument("--budget", type=float, help="initial budget override")
    common.add_argument("--horizon", type=int, help="horizon override")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="survbandit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="backward induction tables")
    s.add_argument("--principal", action="store_true", help="unclipped-loss objective")
    s.set_defaults(fn=cmd_solve)

    s = sub.add_parser("classify", parents=[common], help="behaviour grid and condition checks")
    s.add_argument("--check", choices=["short", "long", "seeking"])
    s.add_argument("--t", type=int, default=1)
    s.add_argument("--at-budget", type=float)
    s.set_defaults(fn=cmd_classify)

    s = sub.add_parser("sweep", parents=[common], help="policy/behaviour/regret grids from a config")
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("regret", parents=[common], help="regret at one cell")
    s.add_argument("--t", type=int, default=1)
    s.add_argument("--at-budget", type=float)
    s.set_defaults(fn=cmd_regret)

    s = sub.add_parser("shape", parents=[common], help="search an outcome bonus")
    s.add_argument("--avoid", required=True, help="outcome label to avoid")
    s.add_argument("--t", type=int, default=1)
    s.add_argument("--at-budget", type=float)
    s.add_argument("--single-step", action="store_true", help="bonus on step t only")
    s.set_defaults(fn=cmd_shape)

    s = sub.add_parser("misalign", parents=[common], help="agent vs principal report")
    s.set_defaults(fn=cmd_misalign)

    s = sub.add_parser("simulate", parents=[common], help="Monte-Carlo estimate")
    s.add_argument("--n", type=int, default=10000)
    s.add_argument("--policy", default="optimal", help="'optimal' or an action label to always play")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("gen-random", parents=[common], help="random problem file")
    s.add_argument("--actions", type=int, default=10)
    s.add_argument("--support", type=int, default=4)
    s.add_argument("--span", type=int, default=20)
    s.set_defaults(fn=cmd_gen_random)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    raw = sys.argv[1:] if argv is None else list(argv)
    args.out_given = any(a == "--out" or a.startswith("--out=") for a in raw)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (ProblemError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
