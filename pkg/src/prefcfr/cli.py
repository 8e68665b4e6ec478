"""Command-line experiment runner.

Subcommands:

* ``solve``: one solver run on a named game (or one normal-form self-play
  run with ``--normal-form``), writing a trace CSV and a strategy dump.
* ``experiment``: a seeded run matrix described by a JSON config file.
* ``suite-kuhn``: the six-setting preference suite plus a vanilla baseline.
* ``eval``: exploitability of a stored strategy dump, and head-to-head
  values when several dumps are given.
* ``style``: aggregate action distribution of a dump over chosen infosets.

Preference flags use compact specs: ``--delta 'J|:Bet=5'`` pins one
infoset/action pair, ``--delta 'Raise=5'`` applies to the action label
everywhere; ``--beta 'J|=0.05'`` and ``--beta 0.05`` work the same way.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .evaluation import exploitability, first_decision_infosets, head_to_head
from .experiment import (ExperimentConfig, dump_strategy, load_strategy,
                         run_experiment, six_config_suite, summarize,
                         write_summary_csv, write_trace_csv)
from .games import MATRIX_BUILDERS, GAME_NAMES, build_game
from .normal_form import normal_form_solve
from .solvers import SolverConfig, run_solver
from . import evaluation


def _parse_pref_specs(delta_specs, beta_specs) -> list[dict]:
    entries: list[dict] = []
    for spec in delta_specs or ():
        head, _, value = spec.rpartition("=")
        if not head:
            raise SystemExit(f"bad --delta spec {spec!r}; "
                             "use [INFOSET:]ACTION=VALUE")
        if ":" in head:
            infoset, action = head.split(":", 1)
            entries.append({"infoset": infoset, "action": action,
                            "delta": float(value)})
        else:
            entries.append({"action": head, "delta": float(value)})
    for spec in beta_specs or ():
        head, sep, value = spec.rpartition("=")
        if not sep:
            entries.append({"beta": float(spec)})
        else:
            entries.append({"infoset": head, "beta": float(value)})
    return entries


def _solver_config(args) -> SolverConfig:
    return SolverConfig.from_dict({
        "algorithm": args.algo,
        "iterations": args.iters,
        "seed": args.seed,
        "initial_profile": args.init,
        "preference": _parse_pref_specs(args.delta, args.beta),
        "checkpoints": args.checkpoints
        if args.checkpoints in ("default", "all") else int(args.checkpoints),
        "strict_bounds": args.strict_bounds,
    })


def _cmd_solve(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.normal_form:
        if args.game not in MATRIX_BUILDERS:
            raise SystemExit(
                f"--normal-form needs a matrix game, one of "
                f"{sorted(MATRIX_BUILDERS)}")
        algo = {"CFR": "RM", "PrefCFR_RM": "PrefRM",
                "PrefCFR_BR": "PrefBR"}.get(args.algo)
        if algo is None:
            raise SystemExit(f"{args.algo} has no normal-form variant")
        from .solvers import PreferenceConfig

        prefs = PreferenceConfig.from_entries(
            _parse_pref_specs(args.delta, args.beta))
        result = normal_form_solve(MATRIX_BUILDERS[args.game](), algo=algo,
                                   prefs=prefs, iters=args.iters,
                                   seed=args.seed, initial_profile=args.init,
                                   strict_bounds=args.strict_bounds)
        write_trace_csv(out / "trace.csv", 0, result.trace)
        with open(out / "strategy.json", "w") as fh:
            json.dump([s.tolist() for s in result.average_strategies], fh,
                      indent=2)
            fh.write("\n")
        last = result.trace.points[-1]
        print(f"normal-form {args.game} {algo}: iterations={args.iters} "
              f"exploitability={last.exploitability:.6f} "
              f"cone_distance={last.cone_distance:.6f} "
              f"halfspace_failures={result.halfspace_failures}"
              f"/{result.halfspace_checks} "
              f"bound_violations={len(result.bound_violations)}")
        return 0
    game = build_game(args.game)
    config = _solver_config(args)
    result = run_solver(game, config, record_timing=args.timing)
    write_trace_csv(out / "trace.csv", 0, result.trace)
    dump_strategy(out / "strategy.json", result.profile, game)
    last = result.trace.points[-1]
    line = (f"{args.game} {args.algo}: iterations={config.iterations} "
            f"exploitability={last.exploitability:.6f}")
    if last.alpha is not None:
        line += f" alpha={last.alpha:.4f}"
    if result.bound_violations:
        line += f" bound_violations={len(result.bound_violations)}"
    print(line)
    print(f"wrote {out / 'trace.csv'} and {out / 'strategy.json'}")
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.out is not None:
        config = ExperimentConfig.from_dict(
            {**config.to_dict(), "out_dir": args.out})
    result = run_experiment(config)
    for metric, stats in sorted(result.summary.metrics.items()):
        print(f"{config.name}: final {metric} mean={stats['mean'][-1]:.6f} "
              f"band=[{stats['lo90'][-1]:.6f}, {stats['hi90'][-1]:.6f}]")
    for path in result.files:
        print(f"wrote {path}")
    return 0


def _cmd_suite_kuhn(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    baseline = ExperimentConfig(
        name="baseline_cfr", game="kuhn",
        solver=SolverConfig.from_dict({
            "algorithm": "CFR", "iterations": args.iters,
            "initial_profile": "random",
        }),
        runs=args.runs, base_seed=args.base_seed,
        out_dir=str(out / "baseline_cfr"), workers=args.workers)
    configs = [baseline] + [
        ExperimentConfig.from_dict({**c.to_dict(),
                                    "out_dir": str(out / c.name),
                                    "workers": args.workers})
        for c in six_config_suite(runs=args.runs, iterations=args.iters,
                                  base_seed=args.base_seed)
    ]
    rows = []
    for config in configs:
        result = run_experiment(config)
        alphas = [r.trace.points[-1].alpha for r in result.results]
        exps = [r.trace.points[-1].exploitability for r in result.results]
        rows.append((config.name, float(np.mean(alphas)),
                     float(np.mean(exps))))
        print(f"{config.name}: mean alpha={rows[-1][1]:.4f} "
              f"mean exploitability={rows[-1][2]:.6f}")
    with open(out / "suite_summary.csv", "w") as fh:
        fh.write("setting,mean_alpha,mean_exploitability\n")
        for name, alpha, eps in rows:
            fh.write(f"{name},{alpha!r},{eps!r}\n")
    print(f"wrote {out / 'suite_summary.csv'}")
    return 0


def _cmd_eval(args) -> int:
    game = build_game(args.game)
    profiles = [load_strategy(path) for path in args.strategy]
    if len(profiles) == 1:
        report = exploitability(game, profiles[0])
        per = ", ".join(f"{v:.6f}" for v in report.per_player)
        print(f"exploitability: aggregate={report.aggregate:.6f} "
              f"per-player=[{per}]")
        return 0
    result = head_to_head(game, profiles,
                          seat_permutations=args.seat_permutations)
    for agent, value in enumerate(result.per_agent):
        print(f"agent {agent} ({args.strategy[agent]}): "
              f"expected payoff {value:+.6f}")
    return 0


def _cmd_style(args) -> int:
    game = build_game(args.game)
    profile = load_strategy(args.strategy)
    if args.first_decision is not None:
        keys = first_decision_infosets(game, args.first_decision)
    elif args.infosets:
        keys = [k for part in args.infosets for k in part.split(",") if k]
    else:
        raise SystemExit("give --infosets or --first-decision")
    metrics = evaluation.style_metrics(game, profile, keys)
    dist = ", ".join(f"{label}={p:.4f}" for label, p in
                     zip(metrics.action_labels, metrics.distribution))
    print(f"infosets: {', '.join(metrics.infosets)}")
    print(f"reach-weighted action distribution: {dist}")
    return 0


def _add_solver_flags(parser) -> None:
    parser.add_argument("--algo", default="CFR",
                        choices=("CFR", "PrefCFR_RM", "PrefCFR_BR",
                                 "MCCFR_External"))
    parser.add_argument("--iters", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--init", default="uniform",
                        choices=("uniform", "random"))
    parser.add_argument("--delta", action="append", metavar="SPEC",
                        help="preference degree, [INFOSET:]ACTION=VALUE")
    parser.add_argument("--beta", action="append", metavar="SPEC",
                        help="regret threshold, [INFOSET=]VALUE")
    parser.add_argument("--checkpoints", default="default",
                        help="default | all | integer stride")
    parser.add_argument("--strict-bounds", action="store_true")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="prefcfr",
        description="Preference-steered regret-minimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="single solver run")
    p.add_argument("--game", default="kuhn", choices=GAME_NAMES)
    _add_solver_flags(p)
    p.add_argument("--normal-form", action="store_true",
                   help="solve the matrix form instead of the tree form")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock times (breaks rerun identity)")
    p.add_argument("--out", default="out/solve")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("experiment", help="run matrix from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None,
                   help="override the config's output directory")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("suite-kuhn",
                       help="six preference settings plus vanilla baseline")
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="out/suite_kuhn")
    p.set_defaults(func=_cmd_suite_kuhn)

    p = sub.add_parser("eval", help="evaluate stored strategy dumps")
    p.add_argument("--game", default="kuhn", choices=GAME_NAMES)
    p.add_argument("--strategy", action="append", required=True,
                   help="strategy dump path; repeat for head-to-head")
    p.add_argument("--seat-permutations", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("style", help="action distribution of a dump")
    p.add_argument("--game", default="small_poker", choices=GAME_NAMES)
    p.add_argument("--strategy", required=True)
    p.add_argument("--infosets", action="append",
                   help="comma-separated infoset keys")
    p.add_argument("--first-decision", type=int, default=None,
                   metavar="PLAYER",
                   help="use the player's first-decision infosets")
    p.set_defaults(func=_cmd_style)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
