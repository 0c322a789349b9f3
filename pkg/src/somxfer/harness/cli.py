"""Command-line entry point: ``somxfer <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from somxfer.agent import MODES, LearningParams, PprParams, learn_task
from somxfer.env import default_world, load_world
from somxfer.gsom import GsomParams, incorporate_task, random_grid
from somxfer.harness import experiments as ex
from somxfer.harness.evaluation import evaluate_policy
from somxfer.harness.persistence import (load_som, load_value_function, save_som,
                                         save_value_function, write_csv)
from somxfer.harness.seeding import int_seed, rng_for

log = logging.getLogger("somxfer")


def _out_dir(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(os.environ.get("SOMXFER_OUT", "results"))


def _env(args):
    return default_world() if args.world is None else load_world(args.world)


def _config(args) -> ex.ExperimentConfig:
    if args.config is not None:
        cfg = ex.ExperimentConfig.load(args.config)
    elif args.paper_scale:
        cfg = ex.ExperimentConfig.paper_scale()
    else:
        cfg = ex.ExperimentConfig()
    overrides = {}
    for name in ("n_runs", "n_episodes", "seed", "world"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        doc = cfg.to_dict()
        doc.update(overrides)
        cfg = ex.ExperimentConfig.from_dict(doc)
    return cfg


def cmd_discover(args) -> int:
    env = _env(args)
    model, tasks = ex.discover_tasks(env, args.steps, args.seed, k_std=args.k_std, var0=args.var0,
                                     ignore_background=not args.keep_background)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "clusters.json").write_text(json.dumps(model.to_dict()) + "\n", encoding="utf-8")
    n_stim = env.n_stimuli
    header = ["task_id", "count"] + [f"centroid_{j}" for j in range(n_stim)] + [f"halfwidth_{j}" for j in range(n_stim)]
    counts = {f"c{k}": c.count for k, c in enumerate(model.clusters)}
    rows = [[t.task_id, counts[t.task_id], *t.centroid, *t.halfwidth] for t in tasks]
    write_csv(out / "tasks.csv", header, rows)
    log.info("%d clusters, %d tasks written to %s", len(model), len(tasks), out)
    return 0


def cmd_learn(args) -> int:
    env = _env(args)
    params = LearningParams(epsilon=args.epsilon, beta=args.beta)
    som = load_som(args.som_in) if args.som_in else None
    library = [load_value_function(p) for p in args.library]
    if args.strategy in ("som", "eps-beta") and som is None:
        raise SystemExit(f"strategy {args.strategy!r} needs --som-in")
    if args.strategy == "ppr" and not library:
        raise SystemExit("strategy 'ppr' needs at least one --library value function")
    evaluator = (lambda vf: evaluate_policy(env, args.task, vf, args.eval_starts, args.eval_steps,
                                            int_seed(args.seed, "eval", args.task)))
    vf, rec = learn_task(env, args.task, params, args.episodes, rng_for(args.seed, "learn", args.task),
                         mode=args.strategy, som=som, library=library, ppr=PprParams(),
                         evaluator=evaluator, strategy=args.strategy)
    out = _out_dir(args)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    path = out / "runs" / ex.run_csv_name(rec.task, rec.strategy, rec.run)
    path.write_text(rec.to_csv(), encoding="utf-8")
    save_value_function(vf, args.vf_out or out / "vf" / f"task-{args.task}_{args.strategy}.json")
    if args.som_out:
        gp = GsomParams()
        base = som if som is not None else random_grid(gp.initial_side, vf.weights.size,
                                                       gp.growth_threshold, rng_for(args.seed, "som-init"))
        save_som(incorporate_task(base, vf.weights, gp, int_seed(args.seed, "som", args.task)), args.som_out)
    ev = rec.column("eval_return")
    log.info("task %s (%s): final eval %.1f -> %s", args.task, args.strategy,
             ev[-min(50, ev.size):].mean(), path)
    return 0


def cmd_experiment(args) -> int:
    cfg = _config(args)
    res = ex.run_transfer_experiment(cfg, _out_dir(args))
    log.info("%d run records written to %s", len(res.records), res.out_dir)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    res = ex.run_epsilon_sweep(cfg, args.epsilons, _out_dir(args))
    log.info("%d exploration rates written to %s", len(res), _out_dir(args) / "epsilon_sweep.csv")
    return 0


def cmd_compare_ppr(args) -> int:
    cfg = _config(args)
    res = ex.run_ppr_comparison(cfg, _out_dir(args))
    log.info("comparison written to %s", res.out_dir / "ppr_comparison.csv")
    return 0


def cmd_scaling(args) -> int:
    out = _out_dir(args) / "scaling.csv"
    ex.run_scaling_experiment(args.tasks, args.gt, args.seed, env=_env(args), synthetic=args.synthetic,
                              out_path=out)
    log.info("scaling curves written to %s", out)
    return 0


def cmd_eval(args) -> int:
    env = _env(args)
    vf = load_value_function(args.vf)
    print(repr(evaluate_policy(env, args.task, vf, args.starts, args.steps, args.seed)))
    return 0


def cmd_som_summary(args) -> int:
    grid = load_som(args.som)
    weights = {}
    for spec in args.vf:
        task_id, sep, path = spec.partition("=")
        if not sep:
            raise SystemExit(f"--vf expects TASK=PATH, got {spec!r}")
        weights[task_id] = load_value_function(path).weights
    out = _out_dir(args) / "som_summary.csv"
    write_csv(out, ex.SUMMARY_COLUMNS, ex.som_summary(grid, weights))
    log.info("summary of %d nodes written to %s", grid.n_nodes, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default: $SOMXFER_OUT or ./results)")
    common.add_argument("--world", help="world layout JSON (default: bundled layout)")
    common.add_argument("--quiet", action="store_true", help="suppress progress lines on stderr")

    p = argparse.ArgumentParser(prog="somxfer", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("discover", parents=[common], help="explore and cluster stimulus vectors")
    d.add_argument("--steps", type=int, default=50000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--k-std", type=float, default=2.0)
    d.add_argument("--var0", type=float, default=0.05)
    d.add_argument("--keep-background", action="store_true")
    d.set_defaults(func=cmd_discover)

    ln = sub.add_parser("learn", parents=[common], help="learn a single task")
    ln.add_argument("--task", required=True)
    ln.add_argument("--strategy", choices=MODES, default="egreedy")
    ln.add_argument("--epsilon", type=float, default=0.3)
    ln.add_argument("--beta", type=float, default=0.0)
    ln.add_argument("--episodes", type=int, default=200)
    ln.add_argument("--seed", type=int, default=0)
    ln.add_argument("--som-in")
    ln.add_argument("--som-out")
    ln.add_argument("--vf-out")
    ln.add_argument("--library", action="append", default=[], help="value function JSON (repeatable)")
    ln.add_argument("--eval-starts", type=int, default=30)
    ln.add_argument("--eval-steps", type=int, default=100)
    ln.set_defaults(func=cmd_learn)

    for name, func, text in (("experiment", cmd_experiment, "config-driven transfer sweep"),
                             ("sweep", cmd_sweep, "transfer experiment at several exploration rates"),
                             ("compare-ppr", cmd_compare_ppr, "map advice versus policy reuse")):
        e = sub.add_parser(name, parents=[common], help=text)
        e.add_argument("--config", help="ExperimentConfig JSON")
        e.add_argument("--paper-scale", action="store_true",
                       help="1000 episodes, 10 runs, 100 evaluation starts")
        e.add_argument("--runs", dest="n_runs", type=int)
        e.add_argument("--episodes", dest="n_episodes", type=int)
        e.add_argument("--seed", type=int)
        if name == "sweep":
            e.add_argument("--epsilons", type=float, nargs="+", default=list(ex.DEFAULT_EPSILONS))
        e.set_defaults(func=func)

    s = sub.add_parser("scaling", parents=[common], help="map size versus tasks incorporated")
    s.add_argument("--tasks", type=int, default=100)
    s.add_argument("--gt", type=float, nargs="+", default=[0.2, 0.3, 0.5])
    s.add_argument("--synthetic", action="store_true", help="mix a few learned anchors instead of learning every task")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_scaling)

    v = sub.add_parser("eval", parents=[common], help="greedy evaluation of a saved value function")
    v.add_argument("--vf", required=True)
    v.add_argument("--task", required=True)
    v.add_argument("--starts", type=int, default=30)
    v.add_argument("--steps", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_eval)

    m = sub.add_parser("som-summary", parents=[common], help="best-matching task per map node")
    m.add_argument("--som", required=True)
    m.add_argument("--vf", action="append", required=True, metavar="TASK=PATH")
    m.set_defaults(func=cmd_som_summary)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"somxfer {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
