"""Multi-run experiments: sequential transfer, policy-reuse comparison, map scaling."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from somxfer.agent import (MODES, RUN_COLUMNS, LearningParams, PprParams, RunRecord,
                           TaskValueFunction, learn_task)
from somxfer.core import cosine_to_many
from somxfer.discovery import ClusterModel, explore, tasks_from_clusters
from somxfer.env import Circle, NavEnv, default_world, load_world
from somxfer.gsom import GsomParams, SomGrid, incorporate_task, random_grid
from somxfer.harness.evaluation import evaluate_policy
from somxfer.harness.persistence import save_som, save_value_function, write_csv
from somxfer.harness.seeding import int_seed, rng_for

log = logging.getLogger("somxfer")

AGGREGATE_COLUMNS = ("task", "strategy", "episode", "n_runs", "mean_eval_return", "std_eval_return",
                     "mean_online_return", "std_online_return", "mean_steps", "mean_best_cosine")
PPR_COLUMNS = ("episode", "strategy", "mean_return", "std_return")
SCALING_COLUMNS = ("growth_threshold", "tasks_incorporated", "node_count")
SUMMARY_COLUMNS = ("node_row", "node_col", "task_id", "similarity")
SWEEP_COLUMNS = ("epsilon",) + AGGREGATE_COLUMNS
DEFAULT_EPSILONS = (0.3, 0.5, 0.7, 1.0)


@dataclass
class ExperimentConfig:
    world: str | None = None
    gsom: GsomParams = field(default_factory=GsomParams)
    learning: LearningParams = field(default_factory=LearningParams)
    ppr: PprParams | None = None
    strategies: tuple[str, ...] = ("egreedy", "som")
    tasks: tuple[str, ...] | None = ("1", "2", "3", "4", "5")
    n_episodes: int = 200
    n_runs: int = 5
    eval_starts: int = 30
    eval_steps: int = 100
    seed: int = 0
    out_dir: str = "results"
    max_steps: int = 2000
    discovery_steps: int = 50000
    ignore_background: bool = True

    def __post_init__(self):
        self.strategies = tuple(self.strategies)
        if self.tasks is not None:
            self.tasks = tuple(str(t) for t in self.tasks)
            if not self.tasks:
                raise ValueError("tasks must be non-empty (or null to discover them)")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.n_episodes < 1:
            raise ValueError("n_episodes must be >= 1")
        if self.eval_starts < 1 or self.eval_steps < 1:
            raise ValueError("eval_starts and eval_steps must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        for s in self.strategies:
            if s not in MODES:
                raise ValueError(f"unknown strategy {s!r}; expected one of {MODES}")
        if self.world is not None and not Path(self.world).is_file():
            raise FileNotFoundError(f"world file not found: {self.world}")

    @classmethod
    def paper_scale(cls, **overrides) -> ExperimentConfig:
        kw = dict(n_episodes=1000, n_runs=10, eval_starts=100, eval_steps=100)
        kw.update(overrides)
        return cls(**kw)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["strategies"] = list(self.strategies)
        doc["tasks"] = None if self.tasks is None else list(self.tasks)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        kw = dict(doc)
        for name, typ in (("gsom", GsomParams), ("learning", LearningParams), ("ppr", PprParams)):
            if kw.get(name) is not None:
                kw[name] = typ(**kw[name])
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        return cls.from_dict(doc)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def env(self) -> NavEnv:
        return default_world() if self.world is None else load_world(self.world)


def discover_tasks(env: NavEnv, n_steps: int, seed, *, k_std: float = 2.0, var0: float = 0.05,
                   ignore_background: bool = True):
    """Random-walk exploration with online clustering of stimulus vectors.

    Returns ``(model, tasks)``.
    """
    model = ClusterModel(k_std=k_std, var0=var0)
    explore(env, model, n_steps, np.random.default_rng(seed))
    return model, tasks_from_clusters(model, ignore_background=ignore_background)


def _task_id(task) -> str:
    return task if isinstance(task, str) else task.task_id


def run_csv_name(task: str, strategy: str, run: int) -> str:
    return f"task-{task}_{strategy}_run-{run}.csv"


def _write_run(out: Path, rec: RunRecord) -> None:
    rows = ([r.episode, r.steps, r.online_return, r.eval_return, r.best_cosine, r.winner, r.som_side]
            for r in rec.rows)
    write_csv(out / "runs" / run_csv_name(rec.task, rec.strategy, rec.run), RUN_COLUMNS, rows)


def aggregate_rows(records: Sequence[RunRecord]) -> list[list]:
    """Per (task, strategy, episode) mean and population std across runs."""
    groups: dict[tuple[str, str], list[RunRecord]] = {}
    for rec in records:
        groups.setdefault((rec.task, rec.strategy), []).append(rec)
    rows = []
    for (task, strategy), recs in groups.items():
        recs = sorted(recs, key=lambda r: r.run)
        ev = np.stack([r.column("eval_return") for r in recs])
        on = np.stack([r.column("online_return") for r in recs])
        st = np.stack([r.column("steps") for r in recs])
        cs = np.stack([r.column("best_cosine") for r in recs])
        for e in range(ev.shape[1]):
            rows.append([task, strategy, e + 1, len(recs), float(ev[:, e].mean()), float(ev[:, e].std()),
                         float(on[:, e].mean()), float(on[:, e].std()), float(st[:, e].mean()),
                         float(cs[:, e].mean())])
    return rows


@dataclass
class TransferResult:
    records: list[RunRecord]
    soms: dict[tuple[str, int], SomGrid]
    out_dir: Path

    def get(self, task: str, strategy: str, run: int) -> RunRecord:
        for r in self.records:
            if (r.task, r.strategy, r.run) == (task, strategy, run):
                return r
        raise KeyError((task, strategy, run))


def _evaluator(env, task, cfg: ExperimentConfig, seed):
    return lambda vf: evaluate_policy(env, task, vf, cfg.eval_starts, cfg.eval_steps, seed)


def run_transfer_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> TransferResult:
    """Learn the task sequence once per (run, strategy), folding each result into a map.

    Every strategy keeps a map so the advice-quality columns are comparable.
    Random streams are keyed by run, task and purpose but not by strategy, so
    strategies see matched start states and evaluation points.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    env = cfg.env()
    dim = env.n_actions * env.n_features
    records: list[RunRecord] = []
    soms: dict[tuple[str, int], SomGrid] = {}
    for run in range(cfg.n_runs):
        if cfg.tasks is None:
            _, tasks = discover_tasks(env, cfg.discovery_steps, int_seed(cfg.seed, run, "discover"),
                                      ignore_background=cfg.ignore_background)
            log.info("run %d: discovered %d tasks", run, len(tasks))
        else:
            tasks = list(cfg.tasks)
        for strategy in cfg.strategies:
            som = random_grid(cfg.gsom.initial_side, dim, cfg.gsom.growth_threshold,
                              rng_for(cfg.seed, run, "som-init"))
            library: list[TaskValueFunction] = []
            for task in tasks:
                tid = _task_id(task)
                mode = strategy
                if mode == "ppr" and not library:
                    mode = "egreedy"
                vf, rec = learn_task(
                    env, task, cfg.learning, cfg.n_episodes, rng_for(cfg.seed, run, "learn", tid),
                    mode=mode, som=som, library=library, ppr=cfg.ppr, max_steps=cfg.max_steps,
                    evaluator=_evaluator(env, task, cfg, int_seed(cfg.seed, run, "eval", tid)),
                    strategy=strategy, run=run)
                records.append(rec)
                _write_run(out, rec)
                save_value_function(vf, out / "vf" / f"task-{tid}_{strategy}_run-{run}.json")
                som = incorporate_task(som, vf.weights, cfg.gsom, int_seed(cfg.seed, run, "som", tid))
                library.append(vf)
                ev = rec.column("eval_return")
                log.info("run %d %s task %s: final eval %.1f, map side %d",
                         run, strategy, tid, ev[-min(50, ev.size):].mean(), som.side)
            soms[(strategy, run)] = som
            save_som(som, out / "som" / f"{strategy}_run-{run}.json")
    write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS, aggregate_rows(records))
    return TransferResult(records, soms, out)


def run_epsilon_sweep(cfg: ExperimentConfig, epsilons: Sequence[float] = DEFAULT_EPSILONS,
                      out_dir: str | Path | None = None) -> dict[float, TransferResult]:
    """Repeat the transfer experiment once per exploration rate.

    Each rate writes its own ``epsilon-<value>`` subdirectory; the combined
    aggregate goes to ``epsilon_sweep.csv`` with a leading ``epsilon`` column.
    """
    if not epsilons:
        raise ValueError("epsilons must be non-empty")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    results, rows = {}, []
    for eps in epsilons:
        learning = dataclasses.replace(cfg.learning, epsilon=float(eps))
        sub = dataclasses.replace(cfg, learning=learning)
        res = run_transfer_experiment(sub, out / f"epsilon-{float(eps)!r}")
        results[float(eps)] = res
        rows.extend([float(eps), *r] for r in aggregate_rows(res.records))
    write_csv(out / "epsilon_sweep.csv", SWEEP_COLUMNS, rows)
    return results


@dataclass
class PprComparison:
    records: list[RunRecord]
    rows: list[list]
    out_dir: Path


def run_ppr_comparison(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> PprComparison:
    """Learn the source tasks once per run, then the last task with map advice and with policy reuse.

    Source tasks are learned epsilon-greedily; each is folded into the map
    and appended to the reuse library, so both target learners draw on the
    same prior knowledge.
    """
    if cfg.tasks is None or len(cfg.tasks) < 2:
        raise ValueError("policy-reuse comparison needs an explicit task list with at least 2 tasks")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    env = cfg.env()
    dim = env.n_actions * env.n_features
    *sources, target = cfg.tasks
    ppr = cfg.ppr or PprParams()
    records: list[RunRecord] = []
    for run in range(cfg.n_runs):
        som = random_grid(cfg.gsom.initial_side, dim, cfg.gsom.growth_threshold,
                          rng_for(cfg.seed, run, "som-init"))
        library = []
        for tid in sources:
            vf, _ = learn_task(env, tid, cfg.learning, cfg.n_episodes, rng_for(cfg.seed, run, "learn", tid),
                               mode="egreedy", max_steps=cfg.max_steps)
            som = incorporate_task(som, vf.weights, cfg.gsom, int_seed(cfg.seed, run, "som", tid))
            library.append(vf)
        for strategy in ("som", "ppr"):
            _, rec = learn_task(
                env, target, cfg.learning, cfg.n_episodes, rng_for(cfg.seed, run, "learn", target),
                mode=strategy, som=som, library=library, ppr=ppr, max_steps=cfg.max_steps,
                evaluator=_evaluator(env, target, cfg, int_seed(cfg.seed, run, "eval", target)),
                strategy=strategy, run=run)
            records.append(rec)
            _write_run(out, rec)
            log.info("run %d %s on task %s: final eval %.1f", run, strategy, target,
                     rec.column("eval_return")[-min(50, cfg.n_episodes):].mean())
    rows = []
    for strategy in ("som", "ppr"):
        ev = np.stack([r.column("eval_return") for r in records if r.strategy == strategy])
        for e in range(ev.shape[1]):
            rows.append([e + 1, strategy, float(ev[:, e].mean()), float(ev[:, e].std())])
    write_csv(out / "ppr_comparison.csv", PPR_COLUMNS, rows)
    return PprComparison(records, rows, out)


def _learn_random_goal(env: NavEnv, rng: np.random.Generator, params: LearningParams,
                       n_episodes: int, radius: float, max_steps: int) -> np.ndarray:
    centre = env.sample_free(rng)[0]
    goal = Circle(float(centre[0]), float(centre[1]), radius)
    vf, _ = learn_task(env, goal, params, n_episodes, rng, mode="egreedy", max_steps=max_steps)
    return vf.weights


def task_weight_stream(env: NavEnv, n_tasks: int, seed, *, synthetic: bool = True, n_anchors: int = 4,
                       n_episodes: int = 20, learning: LearningParams | None = None,
                       goal_radius: float = 3.0, max_steps: int = 2000) -> np.ndarray:
    """Task weight vectors for the scaling study, shape ``(n_tasks, dim)``.

    Each vector is learned on a randomly placed goal with a small episode
    budget, or, with ``synthetic``, drawn as a Dirichlet-weighted convex
    mixture of ``n_anchors`` such learned vectors.
    """
    learning = learning or LearningParams()
    n_learned = n_anchors if synthetic else n_tasks
    learned = np.stack([
        _learn_random_goal(env, rng_for(seed, "scaling", "task", k), learning, n_episodes,
                           goal_radius, max_steps)
        for k in range(n_learned)])
    if not synthetic:
        return learned
    mix = rng_for(seed, "scaling", "mix").dirichlet(np.ones(n_anchors), size=n_tasks)
    return mix @ learned


def run_scaling_experiment(n_tasks: int, gts: Sequence[float], seed=0, *, env: NavEnv | None = None,
                           gsom: GsomParams | None = None, synthetic: bool = True,
                           weights: np.ndarray | None = None, out_path: str | Path | None = None,
                           **stream_kw) -> list[list]:
    """Node count after each incorporated task, for every growth threshold.

    All thresholds see the same task stream and the same initial map.
    Returns rows ``[growth_threshold, tasks_incorporated, node_count]``.
    """
    if n_tasks < 1:
        raise ValueError("n_tasks must be >= 1")
    env = env or default_world()
    gsom = gsom or GsomParams()
    if weights is None:
        weights = task_weight_stream(env, n_tasks, seed, synthetic=synthetic, **stream_kw)
    weights = np.asarray(weights, dtype=np.float64)[:n_tasks]
    rows = []
    for gt in gts:
        p = dataclasses.replace(gsom, growth_threshold=float(gt))
        som = random_grid(p.initial_side, weights.shape[1], p.growth_threshold,
                          rng_for(seed, "scaling", "som-init"))
        for k, w in enumerate(weights):
            som = incorporate_task(som, w, p, int_seed(seed, "scaling", "som", k))
            rows.append([float(gt), k + 1, som.n_nodes])
        log.info("growth threshold %g: %d nodes after %d tasks", gt, som.n_nodes, len(weights))
    if out_path is not None:
        write_csv(out_path, SCALING_COLUMNS, rows)
    return rows


def som_summary(grid: SomGrid, task_weights: dict[str, np.ndarray]) -> list[list]:
    """For every node, the stored task it resembles most and the cosine similarity."""
    if not task_weights:
        raise ValueError("no task weights given")
    ids = list(task_weights)
    mat = np.stack([np.asarray(task_weights[k], dtype=np.float64) for k in ids])
    rows = []
    for n in range(grid.n_nodes):
        sims = cosine_to_many(grid.nodes[n], mat)
        k = int(np.argmax(sims))
        rows.append([n // grid.side, n % grid.side, ids[k], float(sims[k])])
    return rows
