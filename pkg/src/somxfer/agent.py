"""Q(lambda) learning with linear function approximation and SOM-guided exploration.

A task's knowledge is a single weight vector laid out in action blocks:
block ``a`` (``weights[a * n_features:(a + 1) * n_features]``) holds the
weights of action ``a``. That vector is what the map stores and what the
cosine similarity compares.

Exploration modes for :func:`select_action`:

``egreedy``
    random action with probability epsilon, otherwise greedy.
``som``
    with probability epsilon act greedily with respect to the map node most
    similar to the current weights, otherwise greedy.
``eps-beta``
    random with probability epsilon, map advice with probability beta,
    greedy otherwise.
``ppr``
    probabilistic policy reuse over a library of earlier value functions
    (see :func:`ppr_select_action`).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from somxfer.core import NORM_FLOOR
from somxfer.gsom import SomGrid

MODES = ("egreedy", "som", "eps-beta", "ppr")

GREEDY = "greedy"
RANDOM = "random"
SOM = "som"
LIBRARY = "library"


@dataclass
class LearningParams:
    alpha: float = 0.3
    gamma: float = 0.9
    lam: float = 0.9
    epsilon: float = 0.3
    beta: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if not 0 <= self.lam <= 1:
            raise ValueError("lam must be in [0, 1]")
        if not (0 <= self.epsilon <= 1 and 0 <= self.beta <= 1):
            raise ValueError("epsilon and beta must be in [0, 1]")
        if self.epsilon + self.beta > 1 + 1e-12:
            raise ValueError("epsilon + beta must not exceed 1")


@dataclass
class PprParams:
    psi0: float = 1.0
    nu: float = 0.95
    tau0: float = 0.0
    dtau: float = 0.05

    def __post_init__(self):
        if not 0 <= self.psi0 <= 1:
            raise ValueError("psi0 must be in [0, 1]")
        if not 0 < self.nu <= 1:
            raise ValueError("nu must be in (0, 1]")
        if self.dtau < 0:
            raise ValueError("dtau must be >= 0")


@dataclass
class TaskValueFunction:
    weights: np.ndarray
    n_actions: int
    n_features: int

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.n_actions * self.n_features,):
            raise ValueError(f"weights have shape {self.weights.shape}, expected "
                             f"({self.n_actions} * {self.n_features},)")

    @classmethod
    def zeros(cls, n_actions: int, n_features: int) -> TaskValueFunction:
        return cls(np.zeros(n_actions * n_features), n_actions, n_features)

    @property
    def matrix(self) -> np.ndarray:
        """``(n_actions, n_features)`` view sharing memory with ``weights``."""
        return self.weights.reshape(self.n_actions, self.n_features)

    def copy(self) -> TaskValueFunction:
        return TaskValueFunction(self.weights.copy(), self.n_actions, self.n_features)


def q_values(vf: TaskValueFunction, features) -> np.ndarray:
    phi = np.asarray(features, dtype=np.float64)
    if phi.shape != (vf.n_features,):
        raise ValueError(f"features have shape {phi.shape}, expected ({vf.n_features},)")
    return vf.matrix @ phi


def greedy_action(vf: TaskValueFunction, features) -> int:
    return int(np.argmax(q_values(vf, features)))


class SomAdvisor:
    """Read-only view of a map for action advice.

    Node norms are cached; the map does not change while a task is learned.
    """

    def __init__(self, som: SomGrid, n_actions: int):
        if som.dim % n_actions:
            raise ValueError(f"map dimension {som.dim} is not a multiple of {n_actions} actions")
        self.grid = som
        self.nodes = som.nodes
        self.n_actions = n_actions
        self.n_features = som.dim // n_actions
        self.norms = np.linalg.norm(self.nodes, axis=1)
        self._ok = self.norms >= NORM_FLOOR

    def similarities(self, w: np.ndarray) -> np.ndarray:
        out = np.zeros(self.nodes.shape[0])
        nw = float(np.linalg.norm(w))
        if nw < NORM_FLOOR:
            return out
        out[self._ok] = (self.nodes[self._ok] @ w) / (self.norms[self._ok] * nw)
        return out

    def winner(self, w: np.ndarray) -> tuple[int, float]:
        sims = self.similarities(w)
        k = int(np.argmax(sims))
        return k, float(sims[k])

    def node_action(self, k: int, phi: np.ndarray) -> int:
        q = self.nodes[k].reshape(self.n_actions, self.n_features) @ phi
        return int(np.argmax(q))

    def advise(self, w: np.ndarray, phi: np.ndarray) -> int:
        return self.node_action(self.winner(w)[0], phi)


def _advisor(som, n_actions: int) -> SomAdvisor | None:
    if som is None or isinstance(som, SomAdvisor):
        return som
    return SomAdvisor(som, n_actions)


def select_action(vf: TaskValueFunction, features, som, params: LearningParams,
                  rng: np.random.Generator, mode: str = "som") -> tuple[int, str]:
    """Pick an action; returns ``(action, source)``.

    ``source`` is ``"greedy"``, ``"random"`` or ``"som"``. Exactly one
    uniform draw decides the branch, so runs that never explore consume the
    same random stream regardless of mode.
    """
    phi = np.asarray(features, dtype=np.float64)
    if mode in ("som", "eps-beta"):
        som = _advisor(som, vf.n_actions)
        if som is None:
            raise ValueError(f"mode {mode!r} requires a map")
        if som.nodes.shape[1] != vf.weights.shape[0]:
            raise ValueError("map dimension does not match the value function")
    return _select(mode, vf, phi, None, som, params, rng)


def _select(mode, vf, phi, q, advisor, params, rng) -> tuple[int, str]:
    # q: cached vf.matrix @ phi, or None
    u = rng.random()
    if mode == "egreedy":
        if u < params.epsilon:
            return int(rng.integers(vf.n_actions)), RANDOM
    elif mode == "som":
        if u < params.epsilon:
            return advisor.advise(vf.weights, phi), SOM
    elif mode == "eps-beta":
        if u < params.epsilon:
            return int(rng.integers(vf.n_actions)), RANDOM
        if u < params.epsilon + params.beta:
            return advisor.advise(vf.weights, phi), SOM
    else:
        raise ValueError(f"unknown exploration mode {mode!r}")
    if q is None:
        q = vf.matrix @ phi
    return int(np.argmax(q)), GREEDY


def td_update(vf: TaskValueFunction, trace: np.ndarray, features, action: int, reward: float,
              next_features, terminal: bool, next_greedy: bool,
              params: LearningParams) -> float:
    """Watkins Q(lambda) step with replacing traces. Updates ``vf`` and ``trace`` in place.

    ``trace`` has the same layout as ``vf.weights``. ``next_greedy`` says
    whether the action about to be taken in the next state is greedy; a
    non-greedy choice cuts the trace. Returns the TD error.
    """
    m = vf.matrix
    phi = np.asarray(features, dtype=np.float64)
    q_sa = float(m[action] @ phi)
    if terminal:
        delta = reward - q_sa
    else:
        delta = reward + params.gamma * float(np.max(m @ np.asarray(next_features))) - q_sa
    _apply_td(vf, trace, phi, action, delta, terminal or not next_greedy, params)
    return delta


def _apply_td(vf, trace, phi, action, delta, cut, params) -> None:
    tr = trace.reshape(vf.n_actions, vf.n_features)
    np.maximum(tr[action], phi, out=tr[action])
    vf.weights += (params.alpha * delta) * trace
    if cut:
        trace[:] = 0.0
    else:
        trace *= params.gamma * params.lam


# --- probabilistic policy reuse -------------------------------------------

def ppr_policy_probabilities(avg_returns, tau: float) -> np.ndarray:
    """Softmax over library policies with inverse temperature ``tau``.

    ``tau == 0`` gives the uniform distribution; larger values concentrate
    on the policies with the best average return.
    """
    w = np.asarray(avg_returns, dtype=np.float64)
    if w.size == 0:
        raise ValueError("empty policy library")
    z = tau * (w - w.max())
    p = np.exp(z)
    return p / p.sum()


def ppr_select_action(current_vf: TaskValueFunction, library: Sequence[TaskValueFunction], features,
                      psi: float, rng: np.random.Generator, policy: int = 0,
                      epsilon: float = 0.0) -> tuple[int, str]:
    """One pi-reuse step: reuse ``library[policy]`` with probability ``psi``, else epsilon-greedy."""
    if len(library) == 0:
        raise ValueError("no knowledge base: empty policy library")
    phi = np.asarray(features, dtype=np.float64)
    if rng.random() < psi:
        return int(np.argmax(library[policy].matrix @ phi)), LIBRARY
    if rng.random() < epsilon:
        return int(rng.integers(current_vf.n_actions)), RANDOM
    return int(np.argmax(current_vf.matrix @ phi)), GREEDY


@dataclass
class _PprState:
    library: Sequence[TaskValueFunction]
    params: PprParams
    avg_return: np.ndarray = None
    uses: np.ndarray = None
    policy: int = 0
    psi: float = 0.0

    def __post_init__(self):
        if len(self.library) == 0:
            raise ValueError("no knowledge base: empty policy library")
        self.avg_return = np.zeros(len(self.library))
        self.uses = np.zeros(len(self.library), dtype=np.int64)

    def begin_episode(self, episode: int, rng: np.random.Generator):
        tau = self.params.tau0 + self.params.dtau * episode
        p = ppr_policy_probabilities(self.avg_return, tau)
        self.policy = int(rng.choice(len(p), p=p))
        self.psi = self.params.psi0 * self.params.nu ** episode

    def end_episode(self, ret: float):
        k = self.policy
        self.avg_return[k] = (self.avg_return[k] * self.uses[k] + ret) / (self.uses[k] + 1)
        self.uses[k] += 1


# --- episode loop --------------------------------------------------------

@dataclass
class EpisodeRow:
    episode: int
    steps: int
    online_return: float
    eval_return: float
    best_cosine: float
    winner: int
    som_side: int


RUN_COLUMNS = ("episode", "steps", "online_return", "eval_return", "best_cosine", "winner", "som_side")


@dataclass
class RunRecord:
    task: str
    strategy: str
    run: int
    rows: list[EpisodeRow] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for r in self.rows:
            w.writerow([r.episode, r.steps, repr(r.online_return), repr(r.eval_return),
                        repr(r.best_cosine), r.winner, r.som_side])
        return buf.getvalue()


def _choose(mode, vf, phi, q, advisor, params, rng, ppr_state):
    if mode == "ppr":
        return ppr_select_action(vf, ppr_state.library, phi, ppr_state.psi, rng,
                                 ppr_state.policy, params.epsilon)
    return _select(mode, vf, phi, q, advisor, params, rng)


def learn_task(env, task, params: LearningParams, n_episodes: int, rng: np.random.Generator, *,
               mode: str = "egreedy", som: SomGrid | None = None,
               library: Sequence[TaskValueFunction] | None = None, ppr: PprParams | None = None,
               max_steps: int = 2000, evaluator: Callable[[TaskValueFunction], float] | None = None,
               vf: TaskValueFunction | None = None, strategy: str | None = None,
               run: int = 0) -> tuple[TaskValueFunction, RunRecord]:
    """Learn one task from scratch (or from ``vf``) for ``n_episodes`` episodes.

    ``env`` must provide ``n_actions``, ``n_features``, ``sample_free``,
    ``step``, ``full_features``, ``is_terminal`` and ``reward``. Each
    episode starts at a random free position outside the goal and ends on
    reaching the goal or after ``max_steps`` steps. ``evaluator`` (if given)
    is called after every episode; without it the eval column is NaN.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown exploration mode {mode!r}")
    task_id = task if isinstance(task, str) else getattr(task, "task_id", type(task).__name__)
    task = env.task(task) if hasattr(env, "task") else task
    vf = TaskValueFunction.zeros(env.n_actions, env.n_features) if vf is None else vf
    advisor = _advisor(som, env.n_actions)
    if mode in ("som", "eps-beta") and advisor is None:
        raise ValueError(f"mode {mode!r} requires a map")
    ppr_state = None
    if mode == "ppr":
        ppr_state = _PprState(library or [], ppr or PprParams())
    record = RunRecord(str(task_id), strategy or mode, run)
    trace = np.zeros_like(vf.weights)
    m = vf.matrix

    for ep in range(n_episodes):
        if ppr_state is not None:
            ppr_state.begin_episode(ep, rng)
        s = env.sample_free(rng, 1, exclude=task)[0]
        phi = env.full_features(s)
        a, _ = _choose(mode, vf, phi, None, advisor, params, rng, ppr_state)
        trace[:] = 0.0
        ret = 0.0
        steps = 0
        while steps < max_steps:
            s2, collided = env.step(s, a)
            goal = env.is_terminal(task, s2)
            r = env.reward(task, s2, collided)
            ret += r
            steps += 1
            q_sa = float(m[a] @ phi)
            if goal:
                _apply_td(vf, trace, phi, a, r - q_sa, True, params)
                break
            phi2 = env.full_features(s2)
            # both the action choice and the TD target see the pre-update weights
            q2 = m @ phi2
            a2, _ = _choose(mode, vf, phi2, q2, advisor, params, rng, ppr_state)
            q_max = float(q2.max())
            _apply_td(vf, trace, phi, a, r + params.gamma * q_max - q_sa,
                      not q2[a2] >= q_max, params)
            s, phi, a = s2, phi2, a2
            if ppr_state is not None:
                ppr_state.psi *= ppr_state.params.nu
        if ppr_state is not None:
            ppr_state.end_episode(ret)

        eval_ret = float(evaluator(vf)) if evaluator is not None else math.nan
        if advisor is not None:
            k, c = advisor.winner(vf.weights)
            side = advisor.grid.side
        else:
            k, c, side = -1, 0.0, 0
        record.rows.append(EpisodeRow(ep + 1, steps, ret, eval_ret, c, k, side))
    return vf, record
