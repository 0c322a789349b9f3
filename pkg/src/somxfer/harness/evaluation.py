from __future__ import annotations

import numpy as np

from somxfer.agent import TaskValueFunction


def evaluate_policy(env, task, vf: TaskValueFunction, n_starts: int = 30, n_steps: int = 100,
                    seed=0) -> float:
    """Average undiscounted return of the greedy policy from random free starts.

    Each start acts greedily for up to ``n_steps`` steps, stopping early on
    reaching the goal. All starts are simulated together.
    """
    rng = np.random.default_rng(seed)
    xy = env.sample_free(rng, n_starts)
    m = vf.matrix
    returns = np.zeros(n_starts)
    alive = np.ones(n_starts, dtype=bool)
    for _ in range(n_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        phi = env.features_batch(xy[idx])
        actions = np.argmax(phi @ m.T, axis=1)
        nxt, collided = env.step_batch(xy[idx], actions)
        returns[idx] += env.reward_batch(task, nxt, collided)
        xy[idx] = nxt
        alive[idx] = ~env.in_goal_batch(task, nxt)
    return float(returns.mean())
