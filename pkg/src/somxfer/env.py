"""Continuous 2-D navigation world with binary features.

The agent state is an (x, y) position. Nine actions move it a fixed
distance along one of eight compass directions or keep it in place. The
feature vector is the stimulus-presence vector followed by a one-hot
encoding of the position.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol

import numpy as np

N_ACTIONS = 9
STAY = 8

_H = math.sqrt(0.5)
# E, NE, N, NW, W, SW, S, SE, stay
DIRECTIONS = np.array([
    [1.0, 0.0], [_H, _H], [0.0, 1.0], [-_H, _H],
    [-1.0, 0.0], [-_H, -_H], [0.0, -1.0], [_H, -_H],
    [0.0, 0.0],
])

REWARD_GOAL = 100.0
REWARD_COLLISION = -100.0
REWARD_LIVING = -10.0


@dataclass(frozen=True)
class Rect:
    """Axis-aligned obstacle; (x, y) is the lower-left corner."""

    x: float
    y: float
    w: float
    h: float


@dataclass(frozen=True)
class Circle:
    x: float
    y: float
    r: float

    def contains(self, env: NavEnv, xy) -> np.ndarray | bool:
        xy = np.asarray(xy, dtype=np.float64)
        d2 = (xy[..., 0] - self.x) ** 2 + (xy[..., 1] - self.y) ** 2
        return d2 <= self.r * self.r


class Task(Protocol):
    def contains(self, env: NavEnv, xy) -> np.ndarray | bool: ...


@dataclass(frozen=True)
class NavEnv:
    width: float = 100.0
    height: float = 100.0
    obstacles: tuple[Rect, ...] = ()
    stimuli: tuple[Circle, ...] = ()
    goals: dict[str, Circle] = field(default_factory=dict)
    bins_per_dim: int = 100
    dt: float = 0.2
    speed: float = 6.0
    feature_mode: str = "separable"
    tabular_bins: int = 20

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("world extent must be positive")
        if self.bins_per_dim < 1 or self.tabular_bins < 1:
            raise ValueError("bin counts must be >= 1")
        if self.dt <= 0 or self.speed <= 0:
            raise ValueError("dt and speed must be positive")
        if self.feature_mode not in ("separable", "tabular"):
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")
        for name, c in [*(("stimulus", s) for s in self.stimuli),
                        *((f"goal {k}", g) for k, g in self.goals.items())]:
            if not (0 <= c.x <= self.width and 0 <= c.y <= self.height):
                raise ValueError(f"{name} centre ({c.x}, {c.y}) lies outside the world")
        object.__setattr__(self, "goals", dict(self.goals))

    # --- geometry -------------------------------------------------------

    @property
    def step_length(self) -> float:
        return self.speed * self.dt

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    @property
    def n_stimuli(self) -> int:
        return len(self.stimuli)

    @property
    def n_features(self) -> int:
        if self.feature_mode == "tabular":
            return self.n_stimuli + self.tabular_bins ** 2
        return self.n_stimuli + 2 * self.bins_per_dim

    def is_free(self, xy) -> np.ndarray:
        """Inside the bounds and outside every obstacle interior."""
        xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        x, y = xy[:, 0], xy[:, 1]
        ok = (x >= 0) & (x <= self.width) & (y >= 0) & (y <= self.height)
        for o in self.obstacles:
            ok &= ~((x > o.x) & (x < o.x + o.w) & (y > o.y) & (y < o.y + o.h))
        return ok

    def _hits_obstacle(self, p: np.ndarray, d: np.ndarray) -> np.ndarray:
        # slab test of segment p -> p + d against each rectangle's open interior
        hit = np.zeros(p.shape[0], dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            for o in self.obstacles:
                t0 = np.zeros(p.shape[0])
                t1 = np.ones(p.shape[0])
                inside = np.ones(p.shape[0], dtype=bool)
                for ax, lo, hi in ((0, o.x, o.x + o.w), (1, o.y, o.y + o.h)):
                    pa, da = p[:, ax], d[:, ax]
                    still = da == 0
                    inside &= ~still | ((pa > lo) & (pa < hi))
                    ta = (lo - pa) / da
                    tb = (hi - pa) / da
                    tmin = np.where(still, -np.inf, np.minimum(ta, tb))
                    tmax = np.where(still, np.inf, np.maximum(ta, tb))
                    t0 = np.maximum(t0, tmin)
                    t1 = np.minimum(t1, tmax)
                hit |= inside & (t0 < t1)
        return hit

    def step_batch(self, xy, actions) -> tuple[np.ndarray, np.ndarray]:
        """Move many agents at once. Returns ``(next_xy, collided)``."""
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        actions = np.asarray(actions).reshape(-1)
        d = DIRECTIONS[actions] * self.step_length
        q = xy + d
        moving = actions != STAY
        collided = moving & (~self.is_free(q) | self._hits_obstacle(xy, d))
        nxt = np.where(collided[:, None], xy, q)
        return nxt, collided

    def _segment_blocked(self, x: float, y: float, dx: float, dy: float) -> bool:
        for o in self.obstacles:
            t0, t1 = 0.0, 1.0
            for p, d, lo, hi in ((x, dx, o.x, o.x + o.w), (y, dy, o.y, o.y + o.h)):
                if d == 0.0:
                    if not lo < p < hi:
                        t0, t1 = 1.0, 0.0
                        break
                    continue
                ta, tb = (lo - p) / d, (hi - p) / d
                if ta > tb:
                    ta, tb = tb, ta
                t0, t1 = max(t0, ta), min(t1, tb)
            if t0 < t1:
                return True
        return False

    def step(self, s, action: int) -> tuple[np.ndarray, bool]:
        """Single-agent move; same result as :meth:`step_batch` on one row."""
        if not 0 <= action < N_ACTIONS:
            raise ValueError(f"action must be in 0..{N_ACTIONS - 1}, got {action}")
        x, y = float(s[0]), float(s[1])
        if action == STAY:
            return np.array([x, y]), False
        ln = self.step_length
        dx = DIRECTIONS[action, 0] * ln
        dy = DIRECTIONS[action, 1] * ln
        nx, ny = x + dx, y + dy
        blocked = not (0.0 <= nx <= self.width and 0.0 <= ny <= self.height)
        if not blocked:
            for o in self.obstacles:
                if o.x < nx < o.x + o.w and o.y < ny < o.y + o.h:
                    blocked = True
                    break
        if not blocked:
            blocked = self._segment_blocked(x, y, dx, dy)
        if blocked:
            return np.array([x, y]), True
        return np.array([nx, ny]), False

    def sample_free(self, rng: np.random.Generator, n: int = 1, exclude: Task | None = None) -> np.ndarray:
        """Uniform positions over free space, optionally outside a goal region."""
        out = np.empty((0, 2))
        while out.shape[0] < n:
            cand = rng.random((2 * (n - out.shape[0]) + 4, 2)) * [self.width, self.height]
            ok = self.is_free(cand)
            if exclude is not None:
                ok &= ~np.asarray(exclude.contains(self, cand))
            out = np.vstack([out, cand[ok]])
        return out[:n]

    # --- features -------------------------------------------------------

    def _bins(self, v: np.ndarray, extent: float, bins: int) -> np.ndarray:
        return np.clip(np.floor(v / extent * bins).astype(np.int64), 0, bins - 1)

    def state_features_batch(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        n = xy.shape[0]
        rows = np.arange(n)
        if self.feature_mode == "tabular":
            b = self.tabular_bins
            out = np.zeros((n, b * b))
            bx = self._bins(xy[:, 0], self.width, b)
            by = self._bins(xy[:, 1], self.height, b)
            out[rows, bx * b + by] = 1.0
            return out
        b = self.bins_per_dim
        out = np.zeros((n, 2 * b))
        out[rows, self._bins(xy[:, 0], self.width, b)] = 1.0
        out[rows, b + self._bins(xy[:, 1], self.height, b)] = 1.0
        return out

    def env_features_batch(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        out = np.zeros((xy.shape[0], self.n_stimuli))
        for k, st in enumerate(self.stimuli):
            out[:, k] = st.contains(self, xy)
        return out

    def features_batch(self, xy) -> np.ndarray:
        return np.hstack([self.env_features_batch(xy), self.state_features_batch(xy)])

    def state_features(self, s) -> np.ndarray:
        return self.state_features_batch(s)[0]

    def env_features(self, s) -> np.ndarray:
        return self.env_features_batch(s)[0]

    def _bin(self, v: float, extent: float, bins: int) -> int:
        return min(max(int(math.floor(v / extent * bins)), 0), bins - 1)

    def full_features(self, s) -> np.ndarray:
        """Stimulus features first, then position features."""
        x, y = float(s[0]), float(s[1])
        phi = np.zeros(self.n_features)
        for k, st in enumerate(self.stimuli):
            if (x - st.x) ** 2 + (y - st.y) ** 2 <= st.r * st.r:
                phi[k] = 1.0
        off = self.n_stimuli
        if self.feature_mode == "tabular":
            b = self.tabular_bins
            phi[off + self._bin(x, self.width, b) * b + self._bin(y, self.height, b)] = 1.0
        else:
            b = self.bins_per_dim
            phi[off + self._bin(x, self.width, b)] = 1.0
            phi[off + b + self._bin(y, self.height, b)] = 1.0
        return phi

    def in_goal(self, task: str | Task, s) -> bool:
        t = self.task(task)
        if isinstance(t, Circle):
            return (float(s[0]) - t.x) ** 2 + (float(s[1]) - t.y) ** 2 <= t.r * t.r
        return bool(self.in_goal_batch(t, s)[0])

    # --- tasks ----------------------------------------------------------

    def task(self, task: str | Task) -> Task:
        if isinstance(task, str):
            try:
                return self.goals[task]
            except KeyError:
                raise KeyError(f"unknown task id {task!r}") from None
        return task

    def in_goal_batch(self, task: str | Task, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        return np.asarray(self.task(task).contains(self, xy), dtype=bool).reshape(-1)

    def is_terminal(self, task: str | Task, s) -> bool:
        return self.in_goal(task, s)

    def reward_batch(self, task: str | Task, xy, collided) -> np.ndarray:
        goal = self.in_goal_batch(task, xy)
        collided = np.asarray(collided, dtype=bool).reshape(-1)
        return np.where(goal, REWARD_GOAL, np.where(collided, REWARD_COLLISION, REWARD_LIVING))

    def reward(self, task: str | Task, s, collided: bool) -> float:
        if self.in_goal(task, s):
            return REWARD_GOAL
        return REWARD_COLLISION if collided else REWARD_LIVING

    def with_features(self, mode: str, tabular_bins: int | None = None) -> NavEnv:
        kw = dict(self.__dict__)
        kw["feature_mode"] = mode
        if tabular_bins is not None:
            kw["tabular_bins"] = tabular_bins
        return NavEnv(**kw)


# --- world files ---------------------------------------------------------

def world_from_dict(doc: dict) -> NavEnv:
    try:
        return NavEnv(
            width=float(doc["width"]),
            height=float(doc["height"]),
            obstacles=tuple(Rect(float(o["x"]), float(o["y"]), float(o["w"]), float(o["h"]))
                            for o in doc.get("obstacles", [])),
            stimuli=tuple(Circle(float(s["x"]), float(s["y"]), float(s["r"]))
                          for s in doc.get("stimuli", [])),
            goals={str(k): Circle(float(g["x"]), float(g["y"]), float(g["r"]))
                   for k, g in doc.get("goals", {}).items()},
            bins_per_dim=int(doc.get("bins_per_dim", 100)),
            dt=float(doc.get("dt", 0.2)),
            speed=float(doc.get("speed", 6.0)),
            feature_mode=doc.get("feature_mode", "separable"),
            tabular_bins=int(doc.get("tabular_bins", 20)),
        )
    except KeyError as exc:
        raise ValueError(f"world file is missing field {exc.args[0]!r}") from None


def world_to_dict(env: NavEnv) -> dict:
    return {
        "width": env.width,
        "height": env.height,
        "obstacles": [{"x": o.x, "y": o.y, "w": o.w, "h": o.h} for o in env.obstacles],
        "stimuli": [{"x": s.x, "y": s.y, "r": s.r} for s in env.stimuli],
        "goals": {k: {"x": g.x, "y": g.y, "r": g.r} for k, g in env.goals.items()},
        "bins_per_dim": env.bins_per_dim,
        "dt": env.dt,
        "speed": env.speed,
        "feature_mode": env.feature_mode,
        "tabular_bins": env.tabular_bins,
    }


def load_world(path: str | Path) -> NavEnv:
    with open(path, encoding="utf-8") as fh:
        return world_from_dict(json.load(fh))


def default_world() -> NavEnv:
    text = resources.files("somxfer.data").joinpath("default_world.json").read_text(encoding="utf-8")
    return world_from_dict(json.loads(text))
