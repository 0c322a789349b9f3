"""Online clustering of environment feature vectors into candidate tasks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Cluster:
    centroid: np.ndarray
    var: np.ndarray
    count: int = 1

    def copy(self) -> Cluster:
        return Cluster(self.centroid.copy(), self.var.copy(), self.count)


def update_cluster(cluster: Cluster, f) -> Cluster:
    """Fold observation ``f`` into the running per-element mean and variance.

    Evaluated element-wise in this order::

        mean' = (n * mean + f) / (n + 1)
        var'  = (n * (var + mean**2) + f**2) / (n + 1) - mean'**2
        n'    = n + 1
    """
    f = np.asarray(f, dtype=np.float64)
    n = cluster.count
    mean = cluster.centroid
    new_mean = (n * mean + f) / (n + 1)
    new_var = (n * (cluster.var + mean ** 2) + f ** 2) / (n + 1) - new_mean ** 2
    # cancellation can leave tiny negatives
    np.maximum(new_var, 0.0, out=new_var)
    return Cluster(new_mean, new_var, n + 1)


@dataclass
class ClusterModel:
    k_std: float = 2.0
    var0: float = 0.05
    clusters: list[Cluster] = field(default_factory=list)

    def __post_init__(self):
        if self.var0 <= 0:
            raise ValueError("var0 must be positive")
        if self.k_std <= 0:
            raise ValueError("k_std must be positive")

    def __len__(self) -> int:
        return len(self.clusters)

    def nearest(self, f: np.ndarray) -> int:
        """Index of the centroid closest to ``f`` (Euclidean); -1 for an empty model."""
        if not self.clusters:
            return -1
        cents = np.stack([c.centroid for c in self.clusters])
        d2 = ((cents - f) ** 2).sum(axis=1)
        return int(np.argmin(d2))

    def is_member(self, idx: int, f: np.ndarray) -> bool:
        c = self.clusters[idx]
        return bool(np.all(np.abs(f - c.centroid) <= self.k_std * np.sqrt(c.var)))

    def observe(self, f) -> tuple[int, bool]:
        """Assign ``f`` to a cluster, seeding a new one if it falls outside every band.

        Returns ``(cluster_index, seeded)``.
        """
        f = np.asarray(f, dtype=np.float64)
        if not np.all(np.isfinite(f)):
            raise ValueError("feature vector contains non-finite entries")
        if self.clusters and f.shape != self.clusters[0].centroid.shape:
            raise ValueError(f"feature length {f.shape} does not match the model")
        idx = self.nearest(f)
        if idx >= 0 and self.is_member(idx, f):
            self.clusters[idx] = update_cluster(self.clusters[idx], f)
            return idx, False
        self.clusters.append(Cluster(f.copy(), np.full(f.shape, self.var0), 1))
        return len(self.clusters) - 1, True

    def to_dict(self) -> dict:
        return {
            "k_std": self.k_std,
            "var0": self.var0,
            "clusters": [{"centroid": c.centroid.tolist(), "var": c.var.tolist(), "count": c.count}
                         for c in self.clusters],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> ClusterModel:
        model = cls(k_std=float(doc["k_std"]), var0=float(doc["var0"]))
        model.clusters = [Cluster(np.array(c["centroid"], dtype=np.float64),
                                  np.array(c["var"], dtype=np.float64), int(c["count"]))
                          for c in doc["clusters"]]
        return model


@dataclass(frozen=True)
class ClusterTask:
    """Goal predicate: the stimulus vector lies inside a cluster's membership band."""

    task_id: str
    centroid: tuple[float, ...]
    halfwidth: tuple[float, ...]

    @property
    def is_background(self) -> bool:
        return not any(self.centroid)

    def matches(self, fe) -> np.ndarray:
        fe = np.atleast_2d(np.asarray(fe, dtype=np.float64))
        cen = np.asarray(self.centroid)
        hw = np.asarray(self.halfwidth)
        return np.all(np.abs(fe - cen) <= hw, axis=1)

    def contains(self, env, xy) -> np.ndarray:
        return self.matches(env.env_features_batch(xy))


def tasks_from_clusters(model: ClusterModel, ignore_background: bool = False) -> list[ClusterTask]:
    """One task per cluster, in cluster order; ids are ``"c<index>"``."""
    tasks = []
    for k, c in enumerate(model.clusters):
        t = ClusterTask(f"c{k}", tuple(float(v) for v in c.centroid),
                        tuple(float(v) for v in model.k_std * np.sqrt(c.var)))
        if ignore_background and t.is_background:
            continue
        tasks.append(t)
    return tasks


def explore(env, model: ClusterModel, n_steps: int, rng: np.random.Generator,
            start=None) -> np.ndarray:
    """Random walk through ``env`` feeding every stimulus vector to ``model``.

    Returns the visited positions, shape ``(n_steps + 1, 2)``.
    """
    s = env.sample_free(rng)[0] if start is None else np.asarray(start, dtype=np.float64)
    path = np.empty((n_steps + 1, 2))
    path[0] = s
    model.observe(env.env_features(s))
    actions = rng.integers(0, env.n_actions, size=n_steps)
    for t in range(n_steps):
        s, _ = env.step(s, int(actions[t]))
        path[t + 1] = s
        model.observe(env.env_features(s))
    return path
