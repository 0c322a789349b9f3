"""Growing self-organizing map keyed on cosine similarity.

The map is a square grid stored row-major. Training follows the usual
winner-take-most scheme, except that the winner is chosen by cosine
similarity and the grid grows by one row and one column whenever the
per-node increase of the accumulated error exceeds the growth threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from somxfer.core import argmax_similarity, as_weight_vector, cosine_similarity


@dataclass
class GsomParams:
    sigma0: float = 50.0
    tau1: float = 250.0
    kappa0: float = 0.5
    tau2: float = 1000.0
    n_iter: int = 1000
    growth_threshold: float = 0.3
    initial_side: int = 2
    max_side: int | None = None

    def __post_init__(self):
        if self.sigma0 <= 0 or self.tau1 <= 0 or self.tau2 <= 0:
            raise ValueError("sigma0, tau1 and tau2 must be positive")
        if self.kappa0 <= 0:
            raise ValueError("kappa0 must be positive")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.growth_threshold <= 0:
            raise ValueError("growth_threshold must be positive")
        if self.initial_side < 1:
            raise ValueError("initial_side must be >= 1")
        if self.max_side is not None and self.max_side < self.initial_side:
            raise ValueError("max_side must be >= initial_side")


@dataclass
class SomGrid:
    """Square grid of node weights with per-node accumulated error.

    ``nodes`` has shape ``(side * side, dim)`` in row-major order.
    """

    nodes: np.ndarray
    error: np.ndarray
    growth_threshold: float
    total_error_prev: float = 0.0
    side: int = field(init=False)

    def __post_init__(self):
        self.nodes = np.array(self.nodes, dtype=np.float64)
        self.error = np.array(self.error, dtype=np.float64)
        if self.nodes.ndim != 2 or self.nodes.shape[1] == 0:
            raise ValueError(f"nodes must be a 2-D (n, dim) array, got {self.nodes.shape}")
        n = self.nodes.shape[0]
        side = math.isqrt(n)
        if side < 1 or side * side != n:
            raise ValueError(f"node count {n} is not a positive perfect square")
        if self.error.shape != (n,):
            raise ValueError(f"error has shape {self.error.shape}, expected ({n},)")
        if not np.all(np.isfinite(self.nodes)):
            raise ValueError("node weights contain non-finite entries")
        if np.any(self.error < 0) or not np.all(np.isfinite(self.error)):
            raise ValueError("error entries must be finite and non-negative")
        self.side = side

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def coords(self) -> np.ndarray:
        idx = np.arange(self.n_nodes)
        return np.stack([idx // self.side, idx % self.side], axis=1)

    def copy(self) -> SomGrid:
        return SomGrid(self.nodes.copy(), self.error.copy(), self.growth_threshold,
                       self.total_error_prev)

    def __eq__(self, other):
        if not isinstance(other, SomGrid):
            return NotImplemented
        return (self.side == other.side
                and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.error, other.error)
                and self.growth_threshold == other.growth_threshold)


def random_grid(side: int, dim: int, growth_threshold: float, rng: np.random.Generator) -> SomGrid:
    """Fresh map with node weights drawn uniformly from [0, 1)."""
    nodes = rng.random((side * side, dim))
    return SomGrid(nodes, np.zeros(side * side), growth_threshold)


def find_winner(grid: SomGrid, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (grid.dim,):
        raise ValueError(f"input has shape {x.shape}, map dimension is {grid.dim}")
    return argmax_similarity(x, grid.nodes)


def schedule(i: float, p: GsomParams) -> tuple[float, float]:
    """Neighbourhood width and learning rate at iteration ``i``."""
    sigma = p.sigma0 * math.exp(-i / p.tau1)
    kappa = p.kappa0 * math.exp(-i / p.tau2)
    return sigma, kappa


def neighborhood_update(grid: SomGrid, x: np.ndarray, winner: int, sigma: float,
                        kappa: float) -> SomGrid:
    """Pull every node toward ``x`` with a Gaussian kernel on grid distance. In place.

    The grid distance is the squared Euclidean distance between integer
    (row, col) coordinates.
    """
    if kappa == 0.0:
        return grid
    side = grid.side
    rows = np.arange(grid.n_nodes) // side
    cols = np.arange(grid.n_nodes) % side
    d = (rows - winner // side) ** 2 + (cols - winner % side) ** 2
    h = np.exp(-d / (2.0 * sigma * sigma))
    grid.nodes += (kappa * h)[:, None] * (x - grid.nodes)
    return grid


def accumulate_error(grid: SomGrid, x: np.ndarray, winner: int) -> float:
    """Add ``1 - cos(x, winner)`` to the winner's error. In place; returns the increment."""
    inc = 1.0 - cosine_similarity(x, grid.nodes[winner])
    grid.error[winner] += inc
    return inc


def should_grow(delta_e: float, n_nodes: int, growth_threshold: float) -> bool:
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    return delta_e / n_nodes > growth_threshold


def grow(grid: SomGrid) -> SomGrid:
    """Return a copy of ``grid`` with one extra column (east) and row (south).

    Original nodes keep their coordinates, weights and errors. The new east
    column copies its west neighbours, the new south row copies its north
    neighbours and the new corner is the mean of its west and north
    neighbours. New error entries start at the mean of the old error vector.
    """
    s = grid.side
    dim = grid.dim
    old = grid.nodes.reshape(s, s, dim)
    new = np.empty((s + 1, s + 1, dim))
    new[:s, :s] = old
    new[:s, s] = old[:, s - 1]
    new[s, :s] = old[s - 1, :]
    new[s, s] = 0.5 * (new[s, s - 1] + new[s - 1, s])

    err = np.full((s + 1, s + 1), float(grid.error.mean()))
    err[:s, :s] = grid.error.reshape(s, s)
    return SomGrid(new.reshape(-1, dim), err.reshape(-1), grid.growth_threshold,
                   grid.total_error_prev)


def max_permissible_error(n_old: int, n_new: int, growth_threshold: float) -> float:
    """Largest mean per-node error that does not trigger another growth after ``n_old -> n_new``."""
    if n_new == n_old:
        raise ValueError("undefined bound: n_new == n_old")
    if not n_new > n_old >= 1:
        raise ValueError("expected n_new > n_old >= 1")
    return n_new * growth_threshold / (n_new - n_old)


def e_a_max_square(n: float, growth_threshold: float) -> float:
    """:func:`max_permissible_error` under the square growth rule ``n -> (sqrt(n)+1)**2``."""
    r = math.sqrt(n)
    return growth_threshold * (r + 1.0) ** 2 / (1.0 + 2.0 * r)


def d_ea_max_dn(n: float, growth_threshold: float) -> float:
    """Derivative of :func:`e_a_max_square` with respect to the node count."""
    if n < 1:
        raise ValueError("n must be >= 1")
    r = math.sqrt(n)
    return growth_threshold * (1.0 + r) / (1.0 + 2.0 * r) ** 2


@dataclass
class TrainTrace:
    """Per-iteration history of a training call, mainly for inspection and tests."""

    winners: list[int] = field(default_factory=list)
    increments: list[float] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)


def train_step(grid: SomGrid, x: np.ndarray, i: int, p: GsomParams) -> tuple[SomGrid, int, float, bool]:
    """One iteration: winner, update, error, growth check.

    Returns ``(grid, winner, increment, grew)``. The returned grid is a new
    object only if it grew; otherwise ``grid`` is updated in place.
    """
    winner = find_winner(grid, x)
    sigma, kappa = schedule(i, p)
    neighborhood_update(grid, x, winner, sigma, kappa)
    inc = accumulate_error(grid, x, winner)
    total = float(grid.error.sum())
    delta = total - grid.total_error_prev
    grid.total_error_prev = total
    grew = False
    can_grow = p.max_side is None or grid.side < p.max_side
    if can_grow and should_grow(delta, grid.n_nodes, p.growth_threshold):
        grid = grow(grid)
        # the inherited errors of new nodes are not an increase of the next iteration
        grid.total_error_prev = float(grid.error.sum())
        grew = True
    return grid, winner, inc, grew


def train(grid: SomGrid, inputs, p: GsomParams, seed, trace: TrainTrace | None = None) -> SomGrid:
    """Run ``p.n_iter`` training iterations on a copy of ``grid``.

    Each iteration draws one input uniformly at random. The iteration counter
    keeps running across growth events, so the schedules keep decaying.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValueError("inputs must be a non-empty (m, dim) array")
    if inputs.shape[1] != grid.dim:
        raise ValueError(f"inputs have dimension {inputs.shape[1]}, map dimension is {grid.dim}")
    rng = np.random.default_rng(seed)
    grid = grid.copy()
    picks = rng.integers(0, inputs.shape[0], size=p.n_iter)
    for i in range(1, p.n_iter + 1):
        x = inputs[picks[i - 1]]
        grid, winner, inc, _ = train_step(grid, x, i, p)
        if trace is not None:
            trace.winners.append(winner)
            trace.increments.append(inc)
            trace.sizes.append(grid.n_nodes)
    return grid


def incorporate_task(grid: SomGrid, w_new, p: GsomParams, seed,
                     trace: TrainTrace | None = None) -> SomGrid:
    """Fold a newly learned weight vector into the map.

    The current node weights are recycled as inputs alongside ``w_new``, and
    the error accumulators restart from zero for this pass.
    """
    w_new = as_weight_vector(w_new)
    if w_new.shape[0] != grid.dim:
        raise ValueError(f"weight vector has length {w_new.shape[0]}, map dimension is {grid.dim}")
    inputs = np.vstack([grid.nodes, w_new[None, :]])
    fresh = SomGrid(grid.nodes, np.zeros(grid.n_nodes), grid.growth_threshold, 0.0)
    return train(fresh, inputs, p, seed, trace)
