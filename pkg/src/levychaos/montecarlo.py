"""Batched path simulation and Monte Carlo evaluation of iterated integrals."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import kernels
from .functions import TestFunction
from .measure import LevyTriplet, nu_integral
from .paths import LevyPath, draw_path, make_grid
from .tensors import IteratedSpec, StepFunction

CHUNK = 4096


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Paths ``start .. start+P-1`` of one master seed on a common grid.

    Jumps are stored in compressed rows: path ``p`` owns
    ``jtimes[offsets[p]:offsets[p+1]]``.
    """

    grid: np.ndarray
    dW: np.ndarray
    offsets: np.ndarray
    jtimes: np.ndarray
    jsizes: np.ndarray
    sigma2: float
    seed: int
    start: int

    @property
    def n_paths(self) -> int:
        return len(self.offsets) - 1

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def path(self, p: int) -> LevyPath:
        """Materialize path ``p`` of the batch as a :class:`LevyPath`."""
        lo, hi = self.offsets[p], self.offsets[p + 1]
        W = np.concatenate([[0.0], np.cumsum(self.dW[p])])
        return LevyPath(self.horizon, self.grid, W, self.jtimes[lo:hi].copy(),
                        self.jsizes[lo:hi].copy(), self.sigma2, self.seed, self.start + p)

    def brownian_at(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.grid, t, side="right") - 1)
        if k <= 0:
            return np.zeros(self.n_paths)
        return self.dW[:, :k].sum(axis=1)

    def jump_sum_at(self, fn: Callable, t: float) -> np.ndarray:
        vals = np.where(self.jtimes <= t, fn(self.jsizes), 0.0)
        cum = np.concatenate([[0.0], np.cumsum(vals)])
        return cum[self.offsets[1:]] - cum[self.offsets[:-1]]


def simulate_batch(triplet: LevyTriplet, horizon: float, grid_step: float, seed: int,
                   start: int, count: int) -> PathBatch:
    """Paths ``start .. start+count-1``; path ``i`` matches ``simulate_levy(..., index=i)``."""
    grid = make_grid(horizon, grid_step)
    K = len(grid) - 1
    dW = np.zeros((count, K if triplet.sigma2 > 0 else 0))
    times, sizes, counts = [], [], np.zeros(count, dtype=np.int64)
    for p in range(count):
        t, x, dw = draw_path(triplet, grid, seed, start + p)
        times.append(t)
        sizes.append(x)
        counts[p] = len(t)
        if triplet.sigma2 > 0:
            dW[p] = dw
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    jt = np.concatenate(times) if times else np.zeros(0)
    js = np.concatenate(sizes) if sizes else np.zeros(0)
    return PathBatch(grid, dW, offsets, jt, js, float(triplet.sigma2), int(seed), int(start))


@dataclass
class WordTree:
    """Iterated integrals sharing prefixes, stored as a tree of nodes."""

    parent: List[int] = field(default_factory=lambda: [-1])
    member: List[int] = field(default_factory=lambda: [-1])
    factor: List[Optional[StepFunction]] = field(default_factory=lambda: [None])
    _index: dict = field(default_factory=dict)

    def child(self, parent: int, member: int, factor: Optional[StepFunction]) -> int:
        key = (parent, member, factor)
        if key not in self._index:
            self.parent.append(parent)
            self.member.append(member)
            self.factor.append(factor)
            self._index[key] = len(self.parent) - 1
        return self._index[key]

    def add_chain(self, members: Sequence[int], factors: Sequence[Optional[StepFunction]]) -> int:
        node = 0
        for m, f in zip(members, factors):
            node = self.child(node, m, f)
        return node

    def add_spec(self, spec: IteratedSpec) -> int:
        return self.add_chain(spec.indices, spec.tensor.factors)

    def __len__(self):
        return len(self.parent)


def tree_values(tree: WordTree, family: Sequence[TestFunction], nu, batch: PathBatch,
                backend=None) -> np.ndarray:
    """Terminal values ``(P, len(tree))`` of every tree node (root value 1)."""
    grid = batch.grid
    pts = set()
    for f in tree.factor:
        if f is not None:
            if abs(f.horizon - batch.horizon) > 1e-12 * batch.horizon:
                raise ValueError("tensor horizon differs from the path horizon")
            pts.update(f.interior)
    knots = np.union1d(grid, np.asarray(sorted(pts), dtype=float))
    gidx = np.searchsorted(grid, knots)
    on_grid = (gidx < len(grid)) & (grid[np.minimum(gidx, len(grid) - 1)] == knots)
    grid_inc = np.where(on_grid & (gidx >= 1), gidx - 1, -1).astype(np.int64)
    if batch.dW.shape[1] == 0:
        grid_inc[:] = -1
    seg_F = np.ones((len(knots) - 1, len(tree)))
    for v, f in enumerate(tree.factor):
        if f is not None:
            seg_F[:, v] = f.on(knots)
    at0 = np.array([f.at_zero for f in family], dtype=float)
    comp = np.array([nu_integral(f, nu) for f in family], dtype=float)
    jvals = np.array([f.jump(batch.jsizes) for f in family]).reshape(len(family), -1)
    return kernels.tree_terminal(knots, grid_inc, seg_F, tree.parent, tree.member, 1.0,
                                 at0, comp, batch.dW, batch.offsets, batch.jtimes, jvals,
                                 backend=backend)


def _chunk_job(fn, triplet, horizon, grid_step, seed, bounds):
    start, count = bounds
    return fn(simulate_batch(triplet, horizon, grid_step, seed, start, count))


def map_batches(fn: Callable[[PathBatch], object], triplet: LevyTriplet, horizon: float,
                grid_step: float, n_paths: int, seed: int, chunk: int = CHUNK,
                workers: int = 1, first: int = 0) -> list:
    """Apply ``fn`` to batches of paths ``first .. first+n_paths-1``, in order.

    Results do not depend on ``workers`` because every path has its own
    random stream and chunk boundaries are fixed.
    """
    end = first + n_paths
    bounds = [(s, min(chunk, end - s)) for s in range(first, end, chunk)]
    job = partial(_chunk_job, fn, triplet, horizon, grid_step, seed)
    if workers <= 1 or len(bounds) == 1:
        return [job(b) for b in bounds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, bounds))


def _spec_terminals(specs, family, nu, batch):
    tree = WordTree()
    leaves = [tree.add_spec(s) for s in specs]
    vals = tree_values(tree, family, nu, batch)
    f0 = np.array([s.tensor.f0 for s in specs])
    return vals[:, leaves] * f0


def terminal_values(specs: Sequence[IteratedSpec], family: Sequence[TestFunction],
                    triplet: LevyTriplet, horizon: float, grid_step: float, n_paths: int,
                    seed: int, workers: int = 1) -> np.ndarray:
    """``J_n(spec)_T`` for every spec on ``n_paths`` seeded paths, shape ``(P, len(specs))``."""
    fn = partial(_spec_terminals, list(specs), list(family), triplet.nu)
    parts = map_batches(fn, triplet, horizon, grid_step, n_paths, seed, workers=workers)
    return np.vstack(parts)


@dataclass
class MomentAccumulator:
    """Mergeable running sums for means and covariances of a vector statistic."""

    n: int = 0
    s1: Optional[np.ndarray] = None
    s2: Optional[np.ndarray] = None

    def add(self, x: np.ndarray) -> "MomentAccumulator":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.s1 is None:
            self.s1 = np.zeros(x.shape[1])
            self.s2 = np.zeros((x.shape[1], x.shape[1]))
        self.n += x.shape[0]
        self.s1 += x.sum(axis=0)
        self.s2 += x.T @ x
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.s1 is None:
            return self
        if self.s1 is None:
            return MomentAccumulator(other.n, other.s1.copy(), other.s2.copy())
        return MomentAccumulator(self.n + other.n, self.s1 + other.s1, self.s2 + other.s2)

    @property
    def mean(self) -> np.ndarray:
        return self.s1 / self.n

    @property
    def cov(self) -> np.ndarray:
        m = self.mean
        return (self.s2 / self.n - np.outer(m, m)) * self.n / max(self.n - 1, 1)

    def stderr(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0) / self.n)
