"""Simulated Levy paths and cadlag series on event timelines.

The timeline of a path is the uniform grid merged with the exact jump times.
Brownian motion is only known on the grid; between grid points it is held at
its left grid value and the increment is booked at the next grid point as a
continuous (non-jump) change.  A :class:`CadlagSeries` therefore records, on
each timeline interval, a drift polynomial in local time, and at each
timeline point its left limit and right value.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np

from .errors import InfiniteActivityWithoutTruncation, NotSquareIntegrable, PathMismatch
from .functions import TestFunction
from .measure import Density, LevyTriplet, MuMeasure, mu_inner, nu_integral
from .tensors import StepFunction


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for path ``index`` under master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def make_grid(horizon: float, grid_step: float) -> np.ndarray:
    if grid_step <= 0 or horizon <= 0:
        raise ValueError("horizon and grid_step must be positive")
    K = int(round(horizon / grid_step))
    if K < 1 or abs(K * grid_step - horizon) > 1e-9 * horizon:
        K = int(np.ceil(horizon / grid_step))
    grid = np.linspace(0.0, horizon, K + 1)
    return grid


def draw_path(triplet: LevyTriplet, grid: np.ndarray, seed: int, index: int):
    """Raw draws for one path: jump times, jump sizes, Brownian increments."""
    nu = triplet.nu
    if isinstance(nu, Density) and nu.truncation_eps <= 0:
        raise InfiniteActivityWithoutTruncation("set truncation_eps > 0 to simulate a density")
    T = grid[-1]
    rng = path_rng(seed, index)
    mass = nu.total_mass()
    n = int(rng.poisson(mass * T)) if mass > 0 else 0
    times = np.sort(T * (1.0 - rng.random(n)))
    sizes = nu.sample_sizes(rng, n) if n else np.zeros(0)
    if triplet.sigma2 > 0:
        dW = np.sqrt(triplet.sigma2 * np.diff(grid)) * rng.standard_normal(len(grid) - 1)
    else:
        dW = np.zeros(len(grid) - 1)
    return times, sizes, dW


@dataclass(frozen=True, eq=False)
class LevyPath:
    """One realization: Brownian values on a grid plus the exact jump list."""

    horizon: float
    grid: np.ndarray
    brownian: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    sigma2: float
    seed: Optional[int] = None
    index: int = 0

    @property
    def token(self):
        return (self.seed, self.index, len(self.grid), self.horizon, len(self.jump_times),
                float(self.jump_times.sum()), float(self.brownian[-1]))

    def same_as(self, other: "LevyPath") -> bool:
        return self is other or self.token == other.token

    def timeline(self, extra=()) -> np.ndarray:
        extra = np.asarray([t for t in extra if 0.0 <= t <= self.horizon], dtype=float)
        return np.unique(np.concatenate([self.grid, self.jump_times, extra]))

    def brownian_left(self, t) -> np.ndarray:
        """W held at the last grid value at or before ``t``."""
        k = np.searchsorted(self.grid, t, side="right") - 1
        return self.brownian[np.clip(k, 0, len(self.grid) - 1)]

    def jump_sum(self, fn, t) -> np.ndarray:
        """``sum_{s_j <= t} fn(x_j)`` for each entry of ``t``."""
        if len(self.jump_times) == 0:
            return np.zeros_like(np.asarray(t, dtype=float))
        cum = np.concatenate([[0.0], np.cumsum(fn(self.jump_sizes))])
        return cum[np.searchsorted(self.jump_times, t, side="right")]

    def jump_at(self, fn, t) -> np.ndarray:
        """``fn(x_j)`` where ``t`` is a jump time, else 0."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if len(self.jump_times) == 0:
            return out
        k = np.searchsorted(self.jump_times, t)
        hit = k < len(self.jump_times)
        hit[hit] = self.jump_times[k[hit]] == t[hit]
        out[hit] = fn(self.jump_sizes[k[hit]])
        return out

    def levy_values(self, triplet: LevyTriplet, extra=()):
        """``L_t = beta t + W_t + sum x_j - t nu(x 1{|x|<=1})`` on the timeline."""
        tl = self.timeline(extra)
        small = triplet.nu.integrate(lambda x: x * (np.abs(x) <= 1.0))
        return tl, (triplet.beta - small) * tl + self.brownian_left(tl) + self.jump_sum(lambda x: x, tl)


def simulate_levy(triplet: LevyTriplet, horizon: float, grid_step: float, seed: int,
                  index: int = 0) -> LevyPath:
    """Simulate one path; bit-identical for equal ``(seed, index)``.

    Raises
    ------
    InfiniteActivityWithoutTruncation
        For a density jump measure without a positive truncation.
    """
    grid = make_grid(horizon, grid_step)
    times, sizes, dW = draw_path(triplet, grid, seed, index)
    W = np.concatenate([[0.0], np.cumsum(dW)])
    return LevyPath(float(grid[-1]), grid, W, times, sizes, float(triplet.sigma2), seed, index)


def _shift_poly(p: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Rows of ``p`` re-expanded around local time ``a`` (Taylor shift)."""
    D = p.shape[1]
    out = np.zeros_like(p)
    for k in range(D):
        for j in range(k, D):
            out[:, k] += p[:, j] * comb(j, k) * a ** (j - k)
    return out


def _polyval(p: np.ndarray, h: np.ndarray) -> np.ndarray:
    out = np.zeros(p.shape[0])
    for k in range(p.shape[1] - 1, -1, -1):
        out = out * h + p[:, k]
    return out


def _polymul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0], a.shape[1] + b.shape[1] - 1))
    for i in range(a.shape[1]):
        for j in range(b.shape[1]):
            out[:, i + j] += a[:, i] * b[:, j]
    return out


def _pad(p: np.ndarray, D: int) -> np.ndarray:
    if p.shape[1] >= D:
        return p
    return np.hstack([p, np.zeros((p.shape[0], D - p.shape[1]))])


@dataclass(frozen=True, eq=False)
class CadlagSeries:
    """A cadlag process on the timeline of one path.

    Attributes
    ----------
    timeline : (M+1,) array
        Event times, starting at 0 and ending at the horizon.
    values : (M+1,) array
        Right values ``X(t_i)``.
    pre : (M+1,) array
        Left limits ``X(t_i-)``; ``pre[0] = 0``.
    poly : (M, D+1) array
        On ``[t_i, t_{i+1})`` the process equals ``sum_k poly[i, k] (t - t_i)^k``;
        ``poly[:, 0] == values[:-1]``.
    """

    path: LevyPath
    timeline: np.ndarray
    values: np.ndarray
    pre: np.ndarray
    poly: np.ndarray

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.timeline)

    @property
    def jumps(self) -> np.ndarray:
        return self.values - self.pre

    def continuous_lump(self) -> np.ndarray:
        """Non-drift continuous change booked at each point (Brownian part)."""
        out = np.zeros_like(self.values)
        out[1:] = self.pre[1:] - _polyval(self.poly, self.steps)
        return out

    def at(self, t) -> np.ndarray:
        """Value at arbitrary times, using the drift polynomial between points."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = np.clip(np.searchsorted(self.timeline, t, side="right") - 1, 0, len(self.timeline) - 1)
        out = self.values[i].astype(float).copy()
        inner = i < len(self.poly)
        ii = i[inner]
        out[inner] = _polyval(self.poly[ii], t[inner] - self.timeline[ii])
        return out

    def refine(self, knots) -> "CadlagSeries":
        """Insert extra timeline points without changing the process."""
        knots = np.asarray([k for k in np.atleast_1d(knots) if 0.0 <= k <= self.timeline[-1]], dtype=float)
        new = np.setdiff1d(knots, self.timeline)
        if new.size == 0:
            return self
        tl = np.union1d(self.timeline, new)
        src = np.searchsorted(self.timeline, tl, side="right") - 1  # owning old interval
        is_old = np.isin(tl, self.timeline)
        src_int = np.clip(src, 0, len(self.poly) - 1)
        offs = tl - self.timeline[src]
        values = np.empty_like(tl)
        pre = np.empty_like(tl)
        old_idx = np.searchsorted(self.timeline, tl[is_old])
        values[is_old] = self.values[old_idx]
        pre[is_old] = self.pre[old_idx]
        mid = _polyval(self.poly[src_int[~is_old]], offs[~is_old])
        values[~is_old] = mid
        pre[~is_old] = mid
        poly = _shift_poly(self.poly[src_int[:-1]], offs[:-1])
        poly[:, 0] = values[:-1]
        return CadlagSeries(self.path, tl, values, pre, poly)

    def _check(self, other):
        if not self.path.same_as(other.path):
            raise PathMismatch("series come from different paths")

    def _binary(self, other, op):
        if np.isscalar(other):
            other = constant_series(self.path, float(other), self.timeline)
        self._check(other)
        a, b = align(self, other)
        D = max(a.poly.shape[1], b.poly.shape[1])
        if op == "add":
            return CadlagSeries(a.path, a.timeline, a.values + b.values, a.pre + b.pre,
                                _pad(a.poly, D) + _pad(b.poly, D))
        if op == "sub":
            return CadlagSeries(a.path, a.timeline, a.values - b.values, a.pre - b.pre,
                                _pad(a.poly, D) - _pad(b.poly, D))
        poly = _polymul(a.poly, b.poly)
        poly[:, 0] = a.values[:-1] * b.values[:-1]
        return CadlagSeries(a.path, a.timeline, a.values * b.values, a.pre * b.pre, poly)

    def __add__(self, other):
        return self._binary(other, "add")

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, "sub")

    def __mul__(self, other):
        if np.isscalar(other):
            c = float(other)
            return CadlagSeries(self.path, self.timeline, c * self.values, c * self.pre, c * self.poly)
        return self._binary(other, "mul")

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def sup_gap(self, other) -> float:
        """Sup-norm distance over values and left limits on the common timeline."""
        self._check(other)
        a, b = align(self, other)
        return float(max(np.max(np.abs(a.values - b.values)), np.max(np.abs(a.pre - b.pre))))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "value", "pre_value"])
            for row in zip(self.timeline, self.values, self.pre):
                w.writerow([repr(float(v)) for v in row])


def align(*series):
    """Refine series onto their common timeline."""
    tl = series[0].timeline
    for s in series[1:]:
        tl = np.union1d(tl, s.timeline)
    return tuple(s.refine(tl) for s in series)


def constant_series(path: LevyPath, c: float, timeline=None) -> CadlagSeries:
    tl = path.timeline() if timeline is None else timeline
    values = np.full(len(tl), c)
    pre = values.copy()
    pre[0] = 0.0
    return CadlagSeries(path, tl, values, pre, values[:-1, None].copy())


def _compensator(f: TestFunction, nu) -> float:
    return nu_integral(f, nu)


def martingale_path(f: TestFunction, path: LevyPath, nu, extra=()) -> CadlagSeries:
    """``X^f_t = f(0) W_t + sum_{s_j <= t} f~(x_j) - t nu(f~)``.

    For a truncated density the compensator only covers ``|x| > eps``; the
    neglected L2 mass is given by :func:`truncation_bias_bound`.
    """
    flags = f.flags if f.flags is not None else nu.certify(f.jump)
    if not flags.in_L2_nu:
        raise NotSquareIntegrable(f"{f.label()} is not in L2(nu)")
    c = _compensator(f, nu)
    tl = path.timeline(extra)
    values = f.at_zero * path.brownian_left(tl) + path.jump_sum(f.jump, tl) - c * tl
    pre = values - path.jump_at(f.jump, tl)
    pre[0] = 0.0
    poly = np.column_stack([values[:-1], np.full(len(tl) - 1, -c)])
    return CadlagSeries(path, tl, values, pre, poly)


def truncation_bias_bound(f: TestFunction, nu) -> float:
    """``int_{0<|x|<=eps} f~^2 dnu`` (0 for atomic measures)."""
    if not isinstance(nu, Density) or nu.truncation_eps <= 0:
        return 0.0
    eps = nu.truncation_eps
    t, wt = np.polynomial.legendre.leggauss(16)
    edges = np.geomspace(eps * 2.0 ** -40, eps, 41)
    a, b = edges[:-1, None], edges[1:, None]
    x = (0.5 * (b - a) * t + 0.5 * (a + b)).ravel()
    wx = (0.5 * (b - a) * wt).ravel()
    tot = 0.0
    for sign in (1.0, -1.0):
        tot += float(np.dot(wx * nu.h(sign * x), f.jump(sign * x) ** 2))
    return tot


def quadratic_covariation(Xf: CadlagSeries, f: TestFunction, Xg: CadlagSeries, g: TestFunction,
                          sigma2: float) -> CadlagSeries:
    """``[X^f, X^g]_t = f(0) g(0) sigma2 t + sum_{s_j <= t} f~ g~ (x_j)``, exact."""
    Xf._check(Xg)
    a, b = align(Xf, Xg)
    path, tl = a.path, a.timeline
    rate = f.at_zero * g.at_zero * sigma2
    fg = lambda x: f.jump(x) * g.jump(x)
    values = rate * tl + path.jump_sum(fg, tl)
    pre = values - path.jump_at(fg, tl)
    pre[0] = 0.0
    poly = np.column_stack([values[:-1], np.full(len(tl) - 1, rate)])
    return CadlagSeries(path, tl, values, pre, poly)


def predictable_covariation(f: TestFunction, g: TestFunction, mu: MuMeasure, t: float) -> float:
    """``<X^f, X^g>_t = t mu(f g)``."""
    return float(t) * mu_inner(f, g, mu)


def compensated_covariation(f: TestFunction, g: TestFunction, path: LevyPath, mu: MuMeasure,
                            extra=()) -> CadlagSeries:
    """``[X^f, X^g] - <X^f, X^g>`` on the timeline of ``path``."""
    tl = path.timeline(extra)
    rate = f.at_zero * g.at_zero * mu.sigma2 - mu_inner(f, g, mu)
    fg = lambda x: f.jump(x) * g.jump(x)
    values = rate * tl + path.jump_sum(fg, tl)
    pre = values - path.jump_at(fg, tl)
    pre[0] = 0.0
    poly = np.column_stack([values[:-1], np.full(len(tl) - 1, rate)])
    return CadlagSeries(path, tl, values, pre, poly)


def stochastic_integral(H: CadlagSeries, X: CadlagSeries, F: Optional[StepFunction] = None) -> CadlagSeries:
    """``int_0^t F(u) H(u-) dX(u)``.

    Jumps are integrated exactly, the drift of ``X`` in closed form against the
    drift polynomial of ``H``, and the Brownian lump with the left-point value
    of ``H``.
    """
    H._check(X)
    knots = () if F is None else F.breakpoints
    H, X = align(H.refine(knots), X.refine(knots))
    tl = H.timeline
    h = np.diff(tl)
    Fl = np.ones(len(tl) - 1) if F is None else F(tl[:-1])
    Fr = np.ones(len(tl)) if F is None else F(tl)
    dX = X.poly[:, 1:] * np.arange(1, X.poly.shape[1])[None, :]
    if dX.shape[1] == 0:
        dX = np.zeros((len(h), 1))
    integrand = _polymul(H.poly, dX) * Fl[:, None]
    D = integrand.shape[1]
    anti = np.zeros((len(h), D + 1))
    anti[:, 1:] = integrand / np.arange(1, D + 1)[None, :]
    drift = _polyval(anti, h)
    lump = X.continuous_lump()[1:]
    jumps = X.jumps[1:]
    cont = drift + Fl * H.values[:-1] * lump
    inc = cont + Fr[1:] * H.pre[1:] * jumps
    values = np.concatenate([[0.0], np.cumsum(inc)])
    pre = np.empty_like(values)
    pre[0] = 0.0
    pre[1:] = values[:-1] + cont
    anti[:, 0] = values[:-1]
    return CadlagSeries(H.path, tl, values, pre, anti)


def lebesgue_integral(H: CadlagSeries, rate: float, F: Optional[StepFunction] = None) -> CadlagSeries:
    """``int_0^t F(u) H(u) rate du`` in closed form."""
    if F is not None:
        H = H.refine(F.breakpoints)
    tl = H.timeline
    h = np.diff(tl)
    Fl = np.ones(len(h)) if F is None else F(tl[:-1])
    D = H.poly.shape[1]
    anti = np.zeros((len(h), D + 1))
    anti[:, 1:] = H.poly * (rate * Fl)[:, None] / np.arange(1, D + 1)[None, :]
    values = np.concatenate([[0.0], np.cumsum(_polyval(anti, h))])
    anti[:, 0] = values[:-1]
    pre = values.copy()
    pre[0] = 0.0
    return CadlagSeries(H.path, tl, values, pre, anti)


def stop_at(series: CadlagSeries, u: float) -> CadlagSeries:
    """The series stopped at the deterministic time ``u``."""
    if not 0.0 <= u <= series.timeline[-1]:
        raise ValueError("stopping time outside [0, T]")
    s = series.refine([u])
    tl = s.timeline
    k = int(np.searchsorted(tl, u))
    values, pre, poly = s.values.copy(), s.pre.copy(), s.poly.copy()
    values[k + 1:] = values[k]
    pre[k + 1:] = values[k]
    poly[k:] = 0.0
    poly[k:, 0] = values[k]
    return CadlagSeries(s.path, tl, values, pre, poly)
