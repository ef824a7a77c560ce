"""Iterated stochastic integrals and their deterministic second moments."""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import List, Sequence

import numpy as np

from .errors import OrderMismatch, UnsupportedOrder
from .functions import TestFunction
from .measure import LevyTriplet, MuMeasure, mu_inner
from .paths import CadlagSeries, constant_series, stochastic_integral
from .tensors import ElementaryTensor, IteratedSpec


def iterate(spec: IteratedSpec, series: Sequence[CadlagSeries], all_levels: bool = False,
            path=None):
    """``J_n`` of ``spec`` driven by ``series[k] = X^{alpha_{k+1}}``.

    Level ``m`` integrates the left limit of level ``m-1`` times ``F_m``.
    With ``all_levels`` the list ``[J_0, ..., J_n]`` is returned.  An
    order-0 spec has no series, so ``path`` must be given; the result is
    the constant ``F_0``.

    Raises
    ------
    OrderMismatch
        If the number of series differs from the order of ``spec``.
    PathMismatch
        If the series come from different paths.
    """
    if len(series) != spec.order:
        raise OrderMismatch(f"spec of order {spec.order} needs {spec.order} series, got {len(series)}")
    if spec.order == 0:
        if path is None:
            raise ValueError("order 0 needs the path")
        J = constant_series(path, spec.tensor.f0)
        return [J] if all_levels else J
    base = series[0]
    knots = spec.tensor.knots()
    J = constant_series(base.path, spec.tensor.f0, base.refine(knots).timeline)
    levels = [J]
    for X, F in zip(series, spec.tensor.factors):
        J = stochastic_integral(J, X, F)
        levels.append(J)
    return levels if all_levels else J


def simplex_integral(tensor: ElementaryTensor, bracket_rates: Sequence[float], t: float) -> float:
    """``F0 * int_{0<t1<...<tn<t} prod_k c_k F_k(t_k) dt``, exact up to rounding.

    Factors are step functions, so the recursion stays inside piecewise
    polynomials; coefficients are kept in local coordinates of each piece.
    """
    n = tensor.order
    if len(bracket_rates) != n:
        raise OrderMismatch("one bracket rate per factor is required")
    if n == 0:
        return tensor.f0
    pts = set([0.0, float(t)])
    for f in tensor.factors:
        pts.update(b for b in f.breakpoints if 0.0 < b < t)
    edges = np.array(sorted(pts))
    h = np.diff(edges)
    M = len(h)
    phi = np.ones((M, 1))
    for F, c in zip(tensor.factors, bracket_rates):
        step = c * F(edges[:-1])
        integrand = phi * step[:, None]
        D = integrand.shape[1]
        anti = np.zeros((M, D + 1))
        anti[:, 1:] = integrand / np.arange(1, D + 1)[None, :]
        powers = h[:, None] ** np.arange(D + 1)[None, :]
        incr = (anti * powers).sum(axis=1)
        anti[:, 0] = np.concatenate([[0.0], np.cumsum(incr)[:-1]])
        phi = anti
    D = phi.shape[1]
    end = float((phi[-1] * h[-1] ** np.arange(D)).sum())
    return tensor.f0 * end


def bracket_rates(spec_f: IteratedSpec, spec_g: IteratedSpec, family: Sequence[TestFunction],
                  mu: MuMeasure) -> List[float]:
    """``c_k = mu(f_{alpha_k} f_{beta_k})`` slot by slot."""
    return [mu_inner(family[a], family[b], mu) for a, b in zip(spec_f.indices, spec_g.indices)]


def second_moment_reference(spec_f: IteratedSpec, spec_g: IteratedSpec,
                            family: Sequence[TestFunction], mu: MuMeasure, t: float) -> float:
    """``E[J_n(F)_t J_m(G)_t]``: zero across orders, a simplex integral otherwise."""
    if spec_f.order != spec_g.order:
        return 0.0
    rates = bracket_rates(spec_f, spec_g, family, mu)
    return simplex_integral(spec_f.tensor.times(spec_g.tensor), rates, t)


def hermite_reference(n: int, w, t):
    """Closed form of ``J_n`` for Brownian motion with flat tensor, ``n <= 3``."""
    w = np.asarray(w, dtype=float)
    table = {0: lambda: np.ones_like(w), 1: lambda: w, 2: lambda: (w * w - t) / 2,
             3: lambda: (w ** 3 - 3 * t * w) / 6}
    if n not in table:
        raise UnsupportedOrder(f"closed form only for n <= 3, got {n}")
    return table[n]()


def charlier_style_reference(n: int, nbar, count):
    """Closed form of ``J_n`` for a unit-jump compensated Poisson process.

    ``nbar`` is the compensated value and ``count`` the number of jumps, so
    ``a = count - nbar`` is the compensator.  Uses the generating function
    ``(1 + z)^N exp(-a z)``.
    """
    if n < 0 or n > 3:
        raise UnsupportedOrder(f"closed form only for n <= 3, got {n}")
    N = np.asarray(count, dtype=float)
    a = N - np.asarray(nbar, dtype=float)

    def binom(k):
        out = np.ones_like(N)
        for i in range(k):
            out = out * (N - i) / (i + 1)
        return out

    return sum(binom(k) * (-a) ** (n - k) / factorial(n - k) for k in range(n + 1))


@dataclass(frozen=True)
class IsometryResult:
    mc_estimate: float
    std_error: float
    reference: float
    z_score: float
    n_paths: int


def z_score(estimate: float, se: float, reference: float) -> float:
    if se > 0:
        return (estimate - reference) / se
    return 0.0 if abs(estimate - reference) <= 1e-12 * max(1.0, abs(reference)) else float("inf")


def isometry_check(spec_f: IteratedSpec, spec_g: IteratedSpec, family: Sequence[TestFunction],
                   triplet: LevyTriplet, t: float, n_paths: int, seed: int,
                   grid_step: float = 1e-3, workers: int = 1) -> IsometryResult:
    """Monte Carlo ``E[J(F)_t J(G)_t]`` against its deterministic value."""
    from .montecarlo import terminal_values

    vals = terminal_values([spec_f, spec_g], family, triplet, t, grid_step, n_paths, seed, workers)
    prod = vals[:, 0] * vals[:, 1]
    est = float(prod.mean())
    se = float(prod.std(ddof=1) / np.sqrt(len(prod)))
    ref = second_moment_reference(spec_f, spec_g, family, triplet.mu, t)
    return IsometryResult(est, se, ref, z_score(est, se, ref), n_paths)


def moment_matrix_check(specs: Sequence[IteratedSpec], family: Sequence[TestFunction],
                        triplet: LevyTriplet, t: float, n_paths: int, seed: int,
                        grid_step: float = 1e-3, workers: int = 1):
    """All pairwise moments of ``specs`` from one set of paths.

    Returns ``(estimate, se, reference, z)`` as ``(k, k)`` arrays.
    """
    from .montecarlo import terminal_values

    vals = terminal_values(specs, family, triplet, t, grid_step, n_paths, seed, workers)
    k = len(specs)
    est, se, ref, z = (np.zeros((k, k)) for _ in range(4))
    for i in range(k):
        for j in range(i, k):
            prod = vals[:, i] * vals[:, j]
            est[i, j] = est[j, i] = prod.mean()
            se[i, j] = se[j, i] = prod.std(ddof=1) / np.sqrt(len(prod))
            ref[i, j] = ref[j, i] = second_moment_reference(specs[i], specs[j], family, triplet.mu, t)
            z[i, j] = z[j, i] = z_score(est[i, j], se[i, j], ref[i, j])
    return est, se, ref, z
