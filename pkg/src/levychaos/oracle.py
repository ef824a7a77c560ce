"""Event-driven exact reference for pure-jump models with finitely many atoms.

Between jumps an iterated integral solves a polynomial ODE, so every level is
a polynomial in absolute time on each inter-event interval.  The second-moment
reference is evaluated in rational arithmetic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import GaussianPartPresent, OrderMismatch
from .functions import Monomial, TestFunction
from .measure import Atomic, MuMeasure, mu_inner, nu_integral
from .tensors import ElementaryTensor, IteratedSpec, StepFunction

MAX_ORDER = 5


@dataclass
class PiecewisePoly:
    """Piecewise polynomial in absolute time with jumps at breakpoints.

    ``pieces[i]`` is valid on ``[breakpoints[i], breakpoints[i+1])``.
    """

    breakpoints: np.ndarray
    pieces: List[Polynomial]

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = np.clip(np.searchsorted(self.breakpoints, t, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(t)
        for k in np.unique(i):
            sel = i == k
            out[sel] = self.pieces[k](t[sel])
        last = t >= self.breakpoints[-1]
        if last.any():
            out[last] = self.terminal
        return out

    def left_limit(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = np.clip(np.searchsorted(self.breakpoints, t, side="left") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(t)
        for k in np.unique(i):
            sel = i == k
            out[sel] = self.pieces[k](t[sel])
        out[t <= self.breakpoints[0]] = 0.0
        return out

    terminal: float = 0.0

    @property
    def degree(self) -> int:
        return max(p.degree() for p in self.pieces)


def exact_iterate(spec: IteratedSpec, jump_times: Sequence[float], jump_sizes: Sequence[float],
                  family: Sequence[TestFunction], nu: Atomic, sigma2: float, horizon: float,
                  all_levels: bool = False):
    """Exact ``J_n`` along one pure-jump path.

    Raises
    ------
    GaussianPartPresent
        If ``sigma2 != 0``.
    """
    if sigma2 != 0:
        raise GaussianPartPresent("the exact oracle needs sigma2 = 0")
    if not isinstance(nu, Atomic):
        raise TypeError("the exact oracle needs an atomic jump measure")
    n = spec.order
    if n > MAX_ORDER:
        raise OrderMismatch(f"oracle order capped at {MAX_ORDER}")
    fam = [family[a] for a in spec.indices]
    comp = [nu_integral(f, nu) for f in fam]
    factors = spec.tensor.factors
    jt = np.asarray(jump_times, dtype=float)
    js = np.asarray(jump_sizes, dtype=float)
    events = sorted(set(jt.tolist()) | {b for F in factors for b in F.interior} | {float(horizon)})
    jump_at = {float(t): float(x) for t, x in zip(jt, js)}

    vals = [float(spec.tensor.f0)] + [0.0] * n
    t0 = 0.0
    bps = [0.0]
    pieces = [[] for _ in range(n + 1)]
    for t1 in events:
        if t1 > t0:
            polys = [Polynomial([vals[0]])]
            for m in range(1, n + 1):
                rate = -comp[m - 1] * float(factors[m - 1](t0))
                integ = polys[m - 1].integ(lbnd=t0)
                polys.append(Polynomial([vals[m]]) + rate * integ)
            for m in range(n + 1):
                pieces[m].append(polys[m])
            left = [p(t1) for p in polys]
            bps.append(t1)
        else:
            left = list(vals)
        if t1 in jump_at and t1 > 0:
            x = jump_at[t1]
            new = list(left)
            for m in range(1, n + 1):
                new[m] = left[m] + float(factors[m - 1](t1)) * left[m - 1] * float(fam[m - 1].jump(np.array([x]))[0])
            vals = new
        else:
            vals = left
        t0 = t1
    out = []
    for m in range(n + 1):
        pp = PiecewisePoly(np.array(bps), pieces[m] or [Polynomial([vals[m]])])
        pp.terminal = vals[m]
        out.append(pp)
    return out if all_levels else out[-1]


def _poly_integ_from(coefs: List[Fraction], a: Fraction) -> List[Fraction]:
    """Coefficients of ``int_a^t p(u) du`` for ``p`` given in absolute ``t``."""
    anti = [Fraction(0)] + [c / (k + 1) for k, c in enumerate(coefs)]
    anti[0] = -sum(c * a ** k for k, c in enumerate(anti))
    return anti


def _poly_eval(coefs: List[Fraction], t: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coefs):
        acc = acc * t + c
    return acc


def exact_simplex(tensor: ElementaryTensor, rates: Sequence[float], t: float) -> Fraction:
    """Simplex integral in rational arithmetic (inputs converted exactly)."""
    if len(rates) != tensor.order:
        raise OrderMismatch("one rate per factor")
    T = Fraction(t)
    pts = {Fraction(0), T}
    for F in tensor.factors:
        pts.update(Fraction(b) for b in F.breakpoints if 0 < b < t)
    edges = sorted(pts)
    phi = [[Fraction(1)] for _ in edges[:-1]]
    for F, c in zip(tensor.factors, rates):
        c = Fraction(c)
        new = []
        acc = Fraction(0)
        for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
            step = c * Fraction(float(F(float(a))))
            integ = _poly_integ_from([step * q for q in phi[i]], a)
            integ[0] += acc
            new.append(integ)
            acc = _poly_eval(integ, b)
        phi = new
    return Fraction(tensor.f0) * _poly_eval(phi[-1], edges[-1])


def exact_second_moment(spec: IteratedSpec, t: float, mu: MuMeasure,
                        family: Sequence[TestFunction]) -> float:
    """``E[J_n(F)_t^2]`` with rates ``mu(f_alpha^2)`` evaluated exactly."""
    rates = [mu_inner(family[a], family[a], mu) for a in spec.indices]
    return float(exact_simplex(spec.tensor.times(spec.tensor), rates, t))


def dimension_audit(nu: Atomic, sigma2: float) -> int:
    """Dimension of L2(mu) for finitely many atoms: ``k + 1{sigma2 > 0}``."""
    return len(set(nu.locations)) + (1 if sigma2 > 0 else 0)


# -- random scenarios and golden files ---------------------------------------

def random_scenario(rng: np.random.Generator, max_order: int = 3, horizon: float = 1.0) -> dict:
    """A JSON-ready pure-jump scenario: atoms, family, spec and one jump list."""
    k = int(rng.integers(1, 4))
    locs = []
    while len(locs) < k:
        x = float(np.round(rng.uniform(-2, 2), 3))
        if abs(x) > 0.1 and all(abs(x - y) > 0.05 for y in locs):
            locs.append(x)
    weights = [float(np.round(rng.uniform(0.2, 3.0), 3)) for _ in locs]
    powers = [int(p) for p in rng.integers(1, 4, size=3)]
    n = int(rng.integers(1, max_order + 1))
    indices = [int(i) for i in rng.integers(0, len(powers), size=n)]
    factors = []
    for _ in range(n):
        r = int(rng.integers(1, 4))
        inner = sorted(set(np.round(rng.uniform(0, horizon, size=r - 1), 3).tolist()) - {0.0, horizon})
        bps = [0.0] + inner + [horizon]
        vals = [float(np.round(rng.uniform(-2, 2), 3)) for _ in range(len(bps) - 1)]
        factors.append({"breakpoints": bps, "values": vals})
    mass = sum(weights)
    nj = int(rng.poisson(mass * horizon))
    times = np.sort(horizon * (1.0 - rng.random(nj))).tolist()
    sizes = rng.choice(locs, size=nj, p=np.array(weights) / mass).tolist() if nj else []
    return {"atoms": locs, "weights": weights, "powers": powers, "indices": indices,
            "f0": float(np.round(rng.uniform(0.5, 2.0), 3)), "factors": factors,
            "horizon": horizon, "jump_times": times, "jump_sizes": sizes}


def scenario_objects(sc: dict):
    """Rebuild ``(spec, family, nu)`` from a scenario dictionary."""
    nu = Atomic(tuple(sc["atoms"]), tuple(sc["weights"]))
    family = [TestFunction(0.0, Monomial(p), name=f"x^{p}") for p in sc["powers"]]
    factors = tuple(StepFunction(tuple(f["breakpoints"]), tuple(f["values"])) for f in sc["factors"])
    spec = IteratedSpec(tuple(sc["indices"]), ElementaryTensor(sc["f0"], factors))
    return spec, family, nu


def scenario_path(sc: dict, grid_step: float = 0.25):
    """The scenario's jump list as a pure-jump :class:`LevyPath`."""
    from .paths import LevyPath, make_grid

    grid = make_grid(sc["horizon"], grid_step)
    return LevyPath(float(grid[-1]), grid, np.zeros(len(grid)), np.asarray(sc["jump_times"], float),
                    np.asarray(sc["jump_sizes"], float), 0.0)


def emit_golden(scenarios: Sequence[dict], path) -> None:
    """Canonical JSON: each scenario with the exact terminal value of every level."""
    records = []
    for sc in scenarios:
        spec, family, nu = scenario_objects(sc)
        levels = exact_iterate(spec, sc["jump_times"], sc["jump_sizes"], family, nu, 0.0,
                               sc["horizon"], all_levels=True)
        records.append({"scenario": sc, "terminal": [float(l.terminal) for l in levels]})
    with open(path, "w") as fh:
        json.dump(records, fh, sort_keys=True, indent=1)
        fh.write("\n")
