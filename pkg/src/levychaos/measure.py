"""Jump measures, the measure mu = sigma^2 delta_0 + nu, and L2(mu) geometry."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NotIntegrable, NotSquareIntegrable
from .functions import Flags, Hat, JumpFn, TestFunction, Unhat

# A shell integral over [R/2, R] smaller than this fraction of the one over
# [R/4, R/2] is taken as evidence of a convergent tail.
TAIL_RATIO = 0.9


class JumpMeasure:
    """Common interface of the two jump-measure variants."""

    def integrate(self, fn: Callable, with_error: bool = False):
        raise NotImplementedError

    def total_mass(self) -> float:
        raise NotImplementedError

    def certify(self, jump: JumpFn) -> Flags:
        raise NotImplementedError

    def tail_converges(self, fn: Callable) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class Atomic(JumpMeasure):
    """Finitely many atoms ``sum w_i delta_{x_i}`` away from the origin."""

    locations: tuple
    weights: tuple

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if locs.shape != w.shape or locs.ndim != 1:
            raise ValueError("locations and weights must be 1-d and of equal length")
        if np.any(locs == 0):
            raise ValueError("a jump measure cannot charge the origin")
        if np.any(~np.isfinite(locs)) or np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("atom weights must be positive and finite")
        if len(np.unique(locs)) != len(locs):
            raise ValueError("atom locations must be distinct")
        order = np.argsort(locs)
        object.__setattr__(self, "locations", tuple(float(v) for v in locs[order]))
        object.__setattr__(self, "weights", tuple(float(v) for v in w[order]))

    @classmethod
    def of(cls, pairs):
        """Build from ``[(location, weight), ...]``."""
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def loc(self) -> np.ndarray:
        return np.asarray(self.locations)

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights)

    def __len__(self):
        return len(self.locations)

    def integrate(self, fn, with_error=False):
        if not self.locations:
            return (0.0, 0.0) if with_error else 0.0
        val = float(np.dot(self.w, fn(self.loc)))
        return (val, 0.0) if with_error else val

    def total_mass(self):
        return float(np.sum(self.weights))

    def certify(self, jump):
        vals = jump(self.loc) if self.locations else np.zeros(0)
        ok = bool(np.all(np.isfinite(vals)))
        return Flags(in_L1_nu=ok, in_L2_nu=ok, bounded=ok)

    def tail_converges(self, fn):
        return self.certify(fn).in_L2_nu

    def sample_sizes(self, rng, n):
        idx = rng.choice(len(self.locations), size=n, p=self.w / self.w.sum())
        return self.loc[idx]


def _gauss_legendre(order):
    return np.polynomial.legendre.leggauss(order)


@dataclass(frozen=True)
class Density(JumpMeasure):
    """Absolutely continuous jump measure ``h(x) dx`` on ``eps < |x| <= cutoff``.

    Integrals use composite Gauss-Legendre panels: geometric from ``eps`` to 1
    and uniform (width ``panel_width``) from 1 to ``cutoff`` on each side.
    ``breakpoints`` split panels so that piecewise-smooth integrands are
    integrated to rounding error.
    """

    h: Callable
    truncation_eps: float
    cutoff: float = 50.0
    panel_width: float = 0.5
    order: int = 16
    breakpoints: tuple = ()
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if self.truncation_eps < 0 or self.cutoff <= max(self.truncation_eps, 0.0):
            raise ValueError("need 0 <= truncation_eps < cutoff")
        small = self.integrate(lambda x: np.minimum(x * x, 1.0))
        if not np.isfinite(small):
            raise NotIntegrable("int (x^2 ^ 1) dnu diverges")

    # -- quadrature -----------------------------------------------------
    def _edges(self, sign):
        lo = self.truncation_eps if self.truncation_eps > 0 else 2.0 ** -40
        edges = []
        if lo < 1.0:
            k = int(np.ceil(np.log2(1.0 / lo)))
            edges.extend(np.geomspace(lo, 1.0, k + 1))
            start = 1.0
        else:
            edges.append(lo)
            start = lo
        if self.cutoff > start:
            m = max(1, int(np.ceil((self.cutoff - start) / self.panel_width)))
            edges.extend(np.linspace(start, self.cutoff, m + 1)[1:])
        extra = [abs(b) for b in self.breakpoints if b * sign > 0 and lo < abs(b) < self.cutoff]
        edges = np.unique(np.concatenate([np.asarray(edges), np.asarray(extra, dtype=float)]))
        return edges

    def _rule(self, order):
        key = ("rule", order)
        if key not in self._cache:
            t, wt = _gauss_legendre(order)
            nodes, weights = [], []
            for sign in (1.0, -1.0):
                e = self._edges(sign)
                a, b = e[:-1, None], e[1:, None]
                x = 0.5 * (b - a) * t[None, :] + 0.5 * (a + b)
                wx = 0.5 * (b - a) * wt[None, :]
                nodes.append(sign * x.ravel())
                weights.append(wx.ravel())
            x = np.concatenate(nodes)
            w = np.concatenate(weights) * self.h(x)
            self._cache[key] = (x, w)
        return self._cache[key]

    @property
    def nodes(self):
        return self._rule(self.order)[0]

    @property
    def weights(self):
        """Quadrature weights already multiplied by ``h``."""
        return self._rule(self.order)[1]

    def with_breakpoints(self, points: Sequence[float]) -> "Density":
        pts = tuple(sorted(set(self.breakpoints) | {float(p) for p in points if p != 0}))
        if pts == self.breakpoints:
            return self
        key = ("refined", pts)
        if key not in self._cache:
            self._cache[key] = Density(self.h, self.truncation_eps, self.cutoff,
                                       self.panel_width, self.order, pts)
        return self._cache[key]

    def integrate(self, fn, with_error=False):
        x, w = self._rule(self.order)
        val = float(np.dot(w, fn(x)))
        if not with_error:
            return val
        xl, wl = self._rule(max(2, self.order // 2))
        return val, abs(val - float(np.dot(wl, fn(xl))))

    def total_mass(self):
        return self.integrate(lambda x: np.ones_like(x))

    def _shells(self, fn):
        R = self.cutoff
        out = []
        for lo, hi in ((R / 4, R / 2), (R / 2, R)):
            t, wt = _gauss_legendre(self.order)
            tot = 0.0
            for sign in (1.0, -1.0):
                edges = np.linspace(lo, hi, 33)
                a, b = edges[:-1, None], edges[1:, None]
                x = sign * (0.5 * (b - a) * t + 0.5 * (a + b)).ravel()
                wx = (0.5 * (b - a) * wt).ravel()
                tot += float(np.dot(wx * self.h(x), fn(x)))
            out.append(tot)
        return out

    def tail_converges(self, fn):
        """Shell-ratio test for ``int fn dnu`` over large ``|x|``."""
        inner, outer = self._shells(fn)
        if not (np.isfinite(inner) and np.isfinite(outer)):
            return False
        if inner == 0.0:
            return outer == 0.0
        return outer < TAIL_RATIO * inner

    def certify(self, jump):
        x, w = self._rule(self.order)
        vals = jump(x)
        finite = bool(np.all(np.isfinite(vals)))
        if not finite:
            return Flags(False, False, False)
        l1 = np.isfinite(np.dot(w, np.abs(vals))) and self.tail_converges(lambda y: np.abs(jump(y)))
        l2 = np.isfinite(np.dot(w, vals * vals)) and self.tail_converges(lambda y: jump(y) ** 2)
        bounded = jump.bounded
        if bounded is None:
            R = self.cutoff
            far = np.abs(x) > R / 2
            mid = (np.abs(x) > R / 4) & ~far
            sup_far = np.max(np.abs(vals[far])) if far.any() else 0.0
            sup_mid = np.max(np.abs(vals[mid])) if mid.any() else 0.0
            bounded = sup_far <= 1.5 * sup_mid + 1e-300
        return Flags(bool(l1), bool(l2), bool(bounded))

    # -- sampling ---------------------------------------------------------
    def _table(self):
        if "table" not in self._cache:
            lo = self.truncation_eps
            xs = np.geomspace(lo, self.cutoff, 20001)
            tables = []
            for sign in (1.0, -1.0):
                hx = self.h(sign * xs)
                cdf = np.concatenate([[0.0], np.cumsum(0.5 * (hx[1:] + hx[:-1]) * np.diff(xs))])
                tables.append((sign, cdf))
            self._cache["table"] = (xs, tables)
        return self._cache["table"]

    def sample_sizes(self, rng, n):
        """Approximate inverse-CDF draws from the truncated normalized density."""
        xs, tables = self._table()
        masses = np.array([t[1][-1] for t in tables])
        u = rng.random(n) * masses.sum()
        out = np.empty(n)
        pos = u < masses[0]
        out[pos] = np.interp(u[pos], tables[0][1], xs)
        out[~pos] = -np.interp(u[~pos] - masses[0], tables[1][1], xs)
        return out


# -- named densities (picklable) ---------------------------------------------

@dataclass(frozen=True)
class CauchyJumps:
    """``scale / x^2``: no moments of order >= 1."""

    scale: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale / (x * x)


@dataclass(frozen=True)
class GaussianJumps:
    """``rate`` times the centered normal density with std ``std``."""

    rate: float = 1.0
    std: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.rate * np.exp(-0.5 * (x / self.std) ** 2) / (self.std * np.sqrt(2 * np.pi))


@dataclass(frozen=True)
class VarianceGammaJumps:
    """``C exp(-G|x|)/|x|`` for ``x < 0`` and ``C exp(-M x)/x`` for ``x > 0``."""

    C: float = 1.0
    G: float = 5.0
    M: float = 5.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        rate = np.where(x < 0, self.G, self.M)
        return self.C * np.exp(-rate * ax) / ax


NAMED_DENSITIES = {"cauchy": CauchyJumps, "gauss": GaussianJumps, "vg": VarianceGammaJumps}


# -- triplet and mu -----------------------------------------------------------

@dataclass(frozen=True)
class MuMeasure:
    """``mu = sigma2 * delta_0 + nu``."""

    sigma2: float
    nu: JumpMeasure

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")


@dataclass(frozen=True)
class LevyTriplet:
    """Characteristics ``(beta, sigma2, nu)`` of a Levy process."""

    beta: float
    sigma2: float
    nu: JumpMeasure

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")

    @property
    def mu(self) -> MuMeasure:
        return MuMeasure(self.sigma2, self.nu)


def empty_measure() -> Atomic:
    return Atomic((), ())


def _measure_for(nu, fns):
    if isinstance(nu, Density):
        pts = set()
        for fn in fns:
            pts.update(fn.breakpoints())
        if pts:
            return nu.with_breakpoints(pts)
    return nu


def _flags(f: TestFunction, nu) -> Flags:
    return f.flags if f.flags is not None else nu.certify(f.jump)


def mu_integral(f: TestFunction, mu: MuMeasure, with_error: bool = False):
    """``mu(f) = sigma2 * f(0) + nu(f~)``.

    Exact for atomic ``nu``; for densities the second return value (when
    ``with_error``) is the gap between two quadrature orders.
    """
    if not _flags(f, mu.nu).in_L1_nu:
        raise NotIntegrable(f"{f.label()} is not nu-integrable")
    nu = _measure_for(mu.nu, [f.jump])
    val, err = nu.integrate(f.jump, with_error=True) if with_error else (nu.integrate(f.jump), 0.0)
    total = mu.sigma2 * f.at_zero + val
    return (total, err) if with_error else total


def nu_integral(f: TestFunction, nu: JumpMeasure) -> float:
    """``nu(f~)``; the compensator rate of ``X^f``."""
    if not _flags(f, nu).in_L1_nu:
        raise NotIntegrable(f"{f.label()} is not nu-integrable")
    return _measure_for(nu, [f.jump]).integrate(f.jump)


def mu_inner(f: TestFunction, g: TestFunction, mu: MuMeasure) -> float:
    """``<f, g>_{L2(mu)} = sigma2 f(0) g(0) + int f~ g~ dnu``."""
    for h in (f, g):
        if not _flags(h, mu.nu).in_L2_nu:
            raise NotSquareIntegrable(f"{h.label()} is not in L2(nu)")
    nu = _measure_for(mu.nu, [f.jump, g.jump])
    fj, gj = f.jump, g.jump
    return mu.sigma2 * f.at_zero * g.at_zero + nu.integrate(lambda x: fj(x) * gj(x))


def mu_norm(f: TestFunction, mu: MuMeasure) -> float:
    return float(np.sqrt(max(mu_inner(f, f, mu), 0.0)))


def eta_inner(f: TestFunction, g: TestFunction, mu: MuMeasure) -> float:
    """Inner product in ``L2(eta)``, ``eta = sigma2 delta_0 + x^2 nu(dx)``."""
    nu = _measure_for(mu.nu, [f.jump, g.jump])
    fj, gj = f.jump, g.jump
    return mu.sigma2 * f.at_zero * g.at_zero + nu.integrate(lambda x: x * x * fj(x) * gj(x))


def hat_map(g: TestFunction) -> TestFunction:
    """``g^(x) = x g(x)`` off the origin and ``g^(0) = g(0)``."""
    if isinstance(g.jump, Unhat):
        jump = g.jump.inner
    else:
        jump = Hat(g.jump)
    return TestFunction(g.at_zero, jump, name=f"hat({g.label()})")


def unhat_map(f: TestFunction) -> TestFunction:
    """Inverse of :func:`hat_map`."""
    if isinstance(f.jump, Hat):
        jump = f.jump.inner
    else:
        jump = Unhat(f.jump)
    return TestFunction(f.at_zero, jump, name=f"unhat({f.label()})")
