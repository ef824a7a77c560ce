"""Test functions in L2(mu): a value at the origin plus a jump part.

The jump part of a :class:`TestFunction` is a picklable callable acting on
``x != 0``.  Keeping ``f(0)`` in a separate field means integrals against the
jump measure never see the origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np


class JumpFn:
    """Base class for vectorized real functions on the punctured line."""

    #: ``True``/``False`` when boundedness is known analytically.
    bounded: Optional[bool] = None

    def __call__(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def breakpoints(self) -> tuple:
        """Points where the function may be discontinuous."""
        return ()

    def __repr__(self):
        return self.describe()

    def describe(self) -> str:
        return type(self).__name__


@dataclass(frozen=True, repr=False)
class Zero(JumpFn):
    bounded = True

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def describe(self):
        return "0"


@dataclass(frozen=True, repr=False)
class Constant(JumpFn):
    value: float
    bounded = True

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def describe(self):
        return f"{self.value:g}"


@dataclass(frozen=True, repr=False)
class Monomial(JumpFn):
    power: int

    @property
    def bounded(self):
        return self.power == 0

    def __call__(self, x):
        return np.asarray(x, dtype=float) ** self.power

    def describe(self):
        return "x" if self.power == 1 else f"x^{self.power}"


@dataclass(frozen=True, repr=False)
class Indicator(JumpFn):
    """Indicator of the half-open interval ``(a, b]``."""

    a: float
    b: float
    bounded = True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return ((x > self.a) & (x <= self.b)).astype(float)

    def breakpoints(self):
        return (self.a, self.b)

    def describe(self):
        return f"1({self.a:g},{self.b:g}]"


@dataclass(frozen=True, repr=False)
class LeftClosedIndicator(JumpFn):
    """Indicator of ``[a, b)``."""

    a: float
    b: float
    bounded = True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return ((x >= self.a) & (x < self.b)).astype(float)

    def breakpoints(self):
        return (self.a, self.b)

    def describe(self):
        return f"1[{self.a:g},{self.b:g})"


@dataclass(frozen=True, repr=False)
class AtomTable(JumpFn):
    """Values prescribed at finitely many points, zero elsewhere."""

    locations: tuple
    values: tuple
    bounded = True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for loc, val in zip(self.locations, self.values):
            out = np.where(x == loc, val, out)
        return out

    def describe(self):
        pairs = ", ".join(f"{l:g}->{v:g}" for l, v in zip(self.locations, self.values))
        return "{" + pairs + "}"


@dataclass(frozen=True, repr=False)
class Combination(JumpFn):
    """Finite linear combination ``sum c_i g_i``."""

    terms: tuple  # of (coef, JumpFn)

    @property
    def bounded(self):
        flags = [fn.bounded for c, fn in self.terms if c != 0]
        if all(b is True for b in flags):
            return True
        return None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c, fn in self.terms:
            if c != 0:
                out = out + c * fn(x)
        return out

    def breakpoints(self):
        pts = set()
        for _, fn in self.terms:
            pts.update(fn.breakpoints())
        return tuple(sorted(pts))

    def describe(self):
        return " + ".join(f"{c:.6g}*({fn.describe()})" for c, fn in self.terms) or "0"


@dataclass(frozen=True, repr=False)
class Product(JumpFn):
    factors: tuple

    @property
    def bounded(self):
        flags = [fn.bounded for fn in self.factors]
        if all(b is True for b in flags):
            return True
        return None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        for fn in self.factors:
            out = out * fn(x)
        return out

    def breakpoints(self):
        pts = set()
        for fn in self.factors:
            pts.update(fn.breakpoints())
        return tuple(sorted(pts))

    def describe(self):
        return "*".join(f"({fn.describe()})" for fn in self.factors)


@dataclass(frozen=True, repr=False)
class Hat(JumpFn):
    """``x -> x * inner(x)``."""

    inner: JumpFn

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x * self.inner(x)

    def breakpoints(self):
        return self.inner.breakpoints()

    def describe(self):
        return f"x*({self.inner.describe()})"


@dataclass(frozen=True, repr=False)
class Unhat(JumpFn):
    """``x -> inner(x) / x``."""

    inner: JumpFn

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.inner(x) / x

    def breakpoints(self):
        return self.inner.breakpoints()

    def describe(self):
        return f"({self.inner.describe()})/x"


@dataclass(frozen=True, repr=False)
class ExpTail(JumpFn):
    """``exp(rate/2 * |x|) * 1{|x| > eps}``, used for tail certificates."""

    rate: float
    eps: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) > self.eps, np.exp(0.5 * self.rate * np.abs(x)), 0.0)

    def breakpoints(self):
        return (-self.eps, self.eps)


def hermite_orthonormal(n: int, x):
    """Hermite functions orthonormal for the weight ``exp(-x^2)``.

    Returns an array of shape ``(n + 1,) + x.shape``; row ``k`` holds
    ``H_k(x)`` with ``int H_k^2 exp(-x^2) dx = 1``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = np.pi ** -0.25
    if n >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(1, n):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * x * out[k] - np.sqrt(k / (k + 1)) * out[k - 1]
    return out


@dataclass(frozen=True, repr=False)
class HermiteWeighted(JumpFn):
    """``h(x)^{-1/2} exp(-x^2/2) H_n(x)`` for a jump density ``h``."""

    n: int
    density: Callable

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        h = np.asarray(self.density(x), dtype=float)
        pos = h > 0  # zero where nu has no mass (or the density underflows)
        g = np.zeros_like(x)
        g[pos] = np.exp(-0.5 * x[pos] ** 2) / np.sqrt(h[pos])
        return g * hermite_orthonormal(self.n, x)[self.n]

    def describe(self):
        return f"hermite[{self.n}]"


def haar_psi(x):
    """Haar mother wavelet: 1 on [0, 1/2), -1 on [1/2, 1)."""
    x = np.asarray(x, dtype=float)
    return np.where((x >= 0) & (x < 0.5), 1.0, 0.0) - np.where((x >= 0.5) & (x < 1.0), 1.0, 0.0)


@dataclass(frozen=True, repr=False)
class HaarWeighted(JumpFn):
    """``h(x)^{-1/2} psi_jk(x)`` with ``psi_jk = 2^{j/2} psi(2^j x - k)``."""

    j: int
    k: int
    density: Callable

    def support(self):
        return (self.k / 2.0 ** self.j, (self.k + 1) / 2.0 ** self.j)

    def raw(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 ** (0.5 * self.j) * haar_psi(2.0 ** self.j * x - self.k)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        psi = self.raw(x)
        out = np.zeros_like(x)
        nz = psi != 0
        h = np.asarray(self.density(x[nz]), dtype=float)
        safe = np.where(h > 0, h, 1.0)
        out[nz] = np.where(h > 0, psi[nz] / np.sqrt(safe), 0.0)
        return out

    def breakpoints(self):
        a, b = self.support()
        return (a, 0.5 * (a + b), b)

    def describe(self):
        return f"haar[{self.j},{self.k}]"


@dataclass(frozen=True)
class Flags:
    in_L1_nu: bool
    in_L2_nu: bool
    bounded: bool


@dataclass(frozen=True)
class TestFunction:
    """An element of L2(mu) stored as ``f(0)`` plus the jump part ``f~``.

    Parameters
    ----------
    at_zero : float
        The value ``f(0)``; it only meets the Gaussian part of ``mu``.
    jump : JumpFn
        The restriction of ``f`` to the punctured line.
    name : str
        Label used in reports.
    flags : Flags or None
        Integrability certificate, filled in by :meth:`certify`.
    """

    __test__ = False  # keep pytest from collecting this class

    at_zero: float
    jump: JumpFn = field(default_factory=Zero)
    name: str = ""
    flags: Optional[Flags] = None

    def __call__(self, x):
        """Evaluate ``f`` with ``f(0) = at_zero``."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = self.jump(np.where(x == 0, 1.0, x))
        return np.where(x == 0, self.at_zero, vals)

    def jump_only(self) -> "TestFunction":
        """The function ``f~ = 1_{R\\0} f``."""
        return TestFunction(0.0, self.jump, name=f"~{self.name}" if self.name else "")

    def label(self) -> str:
        return self.name or f"{self.at_zero:g}*1{{0}} + {self.jump.describe()}"

    def certify(self, nu) -> "TestFunction":
        """Return a copy carrying integrability flags computed against ``nu``."""
        return replace(self, flags=nu.certify(self.jump))

    def __add__(self, other):
        if not isinstance(other, TestFunction):
            return NotImplemented
        return TestFunction(self.at_zero + other.at_zero,
                            _combine([(1.0, self.jump), (1.0, other.jump)]))

    def __sub__(self, other):
        if not isinstance(other, TestFunction):
            return NotImplemented
        return TestFunction(self.at_zero - other.at_zero,
                            _combine([(1.0, self.jump), (-1.0, other.jump)]))

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, other):
        if isinstance(other, TestFunction):
            return TestFunction(self.at_zero * other.at_zero,
                                _multiply([self.jump, other.jump]))
        if np.isscalar(other):
            return TestFunction(float(other) * self.at_zero,
                                _combine([(float(other), self.jump)]), name="")
        return NotImplemented

    __rmul__ = __mul__


def _combine(terms: Sequence) -> JumpFn:
    flat = []
    for c, fn in terms:
        if c == 0 or isinstance(fn, Zero):
            continue
        if isinstance(fn, Combination):
            flat.extend((c * cc, ff) for cc, ff in fn.terms)
        else:
            flat.append((c, fn))
    if not flat:
        return Zero()
    return Combination(tuple(flat))


def _multiply(factors: Sequence) -> JumpFn:
    flat = []
    for fn in factors:
        if isinstance(fn, Zero):
            return Zero()
        if isinstance(fn, Product):
            flat.extend(fn.factors)
        else:
            flat.append(fn)
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def linear_combination(coefs: Sequence[float], funcs: Sequence[TestFunction], name="") -> TestFunction:
    """``sum coefs[i] * funcs[i]`` as a single test function."""
    at0 = float(sum(c * f.at_zero for c, f in zip(coefs, funcs)))
    jump = _combine([(float(c), f.jump) for c, f in zip(coefs, funcs)])
    return TestFunction(at0, jump, name=name)


def product(funcs: Sequence[TestFunction], name="") -> TestFunction:
    """Pointwise product of test functions."""
    at0 = float(np.prod([f.at_zero for f in funcs]))
    return TestFunction(at0, _multiply([f.jump for f in funcs]), name=name)


def jump_product(funcs: Sequence[TestFunction], name="") -> TestFunction:
    """``prod f~_i`` with value zero at the origin."""
    return TestFunction(0.0, _multiply([f.jump for f in funcs]), name=name)


def identity_plus_origin(c: float = 1.0) -> TestFunction:
    """``c * 1{0} + x``."""
    return TestFunction(c, Monomial(1), name=f"{c:g}*1{{0}}+x")


def monomial(n: int) -> TestFunction:
    return TestFunction(0.0, Monomial(n), name=f"x^{n}")


def origin_indicator() -> TestFunction:
    """``1{0}``: the generator of the Gaussian part."""
    return TestFunction(1.0, Zero(), name="1{0}")
