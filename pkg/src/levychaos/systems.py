"""Function systems in L2(mu) and their orthonormalization."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import (DensityRequired, EmptySystem, FamilyNotClosed, IllConditioned,
                     IntervalTouchesZero, TailConditionFailed)
from .functions import (AtomTable, ExpTail, HaarWeighted, HermiteWeighted, Indicator, Monomial,
                        TestFunction, Zero, hermite_orthonormal, linear_combination)
from .measure import Atomic, Density, MuMeasure, _measure_for, mu_inner


@dataclass(frozen=True)
class OrthonormalSystem:
    """Orthonormal members together with their measured Gram defect.

    ``coefficients[k]`` expresses member ``k`` in terms of the inputs that
    were handed to :func:`gram_schmidt`; ``kept`` lists the surviving input
    positions.
    """

    members: tuple
    gram_residual: float
    coefficients: np.ndarray = None
    kept: tuple = ()

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def __iter__(self):
        return iter(self.members)

    def without(self, index: int) -> "OrthonormalSystem":
        """Drop one direction (used to demonstrate incompleteness)."""
        keep = [m for i, m in enumerate(self.members) if i != index]
        if not keep:
            raise EmptySystem("cannot drop the only member")
        return OrthonormalSystem(tuple(keep), self.gram_residual)


def gram_matrix(funcs: Sequence[TestFunction], mu: MuMeasure) -> np.ndarray:
    n = len(funcs)
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            G[i, j] = G[j, i] = mu_inner(funcs[i], funcs[j], mu)
    return G


def orthonormality_residual(funcs: Sequence[TestFunction], mu: MuMeasure) -> float:
    """``max |<e_i, e_j> - delta_ij|`` over the system."""
    if not funcs:
        return 0.0
    G = gram_matrix(funcs, mu)
    return float(np.max(np.abs(G - np.eye(len(funcs)))))


def orthogonality_residual(funcs: Sequence[TestFunction], mu: MuMeasure) -> float:
    """Largest off-diagonal Gram entry."""
    if len(funcs) < 2:
        return 0.0
    G = gram_matrix(funcs, mu)
    return float(np.max(np.abs(G - np.diag(np.diag(G)))))


def _embed(funcs, mu):
    """Vectors whose Euclidean geometry is the L2(mu) geometry of ``funcs``."""
    nu = _measure_for(mu.nu, [f.jump for f in funcs])
    if isinstance(nu, Atomic):
        x, w = nu.loc, nu.w
    else:
        x, w = nu.nodes, nu.weights
    sw = np.sqrt(np.maximum(w, 0.0))
    s0 = np.sqrt(mu.sigma2)
    rows = []
    for f in funcs:
        jump = f.jump(x) if len(x) else np.zeros(0)
        rows.append(np.concatenate([[s0 * f.at_zero], sw * jump]))
    return np.array(rows)


def gram_schmidt(system: Sequence[TestFunction], mu: MuMeasure, drop_tol: float = 1e-9,
                 tol: float = 1e-10) -> OrthonormalSystem:
    """Modified Gram-Schmidt with one re-orthogonalization sweep.

    A member whose norm after projection falls below ``drop_tol`` times its
    norm before projection is treated as linearly dependent and dropped.
    Each output has a positive component along the input it came from.

    Raises
    ------
    EmptySystem
        If every member is dropped.
    IllConditioned
        If the orthonormality defect of the output exceeds ``tol``.
    """
    system = list(system)
    V = _embed(system, mu)
    n = len(system)
    Q, C, kept = [], [], []
    for j in range(n):
        u = V[j].copy()
        coef = np.zeros(n)
        coef[j] = 1.0
        norm0 = np.linalg.norm(u)
        if norm0 == 0.0:
            continue
        for _ in range(2):
            for q, c in zip(Q, C):
                r = float(q @ u)
                u -= r * q
                coef -= r * c
        nrm = np.linalg.norm(u)
        if nrm <= drop_tol * norm0:
            continue
        Q.append(u / nrm)
        C.append(coef / nrm)
        kept.append(j)
    if not Q:
        raise EmptySystem("every member was dropped as dependent")
    members = tuple(linear_combination(c, system, name=f"e{k + 1}") for k, c in enumerate(C))
    if isinstance(mu.nu, Atomic):
        # L2(mu) is a coordinate space here: store the orthonormal coordinates
        # directly instead of a cancellation-prone combination of the inputs
        loc, sw, s0 = tuple(mu.nu.loc.tolist()), np.sqrt(mu.nu.w), np.sqrt(mu.sigma2)
        members = tuple(TestFunction(q[0] / s0 if s0 > 0 else m.at_zero,
                                     AtomTable(loc, tuple((q[1:] / sw).tolist())), name=m.name)
                        for q, m in zip(Q, members))
    resid = orthonormality_residual(members, mu)
    if resid > tol:
        raise IllConditioned(f"orthonormality defect {resid:.3e} exceeds {tol:.1e}")
    return OrthonormalSystem(members, resid, np.array(C), tuple(kept))


def teugels_system(n_max: int, mu: MuMeasure, tail_rate: float = 1.0,
                   tail_eps: float = 1.0) -> List[TestFunction]:
    """Power-jump generators ``h_1 = 1{0} + x`` and ``h_n = x^n``.

    The exponential moment ``int_{|x|>eps} e^{rate |x|} dnu`` must converge.
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    tail = ExpTail(tail_rate, tail_eps)
    if not mu.nu.tail_converges(lambda x: tail(x) ** 2):
        raise TailConditionFailed(
            f"exp({tail_rate:g}|x|) 1{{|x|>{tail_eps:g}}} is not nu-integrable")
    out = [TestFunction(1.0, Monomial(1), name="h1")]
    out += [TestFunction(0.0, Monomial(n), name=f"h{n}") for n in range(2, n_max + 1)]
    certified = []
    for f in out:
        f = f.certify(mu.nu)
        if f.at_zero == 0.0 and not (f.flags.in_L1_nu and f.flags.in_L2_nu):
            raise TailConditionFailed(f"{f.name} fails the moment certificate")
        certified.append(f)
    return certified


def _inv_sqrt_at_zero(h) -> float:
    with np.errstate(divide="ignore"):
        h0 = float(np.asarray(h(np.array([0.0])))[0])
    if np.isinf(h0):
        return 0.0
    if h0 <= 0 or not np.isfinite(h0):
        raise ValueError("density must be positive at the origin")
    return h0 ** -0.5


def hermite_weighted_system(n_max: int, nu: Density, sigma2: float,
                            check_tol: float = 1e-8) -> List[TestFunction]:
    """``P_n = g(0) H_n(0) 1{0} + g H_n`` with ``g = h^{-1/2} exp(-x^2/2)``.

    With ``sigma2 > 0`` and ``g(0) != 0`` the even members pick up the
    cross term ``sigma2 g(0)^2 H_n(0) H_m(0)``; a warning reports any
    orthogonality defect above ``check_tol``.
    """
    if not isinstance(nu, Density):
        raise DensityRequired("the Hermite system needs a jump density")
    g0 = _inv_sqrt_at_zero(nu.h)
    H0 = hermite_orthonormal(n_max, np.array(0.0))
    out = [TestFunction(g0 * float(H0[n]), HermiteWeighted(n, nu.h), name=f"P{n}")
           for n in range(n_max + 1)]
    resid = orthogonality_residual(out, MuMeasure(sigma2, nu))
    if resid > check_tol:
        warnings.warn(f"Hermite system orthogonality defect {resid:.3e}", RuntimeWarning)
    return out


def haar_system(j_min: int, j_max: int, k_min: int, k_max: int, nu: Density,
                sigma2: float, check_tol: float = 1e-8) -> List[TestFunction]:
    """Haar wavelets reweighted by ``h^{-1/2}`` for all ``j, k`` in the window."""
    if not isinstance(nu, Density):
        raise DensityRequired("the Haar system needs a jump density")
    g0 = _inv_sqrt_at_zero(nu.h)
    out = []
    for j in range(j_min, j_max + 1):
        for k in range(k_min, k_max + 1):
            fn = HaarWeighted(j, k, nu.h)
            psi0 = float(fn.raw(np.array(0.0)))
            out.append(TestFunction(g0 * psi0, fn, name=f"psi[{j},{k}]"))
    resid = orthogonality_residual(out, MuMeasure(sigma2, nu))
    if resid > check_tol:
        warnings.warn(f"Haar system orthogonality defect {resid:.3e}", RuntimeWarning)
    return out


def haar_gram_exact(funcs: Sequence[TestFunction], mu: MuMeasure) -> np.ndarray:
    """Gram matrix of a Haar system by exact piecewise-constant integration.

    The weights ``h^{-1/2}`` cancel against ``h``, leaving Lebesgue measure on
    ``eps < |x| <= cutoff``.
    """
    nu = mu.nu
    eps, cut = nu.truncation_eps, nu.cutoff
    pts = {-cut, -eps, eps, cut}
    for f in funcs:
        pts.update(p for p in f.jump.breakpoints() if -cut <= p <= cut)
    edges = np.array(sorted(pts))
    mid = 0.5 * (edges[1:] + edges[:-1])
    length = np.diff(edges)
    keep = np.abs(mid) > eps
    mid, length = mid[keep], length[keep]
    vals = np.array([f.jump.raw(mid) for f in funcs])
    at0 = np.array([f.at_zero for f in funcs])
    return (vals * length) @ vals.T + mu.sigma2 * np.outer(at0, at0)


def indicator_system(intervals: Sequence[tuple], c_values=1.0) -> List[TestFunction]:
    """Multiplication-stable system of interval indicators away from 0.

    For each ``(a, b]`` the system holds ``c 1{0} + 1_(a,b]`` and
    ``1_(a,b]``; the zero function closes it under products of disjoint
    pieces.

    Raises
    ------
    IntervalTouchesZero
        If an interval contains or ends at the origin.
    FamilyNotClosed
        If the intervals overlap, so that products leave the system.
    """
    intervals = [(float(a), float(b)) for a, b in intervals]
    if np.isscalar(c_values):
        c_values = [float(c_values)] * len(intervals)
    for a, b in intervals:
        if not a < b:
            raise ValueError(f"empty interval ({a}, {b}]")
        if a <= 0.0 <= b or a == 0.0:
            raise IntervalTouchesZero(f"({a:g}, {b:g}] touches the origin")
    srt = sorted(intervals)
    for (a1, b1), (a2, b2) in zip(srt, srt[1:]):
        if a2 < b1:
            raise FamilyNotClosed(f"({a1:g},{b1:g}] and ({a2:g},{b2:g}] overlap")
    out = []
    for (a, b), c in zip(intervals, c_values):
        if c != 0:
            out.append(TestFunction(float(c), Indicator(a, b), name=f"{c:g}*1{{0}}+1({a:g},{b:g}]"))
        out.append(TestFunction(0.0, Indicator(a, b), name=f"1({a:g},{b:g}]"))
    out.append(TestFunction(0.0, Zero(), name="0"))
    verify_closure(out)
    return out


def _probe_points(funcs):
    pts = set()
    for f in funcs:
        pts.update(f.jump.breakpoints())
    pts = np.array(sorted(pts), dtype=float)
    if len(pts) == 0:
        return np.array([-1.0, 1.0])
    mids = 0.5 * (pts[1:] + pts[:-1])
    probe = np.concatenate([pts, mids, pts - 1e-9, pts + 1e-9, [pts[0] - 1, pts[-1] + 1]])
    return probe[probe != 0]


def closure_index(system: Sequence[TestFunction], i: int, j: int) -> int:
    """Index of the member equal to ``f~_i f~_j`` (zero at the origin)."""
    x = _probe_points(system)
    target = system[i].jump(x) * system[j].jump(x)
    for k, f in enumerate(system):
        if f.at_zero == 0.0 and np.array_equal(f.jump(x), target):
            return k
    raise FamilyNotClosed(f"product of members {i} and {j} is not in the system")


def verify_closure(system: Sequence[TestFunction]) -> None:
    for i in range(len(system)):
        for j in range(i, len(system)):
            closure_index(system, i, j)


def export_basis_csv(members: Sequence[TestFunction], nu, path, grid=None) -> None:
    """Write basis values: wide per-atom columns or a long sampled grid."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(nu, Atomic):
            k = len(nu)
            w.writerow(["member_index", "name", "at_zero"]
                       + [f"atom_location_{i}" for i in range(k)]
                       + [f"atom_value_{i}" for i in range(k)])
            for idx, f in enumerate(members):
                vals = f.jump(nu.loc) if k else []
                w.writerow([idx, f.label(), repr(float(f.at_zero))]
                           + [repr(float(v)) for v in nu.loc] + [repr(float(v)) for v in vals])
        else:
            if grid is None:
                half = np.geomspace(max(nu.truncation_eps, 1e-3) * 1.0001, min(nu.cutoff, 10.0), 200)
                grid = np.concatenate([-half[::-1], half])
            w.writerow(["member_index", "name", "at_zero", "x", "value"])
            for idx, f in enumerate(members):
                for x, v in zip(grid, f.jump(grid)):
                    w.writerow([idx, f.label(), repr(float(f.at_zero)), repr(float(x)), repr(float(v))])
