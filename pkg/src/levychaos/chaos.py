"""Structural identities and chaos projections.

* product formula for products of family martingales,
* multiple Ito integrals versus sums of iterated integrals,
* projection of a target onto chaos spaces spanned by iterated integrals of
  an orthonormal system against dyadic cell-indicator tensors.
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import FamilyNotClosed, IllConditioned, NotNormalized
from .functions import TestFunction, jump_product
from .iterated import simplex_integral, z_score
from .measure import LevyTriplet, MuMeasure, eta_inner, hat_map, mu_inner, nu_integral
from .montecarlo import MomentAccumulator, PathBatch, WordTree, map_batches, tree_values
from .paths import (LevyPath, constant_series, lebesgue_integral, martingale_path,
                    simulate_levy, stochastic_integral)
from .targets import evaluate_target, parse_target
from .tensors import ElementaryTensor, StepFunction

# -- product formula -----------------------------------------------------------


def _product_member(funcs: Sequence[TestFunction], family: Sequence[TestFunction], mu: MuMeasure,
                    require_closed: bool) -> TestFunction:
    """Family member equal to ``prod f~`` in L2(mu), or the product itself."""
    target = jump_product(funcs)
    scale = max(1.0, mu_inner(target, target, mu))
    for g in family:
        d = g - target
        if mu_inner(d, d, mu) <= 1e-24 * scale:
            return g
    if require_closed:
        raise FamilyNotClosed(f"{target.label()} is not a member of the family")
    return target


def product_formula_terms(indices: Sequence[int], family: Sequence[TestFunction], path: LevyPath,
                          mu: MuMeasure, require_closed: bool = True):
    """Left side ``prod X^{alpha_i}`` and the right side of the product formula.

    The right side sums, over nonempty index subsets ``J``, the stochastic
    integral of ``prod_{k not in J} X^{alpha_k}_-`` against ``X^{prod f~_J}``
    (``X^{alpha_j}`` when ``|J| = 1``) and, for ``|J| >= 2``, the Lebesgue
    integral of the same integrand against the deterministic bracket.  Only
    the terms without predictable jumps are present.
    """
    m = len(indices)
    if not 1 <= m <= 4:
        raise ValueError("product formula implemented for 1 <= m <= 4")
    fs = [family[a] for a in indices]
    X = [martingale_path(f, path, mu.nu) for f in fs]
    lhs = X[0]
    for Xi in X[1:]:
        lhs = lhs * Xi
    rhs = constant_series(path, 0.0, X[0].timeline)
    for size in range(1, m + 1):
        for J in itertools.combinations(range(m), size):
            rest = [X[k] for k in range(m) if k not in J]
            H = constant_series(path, 1.0, X[0].timeline)
            for Xk in rest:
                H = H * Xk
            if size == 1:
                integrator = X[J[0]]
            else:
                g = _product_member([fs[j] for j in J], family, mu, require_closed)
                integrator = martingale_path(g, path, mu.nu)
            rhs = rhs + stochastic_integral(H, integrator)
            if size >= 2:
                if size == 2:
                    rate = mu_inner(fs[J[0]], fs[J[1]], mu)
                else:
                    rate = nu_integral(jump_product([fs[j] for j in J]), mu.nu)
                rhs = rhs + lebesgue_integral(H, rate)
    return lhs, rhs


def product_formula_check(indices: Sequence[int], family: Sequence[TestFunction], path: LevyPath,
                          mu: MuMeasure, require_closed: bool = True) -> Dict[str, float]:
    """Sup-norm gap between both sides of the product formula on one path."""
    lhs, rhs = product_formula_terms(indices, family, path, mu, require_closed)
    return {"max_abs_gap": lhs.sup_gap(rhs)}


def product_formula_refinement(indices, family, triplet: LevyTriplet, horizon: float,
                               grid_steps: Sequence[float], seeds: Sequence[int],
                               require_closed: bool = True) -> Dict[str, object]:
    """Mean sup gap over ``seeds`` for each grid step, and the log-log slope."""
    gaps = []
    for h in grid_steps:
        g = [product_formula_check(indices, family, simulate_levy(triplet, horizon, h, s),
                                   triplet.mu, require_closed)["max_abs_gap"] for s in seeds]
        gaps.append(float(np.mean(g)))
    slope = float(np.polyfit(np.log(grid_steps), np.log(gaps), 1)[0])
    return {"grid_steps": list(map(float, grid_steps)), "mean_gaps": gaps, "slope": slope}


# -- multiple versus iterated integrals -----------------------------------------


def _check_normalized(gs, mu, tol=1e-8):
    for g in gs:
        nrm = eta_inner(g, g, mu)
        if abs(nrm - 1.0) > tol:
            raise NotNormalized(f"{g.label()} has L2(eta) norm^2 {nrm:.6g}")


def multiple_vs_iterated_check(factors: Sequence[StepFunction], gs: Sequence[TestFunction],
                               path: LevyPath, mu: MuMeasure) -> Dict[str, float]:
    """Pathwise comparison for time factors with pairwise disjoint supports.

    The left side is ``prod_i I_1(F_i g_i)``; the right side sums
    ``J_n^{(f_{pi(1)}, ..., f_{pi(n)})}(1 (x) F_{pi(1)} (x) ... (x) F_{pi(n)})``
    over all permutations, with ``f_i`` the hat transform of ``g_i``.
    """
    n = len(factors)
    if len(gs) != n:
        raise ValueError("one space function per time factor")
    _check_normalized(gs, mu)
    fs = [hat_map(g) for g in gs]
    X = [martingale_path(f, path, mu.nu) for f in fs]
    one = constant_series(path, 1.0)
    lhs = None
    for F, Xi in zip(factors, X):
        I1 = stochastic_integral(one, Xi, F)
        lhs = I1 if lhs is None else lhs * I1
    rhs = None
    for perm in itertools.permutations(range(n)):
        J = one
        for k in perm:
            J = stochastic_integral(J, X[k], factors[k])
        rhs = J if rhs is None else rhs + J
    return {"max_abs_gap": lhs.sup_gap(rhs)}


def dyadic_cells(horizon: float, depth: int) -> np.ndarray:
    """Edges of the ``2**depth`` equal cells of ``[0, horizon]``."""
    return np.linspace(0.0, horizon, 2 ** depth + 1)


def _cell_factor(edges, c, horizon):
    return StepFunction.indicator(edges[c], edges[c + 1], horizon)


def _diagonal_reference(factors, gs, mu, edges):
    """``E[I_n(G_diag)^2]`` for the part of ``F g`` on cell tuples with a repeat."""
    n = len(factors)
    C = len(edges) - 1
    length = np.diff(edges)
    Fv = np.array([F(edges[:-1]) for F in factors])  # (n, C)
    rho = np.array([[eta_inner(a, b, mu) for b in gs] for a in gs])
    total = 0.0
    for sigma in itertools.permutations(range(n)):
        w = np.prod([rho[j, sigma[j]] for j in range(n)])
        if w == 0.0:
            continue
        per = np.array([length * Fv[j] * Fv[sigma[j]] for j in range(n)])  # (n, C)
        for a in itertools.product(range(C), repeat=n):
            if len(set(a)) == n:
                continue
            total += w * np.prod([per[j, a[j]] for j in range(n)])
    return float(total)


def _mvi_batch(factors, fam, nu, edges, horizon, batch: PathBatch):
    n = len(factors)
    C = len(edges) - 1
    tree = WordTree()
    cell_nodes = [[tree.child(0, i, _cell_factor(edges, c, horizon)) for i in range(n)] for c in range(C)]
    leaves = [tree.add_chain([p for p in perm], [factors[p] for p in perm])
              for perm in itertools.permutations(range(n))]
    vals = tree_values(tree, fam, nu, batch)
    rhs = vals[:, leaves].sum(axis=1)
    Fv = np.array([F(edges[:-1]) for F in factors])
    A = np.stack([vals[:, [cell_nodes[c][i] for c in range(C)]] * Fv[i] for i in range(n)])  # (n, P, C)
    lhs = np.zeros(batch.n_paths)
    for a in itertools.permutations(range(C), n):
        term = np.ones(batch.n_paths)
        for i, c in enumerate(a):
            term = term * A[i, :, c]
        lhs += term
    d2 = (lhs - rhs) ** 2
    return MomentAccumulator().add(d2[:, None])


@dataclass(frozen=True)
class MeanSquareResult:
    estimate: float
    std_error: float
    reference: float
    z_score: float
    n_paths: int


def multiple_vs_iterated_mc(factors: Sequence[StepFunction], gs: Sequence[TestFunction],
                            triplet: LevyTriplet, horizon: float, cell_depth: int, n_paths: int,
                            seed: int, grid_step: float = 1e-3, workers: int = 1) -> MeanSquareResult:
    """Mean-square form of the permutation identity for general step factors.

    The multiple integral is approximated by the off-diagonal cell sum
    ``sum_{distinct cells} prod_i F_i(a_i) I_1(1_{a_i} g_i)``, whose distance to
    the permutation sum is ``I_n`` of the diagonal-cell part; its second moment
    is known exactly and is the reference.
    """
    mu = triplet.mu
    _check_normalized(gs, mu)
    edges = dyadic_cells(horizon, cell_depth)
    for F in factors:
        if not set(F.breakpoints) <= set(edges.tolist()):
            raise ValueError("time factors must be constant on the dyadic cells")
    fam = [hat_map(g) for g in gs]
    fn = partial(_mvi_batch, list(factors), fam, triplet.nu, edges, horizon)
    acc = MomentAccumulator()
    for part in map_batches(fn, triplet, horizon, grid_step, n_paths, seed, workers=workers):
        acc = acc.merge(part)
    est = float(acc.mean[0])
    se = float(acc.stderr()[0])
    ref = _diagonal_reference(factors, gs, mu, edges)
    return MeanSquareResult(est, se, ref, z_score(est, se, ref), acc.n)


# -- chaos projection -------------------------------------------------------------


@dataclass(frozen=True)
class ChaosBasisElement:
    """``J_n`` of members ``(j_1..j_n)`` against cell indicators ``c_1 <= .. <= c_n``."""

    order: int
    members: tuple
    cells: tuple

    def tensor(self, edges, horizon) -> ElementaryTensor:
        return ElementaryTensor(1.0, tuple(_cell_factor(edges, c, horizon) for c in self.cells))

    def norm2(self, edges, horizon, rates) -> float:
        if self.order == 0:
            return 1.0
        return simplex_integral(self.tensor(edges, horizon).times(self.tensor(edges, horizon)),
                                [rates[j] for j in self.members], horizon)

    def blocks(self):
        """Runs of equal cells as ``(cell, members)``."""
        out = []
        for c, grp in itertools.groupby(zip(self.cells, self.members), key=lambda p: p[0]):
            out.append((c, tuple(m for _, m in grp)))
        return out


def chaos_basis(n_members: int, order_cap: int, n_cells: int) -> List[ChaosBasisElement]:
    out = [ChaosBasisElement(0, (), ())]
    for n in range(1, order_cap + 1):
        for members in itertools.product(range(n_members), repeat=n):
            for cells in itertools.combinations_with_replacement(range(n_cells), n):
                out.append(ChaosBasisElement(n, members, cells))
    return out


def _basis_tree(basis, edges, horizon):
    """Tree of within-cell words and, per element, the nodes whose product it is."""
    tree = WordTree()
    factors = {}
    recipe = []
    for b in basis:
        nodes = []
        for c, word in b.blocks():
            F = factors.setdefault(c, _cell_factor(edges, c, horizon))
            nodes.append(tree.add_chain(word, [F] * len(word)))
        recipe.append(nodes)
    return tree, recipe


def basis_values(basis, system, nu, batch: PathBatch, edges) -> np.ndarray:
    """``(P, len(basis))`` terminal values of the basis integrals."""
    tree, recipe = _basis_tree(basis, edges, batch.horizon)
    vals = tree_values(tree, list(system), nu, batch)
    out = np.ones((batch.n_paths, len(basis)))
    for k, nodes in enumerate(recipe):
        for v in nodes:
            out[:, k] *= vals[:, v]
    return out


@dataclass
class _ChaosSums:
    n: int = 0
    t2: float = 0.0
    t4: float = 0.0
    tb: Optional[np.ndarray] = None
    t3b: Optional[np.ndarray] = None
    t2bb: Optional[np.ndarray] = None
    r2: Optional[np.ndarray] = None  # per truncation order, held-out residual moments
    r4: Optional[np.ndarray] = None

    def merge(self, o: "_ChaosSums") -> "_ChaosSums":
        if self.tb is None:
            return o
        add = lambda a, b: None if a is None else a + b
        return _ChaosSums(self.n + o.n, self.t2 + o.t2, self.t4 + o.t4, self.tb + o.tb,
                          self.t3b + o.t3b, self.t2bb + o.t2bb, add(self.r2, o.r2), add(self.r4, o.r4))


def _chaos_batch(target, basis, system, nu, edges, fitted, batch: PathBatch) -> _ChaosSums:
    """Moment sums of one batch; with ``fitted`` coefficients also residual sums."""
    t = evaluate_target(target, batch, system, nu)
    B = basis_values(basis, system, nu, batch, edges)
    t2 = t * t
    out = _ChaosSums(len(t), float(t2.sum()), float((t2 * t2).sum()),
                     B.T @ t, B.T @ (t2 * t), (B * t2[:, None]).T @ B)
    if fitted is not None:
        r = t[:, None] - B @ fitted.T  # (P, orders)
        out.r2 = (r ** 2).sum(axis=0)
        out.r4 = (r ** 4).sum(axis=0)
    return out


@dataclass
class ProjectionReport:
    """Coefficients and truncation residuals of a chaos projection.

    Each residual row holds the held-out estimate ``residual2`` with its
    standard error and ``z``, plus the full-sample energy balance
    ``parseval_residual2 = E[target^2] - captured`` and its standard error.
    """

    target: str
    order_cap: int
    cell_depth: int
    horizon: float
    n_paths: int
    seed: int
    coefficients: List[dict] = field(default_factory=list)
    residuals: List[dict] = field(default_factory=list)

    def coefficient(self, members: tuple, cells: tuple) -> dict:
        for row in self.coefficients:
            if tuple(row["members"]) == tuple(members) and tuple(row["cells"]) == tuple(cells):
                return row
        raise KeyError((members, cells))

    def residual(self, order: int) -> dict:
        return next(r for r in self.residuals if r["order"] == order)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["order", "tuple", "cells", "coefficient", "se"])
            for r in self.coefficients:
                w.writerow([r["order"], " ".join(map(str, r["members"])),
                            " ".join(map(str, r["cells"])), repr(r["coefficient"]), repr(r["se"])])

    def residual_csv(self, path) -> None:
        cols = ["order", "residual2", "se", "z", "parseval_residual2", "parseval_se", "captured"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.residuals:
                w.writerow([r["order"]] + [repr(r[c]) for c in cols[1:]])


def _moments(s: _ChaosSums):
    n = s.n
    return n, s.t2 / n, s.t4 / n, s.tb / n, s.t3b / n, s.t2bb / n


def chaos_coefficients(target: str, system: Sequence[TestFunction], triplet: LevyTriplet,
                       horizon: float, order_cap: int, n_paths: int, seed: int,
                       cell_depth: int = 3, grid_step: float = 1e-3,
                       workers: int = 1) -> ProjectionReport:
    """Project ``target`` onto chaos spaces up to ``order_cap``.

    ``c(b) = E[target J_b] / E[J_b^2]`` with exact denominators, estimated on
    all paths.  The squared truncation residual at order ``N`` is estimated
    by cross-fitting: coefficients fitted on the first half of the paths are
    applied to the second half, and the mean squared held-out residual is
    corrected by the expected excess ``tr(D Cov(c_hat))`` caused by the
    fitting noise (``D = diag E[J_b^2]``).  Its standard error combines the
    held-out sampling error with the spread of that excess.

    Raises
    ------
    IllConditioned
        If some ``E[J_b^2] < 1e-14``.
    """
    parse_target(target)
    if n_paths < 4:
        raise ValueError("need at least 4 paths")
    system = list(system)
    mu = triplet.mu
    rates = [mu_inner(e, e, mu) for e in system]
    edges = dyadic_cells(horizon, cell_depth)
    basis = chaos_basis(len(system), order_cap, len(edges) - 1)
    E = np.array([b.norm2(edges, horizon, rates) for b in basis])
    if np.any(E < 1e-14):
        raise IllConditioned("a basis integral has vanishing second moment")
    orders = np.array([b.order for b in basis])
    masks = [orders <= N for N in range(order_cap + 1)]

    def run(fitted, first, count):
        fn = partial(_chaos_batch, target, basis, system, triplet.nu, edges, fitted)
        acc = _ChaosSums()
        for part in map_batches(fn, triplet, horizon, grid_step, count, seed,
                                workers=workers, first=first):
            acc = acc.merge(part)
        return acc

    n_a = n_paths // 2
    fit = run(None, 0, n_a)
    na, _, _, tb_a, _, t2bb_a = _moments(fit)
    c_a = tb_a / E
    fitted = np.array([np.where(m, c_a, 0.0) for m in masks])
    held = run(fitted, n_a, n_paths - n_a)
    cov_tb = t2bb_a - np.outer(tb_a, tb_a)  # Cov(t J) on the fitting half

    total = fit.merge(_ChaosSums(held.n, held.t2, held.t4, held.tb, held.t3b, held.t2bb))
    n, m_t2, m_t4, m_tb, m_t3b, m_t2bb = _moments(total)
    c = m_tb / E
    se_c = np.sqrt(np.maximum(np.diag(m_t2bb) - m_tb ** 2, 0.0) / n) / E
    report = ProjectionReport(target, order_cap, cell_depth, float(horizon), n, int(seed))
    for b, cb, sb, eb in zip(basis, c, se_c, E):
        report.coefficients.append({"order": b.order, "members": list(b.members), "cells": list(b.cells),
                                    "coefficient": float(cb), "se": float(sb), "norm2": float(eb)})
    nb = held.n
    for N, S in enumerate(masks):
        K = cov_tb[np.ix_(S, S)] / (E[S][None, :] * na)  # D Cov(c_hat) on the kept block
        excess = float(np.trace(K))
        spread = 2.0 * float(np.sum(K * K.T))
        mr2, mr4 = held.r2[N] / nb, held.r4[N] / nb
        r2 = mr2 - excess
        se = float(np.sqrt(max(mr4 - mr2 * mr2, 0.0) / nb + spread))
        cs = np.where(S, c, 0.0)
        captured = float(np.sum(cs ** 2 * E))
        Eq = m_t2 - 2.0 * float(cs @ m_tb)
        Eq2 = m_t4 - 4.0 * float(cs @ m_t3b) + 4.0 * float(cs @ m_t2bb @ cs)
        pse = float(np.sqrt(max(Eq2 - Eq * Eq, 0.0) / n))
        report.residuals.append({"order": N, "residual2": float(r2), "se": se,
                                 "z": float(z_score(r2, se, 0.0)), "captured": captured,
                                 "parseval_residual2": float(m_t2 - captured), "parseval_se": pse})
    return report


def crp_convergence_study(target: str, system, triplet: LevyTriplet, horizon: float, order_max: int,
                          sizes: Sequence[int], seed: int, cell_depth: int = 3,
                          grid_step: float = 1e-3, workers: int = 1) -> List[dict]:
    """Residual-versus-order table for each Monte Carlo size."""
    rows = []
    for n_paths in sizes:
        rep = chaos_coefficients(target, system, triplet, horizon, order_max, n_paths, seed,
                                 cell_depth, grid_step, workers)
        for r in rep.residuals:
            rows.append({"n_paths": int(n_paths), **r})
    return rows
