"""One test per acceptance criterion, each at its stated tolerance.

Every test prints (and records for the terminal summary) a single
``criterion k: PASS|FAIL`` line before asserting.
"""
import os
import time
from math import comb, factorial

import numpy as np
import pytest

from levychaos.chaos import chaos_coefficients, product_formula_check, product_formula_refinement
from levychaos.config import default_config
from levychaos.functions import origin_indicator
from levychaos.iterated import moment_matrix_check, z_score
from levychaos.measure import Atomic, LevyTriplet, MuMeasure, empty_measure
from levychaos.montecarlo import terminal_values
from levychaos.report import (_indicators_around, _random_atoms, run_suite, suite_covariation,
                              suite_oracle, suite_permutation)
from levychaos.systems import gram_schmidt, indicator_system, teugels_system
from levychaos.tensors import ElementaryTensor, IteratedSpec, StepFunction
from levychaos.paths import simulate_levy

from conftest import ACCEPTANCE_LINES, SEED

pytestmark = pytest.mark.slow
WORKERS = min(4, os.cpu_count() or 1)
MC_PATHS = 100_000
# J_n^2 is skewed at n = 3; the studentized mean needs more paths to be calibrated
ISOMETRY_PATHS = 400_000


def report(k, passed, detail):
    line = f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append((k, line))
    return passed


def _by_id(records):
    return {r.id: r for r in records}


def test_criterion_01_compensated_covariation():
    cfg = default_config(SEED).with_overrides(scenarios=1000)
    t0 = time.perf_counter()
    rec = _by_id(suite_covariation(cfg))["covariation.indicator"]
    dt = time.perf_counter() - t0
    ok = rec.gap <= 1e-10 and dt <= 30.0
    assert report(1, ok, f"sup gap {rec.gap:.2e} <= 1e-10 over 1000 scenarios, {dt:.1f} s <= 30 s")


def test_criterion_02_poisson_identity():
    recs = _by_id(suite_covariation(default_config(SEED).with_overrides(scenarios=1)))
    gaps = {lam: recs[f"covariation.poisson[{lam:g}]"].gap for lam in (0.5, 1.0, 5.0)}
    ok = max(gaps.values()) <= 1e-12
    assert report(2, ok, "gaps " + ", ".join(f"lam={k:g}: {v:.1e}" for k, v in gaps.items()) + " <= 1e-12")


def _specs(T):
    step = StepFunction((0.0, T / 2, T), (1.0, 2.0))
    return [IteratedSpec.flat((0,), T), IteratedSpec.flat((0, 0), T), IteratedSpec.flat((0, 0, 0), T),
            IteratedSpec((0, 0), ElementaryTensor(1.0, (step, StepFunction.constant(T)))),
            IteratedSpec((0, 0, 1), ElementaryTensor(1.0, (StepFunction.constant(T), step, step))),
            IteratedSpec.flat((0, 1), T), IteratedSpec.flat((1, 0), T)]


MODELS = {"poisson": LevyTriplet(0.0, 0.0, Atomic.of([(1.0, 1.0), (-0.5, 1.0)])),
          "mixed": LevyTriplet(0.0, 1.0, Atomic.of([(1.0, 1.0), (-0.5, 1.0)]))}


@pytest.fixture(scope="module")
def moments():
    out = {}
    for name, tr in MODELS.items():
        fam = list(gram_schmidt(teugels_system(3, tr.mu), tr.mu))
        t0 = time.perf_counter()
        res = moment_matrix_check(_specs(1.0), fam, tr, 1.0, ISOMETRY_PATHS, SEED, grid_step=1e-3,
                                  workers=WORKERS)
        out[name] = res + (time.perf_counter() - t0,)
    return out


def test_criterion_03_isometry(moments):
    worst, total, refs = 0.0, 0.0, set()
    for name, (est, se, ref, z, dt) in moments.items():
        worst = max(worst, float(np.max(np.abs(np.diag(z)))))
        total += dt
        refs.update(np.round(np.diag(ref), 12).tolist())
    # orthonormal members have unit rate, so the flat references are T^n / n!
    ok = worst <= 3 and {1.0, 0.5, round(1 / 6, 12)} <= refs and total <= 300
    assert report(3, ok, f"max |z| {worst:.2f} <= 3 on {len(_specs(1))} specs x {len(MODELS)} models, "
                         f"{ISOMETRY_PATHS} paths, {total:.0f} s <= 300 s")


def test_criterion_04_orthogonality(moments):
    specs = _specs(1.0)
    worst, pairs = 0.0, 0
    for name, (est, se, ref, z, _) in moments.items():
        for i in range(len(specs)):
            for j in range(i + 1, len(specs)):
                if specs[i].indices == specs[j].indices:
                    continue  # same word: an isometry pair
                # different orders, or a slot holding two mu-orthogonal members
                assert abs(ref[i, j]) <= 1e-12
                worst = max(worst, abs(z[i, j]))
                pairs += 1
    assert report(4, worst <= 3, f"max |z| {worst:.2f} <= 3 over {pairs} pairs "
                                 "(n != m and mu-orthogonal slots)")


def test_criterion_05_product_formula():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for s in range(200):
        nu = _random_atoms(rng, int(rng.integers(1, 4)))
        system = indicator_system(_indicators_around(nu), 1.0)
        path = simulate_levy(LevyTriplet(0.0, 0.0, nu), 1.0, 0.05, SEED, s)
        idx = [int(v) for v in rng.integers(0, len(system), size=int(rng.integers(1, 5)))]
        worst = max(worst, product_formula_check(idx, system, path, MuMeasure(0.0, nu))["max_abs_gap"])
    nu = Atomic.of([(1.0, 1.0), (-0.5, 1.0)])
    system = indicator_system([(0.5, 1.5), (-1.0, -0.25)], 1.0)
    tr = LevyTriplet(0.0, 1.0, nu)
    steps = [1.6e-3, 4e-4, 1e-4]
    ref = product_formula_refinement([0, 2], system, tr, 1.0, steps, range(16))
    finest = max(product_formula_check([0, 2], system, simulate_levy(tr, 1.0, 1e-4, SEED, s),
                                       tr.mu)["max_abs_gap"] for s in range(16))
    ratios = np.array(ref["mean_gaps"][:-1]) / np.array(ref["mean_gaps"][1:])
    # quartering the step should halve the gap under O(sqrt(dt))
    ok = worst <= 1e-10 and finest <= 5e-2 and 0.35 <= ref["slope"] <= 0.75 and np.all(ratios > 1.4)
    assert report(5, ok, f"pure jump {worst:.1e} <= 1e-10; Brownian sup gap {finest:.3f} <= 5e-2 at 1e-4; "
                         f"slope {ref['slope']:.2f}, ratios {np.round(ratios, 2).tolist()}")


def test_criterion_06_multiple_vs_iterated():
    cfg = default_config(SEED).with_overrides(scenarios=200, n_paths=20_000, grid_step=1e-3)
    recs = _by_id(suite_permutation(cfg))
    pw, ms = recs["permutation.pathwise"], recs["permutation.mean_square"]
    ok = pw.gap <= 1e-10 and abs(ms.z) <= 3
    assert report(6, ok, f"pathwise {pw.gap:.1e} <= 1e-10; mean-square |z| {abs(ms.z):.2f} <= 3 "
                         f"({ms.estimate:.4g} vs {ms.reference:.4g})")


def test_criterion_07_chaos_representation():
    tr = LevyTriplet(0.0, 1.0, Atomic.of([(1.0, 2.0)]))
    full = gram_schmidt(teugels_system(2, tr.mu), tr.mu)
    kw = dict(cell_depth=0, grid_step=1e-3)
    r_full = chaos_coefficients("Lbar**2", list(full), tr, 1.0, 2, MC_PATHS, SEED, **kw).residual(2)
    r_cut = chaos_coefficients("Lbar**2", list(full.without(1)), tr, 1.0, 2, MC_PATHS, SEED, **kw).residual(2)
    ok = abs(r_full["z"]) <= 3 and r_cut["residual2"] > 5 * r_cut["se"]
    assert report(7, ok, f"complete: {r_full['residual2']:.2e} +- {r_full['se']:.1e} (|z| {abs(r_full['z']):.2f} "
                         f"<= 3); one direction dropped: {r_cut['residual2']:.3f} = {r_cut['z']:.0f} s.e. > 5")


def test_criterion_08_brownian_oracle():
    T = 1.0
    tr = LevyTriplet(0.0, 1.0, empty_measure())
    fam = list(gram_schmidt([origin_indicator()], tr.mu))
    rep = chaos_coefficients("W**2", fam, tr, T, 2, MC_PATHS, SEED, cell_depth=0, grid_step=1e-3)
    c0, c2 = rep.coefficient((), ()), rep.coefficient((0, 0), (0, 0))
    z0 = z_score(c0["coefficient"], c0["se"], T)
    z2 = z_score(c2["coefficient"], c2["se"], 2.0)
    # iterate against the Hermite references: the gap J_n - H_n is the part of the
    # flat tensor on grid cells that repeat, so E[gap^2] = T^n/n! - C(M, n) dt^n
    dt = 1e-2
    M = round(T / dt)
    specs = [IteratedSpec.flat((0,) * n, T) for n in (1, 2, 3)]
    J = terminal_values(specs, fam, tr, T, dt, MC_PATHS, SEED)
    W = J[:, 0]
    zs = []
    for n, H in ((2, (W ** 2 - T) / 2), (3, (W ** 3 - 3 * T * W) / 6)):
        d2 = (J[:, n - 1] - H) ** 2
        ref = T ** n / factorial(n) - comb(M, n) * dt ** n
        zs.append(z_score(d2.mean(), d2.std(ddof=1) / np.sqrt(len(d2)), ref))
    ok = abs(z0) <= 3 and abs(z2) <= 3 and max(map(abs, zs)) <= 3
    assert report(8, ok, f"c0 {c0['coefficient']:.4f} (|z| {abs(z0):.2f}), c2 {c2['coefficient']:.4f} "
                         f"(|z| {abs(z2):.2f}); Hermite mean-square |z| {abs(zs[0]):.2f}, {abs(zs[1]):.2f}")


def test_criterion_09_dimension_law():
    rng = np.random.default_rng(SEED)
    bad, worst = 0, 0.0
    for _ in range(500):
        k = int(rng.integers(1, 7))
        s2 = float(rng.integers(0, 2))
        mu = MuMeasure(s2, _random_atoms(rng, k))
        onb = gram_schmidt(teugels_system(k + 3, mu), mu)
        bad += len(onb) != k + (s2 > 0)
        worst = max(worst, onb.gram_residual)
    ok = bad == 0 and worst <= 1e-10
    assert report(9, ok, f"500 random measures, {bad} dimension mismatches, gram residual {worst:.1e} <= 1e-10")


def test_criterion_10_oracle_equivalence():
    recs = _by_id(suite_oracle(default_config(SEED).with_overrides(scenarios=1000)))
    it, sx = recs["oracle.iterate"], recs["oracle.simplex"]
    ok = it.gap <= 1e-10 and sx.gap <= 1e-12
    assert report(10, ok, f"iterate vs event oracle {it.gap:.1e} <= 1e-10 over 1000 scenarios; "
                          f"simplex relative {sx.gap:.1e} <= 1e-12")


def test_criterion_11_reproducibility():
    cfg = default_config(SEED).with_overrides(suites=("oracle", "isometry", "permutation", "crp"),
                                              n_paths=2000, scenarios=50, grid_step=1e-2)
    a = run_suite(cfg).numerics()
    b = run_suite(cfg.with_overrides(workers=2)).numerics()
    assert report(11, a == b, f"two runs, identical numerics ({len(a)} bytes of canonical JSON)")
