import numpy as np
import pytest

from levychaos.chaos import (chaos_basis, chaos_coefficients, crp_convergence_study, dyadic_cells,
                             multiple_vs_iterated_check, multiple_vs_iterated_mc, product_formula_check,
                             product_formula_refinement)
from levychaos.errors import FamilyNotClosed, NotNormalized
from levychaos.functions import Indicator, Monomial, TestFunction, origin_indicator
from levychaos.measure import Atomic, LevyTriplet, MuMeasure, empty_measure, eta_inner
from levychaos.paths import simulate_levy
from levychaos.systems import gram_schmidt, indicator_system, teugels_system
from levychaos.tensors import StepFunction

from conftest import SEED

NU = Atomic.of([(1.0, 1.0), (-0.5, 2.0)])
SYSTEM = indicator_system([(0.5, 1.5), (-1.0, -0.25)], 1.0)


# -- product formula --------------------------------------------------------------

@pytest.mark.parametrize("idx", [[0], [0, 1], [0, 0], [1, 0, 2], [0, 1, 1, 2], [2, 2, 2, 2]])
def test_product_formula_pure_jump_is_exact(idx):
    for s in range(5):
        path = simulate_levy(LevyTriplet(0.0, 0.0, NU), 1.0, 0.05, SEED, s)
        assert product_formula_check(idx, SYSTEM, path, MuMeasure(0.0, NU))["max_abs_gap"] <= 1e-10


def test_product_formula_with_brownian_part_converges():
    tr = LevyTriplet(0.0, 1.0, NU)
    res = product_formula_refinement([0, 2], SYSTEM, tr, 1.0, [1.6e-3, 4e-4, 1e-4], range(4))
    gaps = res["mean_gaps"]
    assert gaps[0] > gaps[1] > gaps[2]
    assert res["slope"] > 0.3


def test_product_formula_needs_a_closed_family():
    path = simulate_levy(LevyTriplet(0.0, 0.0, NU), 1.0, 0.05, SEED)
    fam = [TestFunction(0.0, Monomial(1))]
    with pytest.raises(FamilyNotClosed):
        product_formula_check([0, 0], fam, path, MuMeasure(0.0, NU))
    gap = product_formula_check([0, 0], fam, path, MuMeasure(0.0, NU), require_closed=False)
    assert gap["max_abs_gap"] <= 1e-10


# -- multiple versus iterated integrals ----------------------------------------------

def _normalized(g, mu):
    return g * (1.0 / np.sqrt(eta_inner(g, g, mu)))


def test_permutation_identity_pathwise():
    mu = MuMeasure(0.0, NU)
    gs = [_normalized(TestFunction(0.0, Indicator(0.5, 1.5)), mu),
          _normalized(TestFunction(0.0, Indicator(-1.0, -0.25)), mu)]
    F = [StepFunction.indicator(0.0, 0.5, 1.0), StepFunction.indicator(0.5, 1.0, 1.0)]
    for s in range(5):
        path = simulate_levy(LevyTriplet(0.0, 0.0, NU), 1.0, 0.05, SEED, s)
        assert multiple_vs_iterated_check(F, gs, path, mu)["max_abs_gap"] <= 1e-10


def test_permutation_identity_rejects_unnormalized():
    mu = MuMeasure(0.0, NU)
    path = simulate_levy(LevyTriplet(0.0, 0.0, NU), 1.0, 0.05, SEED)
    F = [StepFunction.indicator(0.0, 0.5, 1.0)]
    with pytest.raises(NotNormalized):
        multiple_vs_iterated_check(F, [TestFunction(0.0, Monomial(1))], path, mu)


def test_permutation_identity_mean_square():
    tr = LevyTriplet(0.0, 1.0, NU)
    g = _normalized(TestFunction(1.0, Indicator(0.5, 1.5)), tr.mu)
    steps = [StepFunction((0.0, 0.25, 0.5, 1.0), (1.0, -1.0, 2.0)),
             StepFunction((0.0, 0.5, 0.75, 1.0), (0.5, 1.0, 1.5))]
    res = multiple_vs_iterated_mc(steps, [g, g], tr, 1.0, 2, 4000, SEED, grid_step=1e-2)
    assert res.reference > 0
    assert abs(res.z_score) <= 3


# -- chaos projection ------------------------------------------------------------

def test_basis_enumeration():
    B = chaos_basis(2, 2, 2)
    # order 0: 1; order 1: 2 members x 2 cells; order 2: 4 member pairs x 3 cell pairs
    assert len(B) == 1 + 4 + 12
    assert all(list(b.cells) == sorted(b.cells) for b in B)
    assert np.allclose(dyadic_cells(1.0, 2), [0, 0.25, 0.5, 0.75, 1.0])


def test_constant_target_has_only_the_zeroth_coefficient():
    tr = LevyTriplet(0.0, 0.0, Atomic.of([(1.0, 1.0)]))
    fam = list(gram_schmidt(teugels_system(1, tr.mu), tr.mu))
    rep = chaos_coefficients("1", fam, tr, 1.0, 2, 400, SEED, cell_depth=0, grid_step=0.05)
    assert rep.coefficient((), ())["coefficient"] == 1.0
    r0 = rep.residual(0)
    assert r0["residual2"] == 0.0 and r0["se"] == 0.0


def test_linear_target_is_recovered():
    tr = LevyTriplet(0.0, 0.0, Atomic.of([(1.0, 1.0)]))
    fam = list(gram_schmidt(teugels_system(1, tr.mu), tr.mu))
    rep = chaos_coefficients("Lbar", fam, tr, 1.0, 2, 4000, SEED, cell_depth=1, grid_step=0.05)
    for cell in (0, 1):
        row = rep.coefficient((0,), (cell,))
        assert abs(row["coefficient"] - 1.0) <= 4 * row["se"]


def test_held_out_residual_is_calibrated():
    # complete system: z-scores of the residual should look standard across seeds
    tr = LevyTriplet(0.0, 0.0, Atomic.of([(1.0, 1.0)]))
    fam = list(gram_schmidt(teugels_system(1, tr.mu), tr.mu))
    z = np.array([chaos_coefficients("Lbar", fam, tr, 1.0, 2, 2000, SEED + k, cell_depth=1,
                                     grid_step=0.1).residual(2)["z"] for k in range(24)])
    assert abs(z.mean()) < 0.7
    assert 0.5 < z.std() < 1.5


def test_brownian_square_projection():
    tr = LevyTriplet(0.0, 1.0, empty_measure())
    fam = list(gram_schmidt([origin_indicator()], tr.mu))
    rep = chaos_coefficients("W**2", fam, tr, 1.0, 2, 4000, SEED, cell_depth=0, grid_step=1e-2)
    c0 = rep.coefficient((), ())
    c2 = rep.coefficient((0, 0), (0, 0))
    # W_1^2 = 1 + 2 J_2
    assert abs(c0["coefficient"] - 1.0) <= 4 * c0["se"] + 1e-12
    assert abs(c2["coefficient"] - 2.0) <= 4 * c2["se"] + 0.05
    assert rep.residual(1)["residual2"] > 10 * rep.residual(1)["se"]


def test_projection_reports_round_trip(tmp_path):
    tr = LevyTriplet(0.0, 0.0, Atomic.of([(1.0, 1.0)]))
    fam = list(gram_schmidt(teugels_system(1, tr.mu), tr.mu))
    rep = chaos_coefficients("Lbar**2", fam, tr, 1.0, 1, 200, SEED, cell_depth=0, grid_step=0.05)
    rep.to_json(tmp_path / "c.json")
    rep.to_csv(tmp_path / "c.csv")
    rep.residual_csv(tmp_path / "r.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "order,tuple,cells,coefficient,se"
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 3


def test_projection_is_deterministic_and_worker_invariant():
    tr = LevyTriplet(0.0, 1.0, Atomic.of([(1.0, 2.0)]))
    fam = list(gram_schmidt(teugels_system(2, tr.mu), tr.mu))
    a = chaos_coefficients("Lbar**2", fam, tr, 1.0, 2, 300, SEED, cell_depth=0, grid_step=0.02)
    b = chaos_coefficients("Lbar**2", fam, tr, 1.0, 2, 300, SEED, cell_depth=0, grid_step=0.02,
                           workers=2)
    assert a.to_dict() == b.to_dict()


def test_convergence_study_rows():
    tr = LevyTriplet(0.0, 0.0, Atomic.of([(1.0, 1.0)]))
    fam = list(gram_schmidt(teugels_system(1, tr.mu), tr.mu))
    rows = crp_convergence_study("Lbar", fam, tr, 1.0, 1, [100, 200], SEED, cell_depth=0, grid_step=0.1)
    assert [(r["n_paths"], r["order"]) for r in rows] == [(100, 0), (100, 1), (200, 0), (200, 1)]
    with pytest.raises(ValueError):
        chaos_coefficients("Lbar", fam, tr, 1.0, 1, 3, SEED)
