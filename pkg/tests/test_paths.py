import numpy as np
import pytest
from hypothesis import given, strategies as st

from levychaos.errors import InfiniteActivityWithoutTruncation, NotSquareIntegrable, PathMismatch
from levychaos.functions import (Indicator, Monomial, TestFunction, identity_plus_origin,
                                 origin_indicator)
from levychaos.measure import (Atomic, CauchyJumps, Density, LevyTriplet, MuMeasure,
                               empty_measure)
from levychaos.montecarlo import simulate_batch
from levychaos.paths import (compensated_covariation, constant_series, lebesgue_integral,
                             martingale_path, predictable_covariation, quadratic_covariation,
                             simulate_levy, stochastic_integral, stop_at, truncation_bias_bound)

from conftest import SEED


def _poisson_path(rate, seed=SEED, T=1.0, step=0.1):
    tr = LevyTriplet(0.0, 0.0, Atomic.of([(1.0, rate)]))
    return tr, simulate_levy(tr, T, step, seed)


# -- simulation --------------------------------------------------------------

def test_same_seed_same_path():
    tr = LevyTriplet(0.0, 1.0, Atomic.of([(1.0, 2.0), (-0.5, 1.0)]))
    a = simulate_levy(tr, 1.0, 0.01, SEED, 3)
    b = simulate_levy(tr, 1.0, 0.01, SEED, 3)
    c = simulate_levy(tr, 1.0, 0.01, SEED, 4)
    assert np.array_equal(a.brownian, b.brownian) and np.array_equal(a.jump_times, b.jump_times)
    assert np.array_equal(a.jump_sizes, b.jump_sizes)
    assert not np.array_equal(a.brownian, c.brownian)


def test_poisson_count_mean():
    # sigma2 = 0, nu = 2 delta_1, T = 1: E[#jumps] = 2 and every size is 1
    tr = LevyTriplet(0.0, 0.0, Atomic.of([(1.0, 2.0)]))
    b = simulate_batch(tr, 1.0, 1.0, SEED, 0, 100_000)
    counts = np.diff(b.offsets)
    assert np.all(b.jsizes == 1.0)
    assert abs(counts.mean() - 2.0) <= 3 * counts.std(ddof=1) / np.sqrt(len(counts))


def test_brownian_variance():
    tr = LevyTriplet(0.0, 1.0, empty_measure())
    b = simulate_batch(tr, 1.0, 0.05, SEED, 0, 100_000)
    w2 = b.brownian_at(1.0) ** 2
    assert abs(w2.mean() - 1.0) <= 3 * w2.std(ddof=1) / np.sqrt(len(w2))


def test_density_needs_truncation():
    tr = LevyTriplet(0.0, 0.0, Density(CauchyJumps(), truncation_eps=0.0))
    with pytest.raises(InfiniteActivityWithoutTruncation):
        simulate_levy(tr, 1.0, 0.1, SEED)


def test_timeline_merges_grid_and_jumps():
    _, p = _poisson_path(5.0)
    tl = p.timeline()
    assert set(p.grid) <= set(tl) and set(p.jump_times) <= set(tl)
    assert np.all(np.diff(tl) > 0)


# -- martingales ---------------------------------------------------------------

def test_origin_indicator_gives_brownian_motion():
    tr = LevyTriplet(0.0, 1.0, empty_measure())
    p = simulate_levy(tr, 1.0, 0.01, SEED)
    X = martingale_path(origin_indicator(), p, tr.nu)
    assert np.array_equal(X.values, p.brownian)


def test_identity_gives_compensated_poisson():
    tr, p = _poisson_path(3.0)
    X = martingale_path(TestFunction(0.0, Monomial(1)), p, tr.nu)
    counts = np.searchsorted(p.jump_times, X.timeline, side="right")
    assert np.allclose(X.values, counts - 3.0 * X.timeline, atol=1e-14)
    assert np.allclose(X.jumps[1:], np.isin(X.timeline, p.jump_times)[1:].astype(float))


def test_zero_function_gives_zero_series():
    tr, p = _poisson_path(3.0)
    X = martingale_path(TestFunction(0.0), p, tr.nu)
    assert not X.values.any() and not X.pre.any()


def test_square_integrability_is_enforced():
    nu = Density(CauchyJumps(), truncation_eps=0.1)
    p = simulate_levy(LevyTriplet(0.0, 0.0, nu), 1.0, 0.5, SEED)
    with pytest.raises(NotSquareIntegrable):
        martingale_path(TestFunction(0.0, Monomial(1)), p, nu)


def test_truncation_bias_bound():
    nu = Density(CauchyJumps(), truncation_eps=0.1)
    # int_{0<|x|<0.1} x^2 x^-2 dx = 0.2
    assert truncation_bias_bound(TestFunction(0.0, Monomial(1)), nu) == pytest.approx(0.2, rel=1e-9)
    assert truncation_bias_bound(TestFunction(0.0, Monomial(1)), Atomic.of([(1.0, 1.0)])) == 0.0


# -- brackets ------------------------------------------------------------------

def test_poisson_bracket_counts_jumps():
    tr, p = _poisson_path(2.0)
    f = TestFunction(0.0, Monomial(1))
    X = martingale_path(f, p, tr.nu)
    Q = quadratic_covariation(X, f, X, f, 0.0)
    assert np.array_equal(Q.values, np.searchsorted(p.jump_times, Q.timeline, side="right").astype(float))


def test_brackets_of_disjoint_parts_vanish():
    tr = LevyTriplet(0.0, 1.0, Atomic.of([(1.0, 2.0)]))
    p = simulate_levy(tr, 1.0, 0.1, SEED)
    f, g = origin_indicator(), TestFunction(0.0, Monomial(2))
    Q = quadratic_covariation(martingale_path(f, p, tr.nu), f, martingale_path(g, p, tr.nu), g, 1.0)
    assert not Q.values.any()
    Qb = quadratic_covariation(martingale_path(f, p, tr.nu), f, martingale_path(f, p, tr.nu), f, 1.0)
    assert np.allclose(Qb.values, Qb.timeline)


def test_predictable_covariation_values():
    mu = MuMeasure(1.0, Atomic.of([(1.0, 2.0)]))
    f = identity_plus_origin()
    assert predictable_covariation(f, f, mu, 2.0) == 6.0
    assert predictable_covariation(f, f, mu, 0.0) == 0.0
    g = TestFunction(0.0, Monomial(2)) - TestFunction(0.0, Monomial(1))
    assert predictable_covariation(f, g, mu, 1.7) == 0.0


def test_compensated_poisson_identity():
    for lam in (0.5, 1.0, 5.0):
        tr, p = _poisson_path(lam)
        f = TestFunction(0.0, Monomial(1))
        X = martingale_path(f, p, tr.nu)
        C = compensated_covariation(f, f, p, tr.mu)
        assert C.sup_gap(X) <= 1e-12


def test_gaussian_compensated_covariation_is_zero():
    tr = LevyTriplet(0.0, 1.0, Atomic.of([(1.0, 2.0)]))
    p = simulate_levy(tr, 1.0, 0.1, SEED)
    f = 2.0 * origin_indicator()
    assert np.max(np.abs(compensated_covariation(f, origin_indicator(), p, tr.mu).values)) == 0.0


def test_indicator_family_is_covariation_stable():
    tr = LevyTriplet(0.0, 1.0, Atomic.of([(1.5, 2.0)]))
    p = simulate_levy(tr, 1.0, 0.05, SEED)
    f = TestFunction(1.0, Indicator(1, 2))
    g = TestFunction(0.0, Indicator(1, 2))
    C = compensated_covariation(f, g, p, tr.mu)
    assert C.sup_gap(martingale_path(g, p, tr.nu)) <= 1e-12


# -- integrals ----------------------------------------------------------------

def test_integration_by_parts_for_compensated_poisson():
    tr, p = _poisson_path(2.0)
    f = TestFunction(0.0, Monomial(1))
    X = martingale_path(f, p, tr.nu)
    lhs = X * X
    rhs = 2.0 * stochastic_integral(X, X) + quadratic_covariation(X, f, X, f, 0.0)
    assert lhs.sup_gap(rhs) <= 1e-12


def test_discrete_ito_identity_for_brownian_motion():
    tr = LevyTriplet(0.0, 1.0, empty_measure())
    p = simulate_levy(tr, 1.0, 0.01, SEED)
    W = martingale_path(origin_indicator(), p, tr.nu)
    I = stochastic_integral(W, W)
    qv = np.concatenate([[0.0], np.cumsum(np.diff(p.brownian) ** 2)])
    assert np.allclose(I.values, 0.5 * (p.brownian ** 2 - qv), atol=1e-13)


def test_lebesgue_integral_of_a_line():
    tr, p = _poisson_path(1.0)
    one = constant_series(p, 1.0)
    L = lebesgue_integral(one, 3.0)
    assert np.allclose(L.values, 3.0 * L.timeline)
    LL = lebesgue_integral(L, 1.0)
    assert np.allclose(LL.values, 1.5 * LL.timeline ** 2)


def test_stopping():
    tr, p = _poisson_path(4.0)
    X = martingale_path(TestFunction(0.0, Monomial(1)), p, tr.nu)
    assert stop_at(X, 1.0).sup_gap(X) == 0.0
    assert not stop_at(X, 0.0).values.any()
    S = stop_at(X, 0.37)
    assert S.at(1.0)[0] == pytest.approx(X.at(0.37)[0], abs=1e-14)


def test_series_from_different_paths_do_not_mix():
    tr, p = _poisson_path(1.0, seed=1)
    _, q = _poisson_path(1.0, seed=2)
    f = TestFunction(0.0, Monomial(1))
    with pytest.raises(PathMismatch):
        martingale_path(f, p, tr.nu) + martingale_path(f, q, tr.nu)


@given(st.lists(st.floats(0.0, 1.0), max_size=8))
def test_refinement_preserves_the_path(extra):
    tr = LevyTriplet(0.0, 1.0, Atomic.of([(1.0, 3.0)]))
    p = simulate_levy(tr, 1.0, 0.1, SEED)
    f = identity_plus_origin()
    X = martingale_path(f, p, tr.nu)
    Y = X * X
    R = Y.refine(extra)
    assert np.allclose(R.at(Y.timeline), Y.values, atol=1e-12)
    assert np.allclose(Y.at(R.timeline), R.values, atol=1e-12)


def test_csv_export(tmp_path):
    tr, p = _poisson_path(1.0)
    X = martingale_path(TestFunction(0.0, Monomial(1)), p, tr.nu)
    out = tmp_path / "x.csv"
    X.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "time,value,pre_value" and len(lines) == len(X.timeline) + 1
