import math
import pickle

import numpy as np
import pytest
from hypothesis import given, strategies as st

from levychaos.functions import (AtomTable, Combination, Constant, HaarWeighted, Indicator,
                                 LeftClosedIndicator, Monomial, Product, TestFunction, Zero,
                                 haar_psi, hermite_orthonormal, identity_plus_origin,
                                 jump_product, linear_combination, monomial, origin_indicator)

finite = st.floats(-5, 5, allow_nan=False)


def test_value_at_origin_is_separate_from_jump_part():
    f = identity_plus_origin(2.5)
    assert f(0.0) == 2.5
    assert f(np.array([1.0, -3.0])).tolist() == [1.0, -3.0]


def test_indicator_is_left_open_right_closed():
    ind = Indicator(1.0, 2.0)
    assert ind(np.array([1.0, 1.5, 2.0, 2.1])).tolist() == [0.0, 1.0, 1.0, 0.0]
    lc = LeftClosedIndicator(1.0, 2.0)
    assert lc(np.array([1.0, 2.0])).tolist() == [1.0, 0.0]


def test_atom_table_is_zero_off_its_points():
    t = AtomTable((1.0, 2.0), (3.0, -1.0))
    assert t(np.array([1.0, 2.0, 1.5])).tolist() == [3.0, -1.0, 0.0]


def test_zero_absorbs_products_and_vanishes_from_sums():
    f = TestFunction(1.0, Zero())
    g = monomial(2)
    assert isinstance((f * g).jump, Zero)
    assert isinstance(linear_combination([0.0, 0.0], [g, g]).jump, Zero)


def test_nested_combinations_flatten():
    f = monomial(1) + monomial(2) + monomial(3)
    assert isinstance(f.jump, Combination)
    assert len(f.jump.terms) == 3
    p = monomial(1) * monomial(1) * monomial(2)
    assert isinstance(p.jump, Product) and len(p.jump.factors) == 3
    assert p.jump(np.array([2.0]))[0] == 16.0


@given(finite, finite, finite)
def test_arithmetic_is_pointwise(a, b, x):
    f = TestFunction(a, Monomial(1))
    g = TestFunction(b, Monomial(2))
    pts = np.array([0.0, x if x != 0 else 1.0])
    assert np.allclose((f + g)(pts), f(pts) + g(pts))
    assert np.allclose((f - g)(pts), f(pts) - g(pts))
    assert np.allclose((f * g)(pts), f(pts) * g(pts))
    assert np.allclose((3.0 * f)(pts), 3.0 * f(pts))
    assert np.allclose((-f)(pts), -f(pts))


def test_jump_product_drops_the_origin_value():
    f = identity_plus_origin(1.0)
    p = jump_product([f, f])
    assert p.at_zero == 0.0
    assert p.jump(np.array([3.0]))[0] == 9.0


def test_hermite_functions_match_probabilists_polynomials():
    # H_k(x) = He_k(sqrt 2 x) / sqrt(k! sqrt(pi)), independent closed form
    x = np.linspace(-3, 3, 41)
    H = hermite_orthonormal(6, x)
    for k in range(7):
        c = np.zeros(k + 1)
        c[k] = 1.0
        ref = np.polynomial.hermite_e.hermeval(np.sqrt(2) * x, c) / math.sqrt(math.factorial(k) * math.sqrt(math.pi))
        assert np.allclose(H[k], ref, atol=1e-12)


def test_hermite_functions_are_orthonormal_for_gaussian_weight():
    t, w = np.polynomial.hermite.hermgauss(40)
    H = hermite_orthonormal(8, t)
    G = (H * w) @ H.T
    assert np.max(np.abs(G - np.eye(9))) < 1e-12


def test_haar_mother_values():
    # psi = 1 on [0, 1/2), -1 on [1/2, 1), 0 elsewhere
    x = np.array([-0.1, 0.0, 0.25, 0.5, 0.75, 1.0])
    assert haar_psi(x).tolist() == [0.0, 1.0, 1.0, -1.0, -1.0, 0.0]


def test_haar_weighted_divides_by_root_density():
    fn = HaarWeighted(1, 2, lambda x: 4.0 * np.ones_like(x))
    assert fn.support() == (1.0, 1.5)
    assert fn(np.array([1.1]))[0] == pytest.approx(np.sqrt(2) / 2)


def test_functions_pickle():
    f = linear_combination([1.0, -2.0], [identity_plus_origin(), monomial(3)], name="f")
    g = pickle.loads(pickle.dumps(f))
    x = np.array([0.0, 0.5, 2.0])
    assert np.array_equal(f(x), g(x))


def test_origin_indicator_has_no_jump_part():
    f = origin_indicator()
    assert f(0.0) == 1.0 and f(np.array([1.0]))[0] == 0.0
    assert Constant(2.0)(np.array([5.0]))[0] == 2.0
