import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsqp.benchmarks import get_case
from lsqp.gp import (Monomial, Posynomial, eval_monomial, gp_compatibility_scan,
                     monomial_approximation, var)


def test_constant_monomial():
    v, g = eval_monomial(Monomial(1.0, [0, 0, 0]), [2.0, 7.0, 0.1])
    assert v == 1.0
    np.testing.assert_array_equal(g, [0.0, 0.0, 0.0])


def test_monomial_value_and_gradient():
    m = Monomial(2.0, [1, 1])
    v, g = eval_monomial(m, [3.0, 4.0])
    assert v == 24.0
    np.testing.assert_allclose(g, [8.0, 6.0])
    h = 1e-6
    fd = [(m([3 + h, 4])[0] - m([3 - h, 4])[0]) / (2 * h), (m([3, 4 + h])[0] - m([3, 4 - h])[0]) / (2 * h)]
    np.testing.assert_allclose(g, fd, rtol=1e-8)


def test_reciprocal_monomial():
    v, g = eval_monomial(Monomial(1.0, [-1.0]), [2.0])
    assert v == 0.5
    np.testing.assert_allclose(g, [-0.25])


def test_nonpositive_coefficient_rejected():
    with pytest.raises(ValueError):
        Monomial(0.0, [1.0])


def test_approximation_of_a_monomial_is_itself():
    m = Monomial(3.5, [1.5, -2.0])
    a = monomial_approximation(m, [0.4, 9.0])
    assert a.coefficient == m.coefficient
    np.testing.assert_array_equal(a.exponents, m.exponents)
    a = monomial_approximation(Posynomial([m]), [0.4, 9.0])
    assert a.coefficient == pytest.approx(3.5, rel=1e-13)
    np.testing.assert_allclose(a.exponents, m.exponents, atol=1e-13)


def test_approximation_of_sum_at_ones():
    a = monomial_approximation(var(0, 2) + var(1, 2), [1.0, 1.0])
    assert a.coefficient == pytest.approx(2.0, abs=1e-15)
    np.testing.assert_allclose(a.exponents, [0.5, 0.5], atol=1e-15)


def random_posynomial(rng, n_terms, n_vars):
    return Posynomial([Monomial(rng.uniform(0.1, 5.0), rng.uniform(-2, 2, n_vars))
                       for _ in range(n_terms)])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_terms=st.integers(1, 4), n_vars=st.integers(1, 3))
def test_approximation_is_tangent(seed, n_terms, n_vars):
    rng = np.random.default_rng(seed)
    p = random_posynomial(rng, n_terms, n_vars)
    x = rng.uniform(0.2, 5.0, n_vars)
    m = monomial_approximation(p, x)
    (pv, pg), (mv, mg) = p(x), m(x)
    assert abs(pv - mv) <= 1e-12 * max(1.0, abs(pv))
    np.testing.assert_allclose(mg, pg, rtol=1e-10, atol=1e-10 * np.abs(pg).max())


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_terms=st.integers(1, 4), n_vars=st.integers(1, 3))
def test_approximation_underestimates(seed, n_terms, n_vars):
    rng = np.random.default_rng(seed)
    p = random_posynomial(rng, n_terms, n_vars)
    m = monomial_approximation(p, rng.uniform(0.2, 5.0, n_vars))
    for x in np.exp(rng.uniform(-3, 3, (1000, n_vars))):
        assert m(x)[0] <= p(x)[0] * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_monomial_log_affine(seed, n):
    rng = np.random.default_rng(seed)
    m = Monomial(rng.uniform(1e-3, 1e3), rng.uniform(-3, 3, n))
    y0, y1 = rng.uniform(-3, 3, (2, n))
    t = rng.uniform(0, 1)
    F = lambda y: np.log(m(np.exp(y))[0])
    assert abs(F((1 - t) * y0 + t * y1) - ((1 - t) * F(y0) + t * F(y1))) <= 1e-10
    assert abs(F(y1) - F(y0) - m.exponents @ (y1 - y0)) <= 1e-10


# --- compatibility scan --------------------------------------------------------

def test_scan_boyd_all_compatible():
    r = gp_compatibility_scan(get_case("boyd").problem)
    assert r.n_compatible == r.n_constraints == 7
    assert r.recommend_lsqp


def test_scan_floudas_single_posynomial():
    r = gp_compatibility_scan(get_case("floudas").problem)
    cc = r.constraint_counts
    assert cc["posynomial"] == 1 and cc["signomial"] == 5 and cc["monomial"] == 0


def test_scan_rosenbrock_prefers_sqp():
    assert not gp_compatibility_scan(get_case("rosenbrock").problem).recommend_lsqp


def test_scan_all_opaque():
    r = gp_compatibility_scan([("objective", "opaque"), ("ineq", "opaque"), ("eq", "opaque")])
    assert r.fraction == 0.0 and not r.recommend_lsqp


def test_scan_signomial_equality_not_compatible():
    r = gp_compatibility_scan([("objective", "monomial"), ("eq", "signomial"), ("eq", "posynomial")])
    assert r.n_compatible == 1


def test_scan_threshold_and_json():
    r = gp_compatibility_scan([("objective", "monomial"), ("ineq", "signomial")], threshold=0.4)
    d = json.loads(r.to_json())
    assert d["gp_compatible_fraction"] == 0.5 and d["recommend_lsqp"] is True
