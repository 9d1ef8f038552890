import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsqp import lsqp as lsqp_engine
from lsqp import sqp as sqp_engine
from lsqp.benchmarks import get_case
from lsqp.gp import Monomial, Posynomial, var
from lsqp.lsqp import LogSpace, build_log_subproblem, log_transform
from lsqp.problem import (Problem, ScalarFunction, TransformFailure, evaluate_point)
from lsqp.qp import solve_qp
from lsqp.sqp import (BfgsState, LinearSpace, LineSearchFailure, SolverOptions, Termination,
                      build_subproblem, damped_bfgs_update, line_search)


def fn(f, kind="opaque"):
    return ScalarFunction(f, kind)


square = fn(lambda x: (x[0] ** 2, np.array([2 * x[0]])))


def one_var(objective, ineq=(), lower=1e-6):
    return Problem(1, objective, ineq, lower_bounds=[lower])


# --- damped BFGS ---------------------------------------------------------------

def test_bfgs_secant_already_satisfied():
    B = damped_bfgs_update(BfgsState.identity(3), [1.0, 0, 0], [1.0, 0, 0]).B
    np.testing.assert_allclose(B, np.eye(3), atol=1e-15)


def test_bfgs_curvature_two():
    B = damped_bfgs_update(BfgsState.identity(3), [1.0, 0, 0], [2.0, 0, 0]).B
    expected = np.eye(3)
    expected[0, 0] = 2.0
    np.testing.assert_allclose(B, expected, atol=1e-15)


def test_bfgs_negative_curvature_is_damped():
    # theta = 0.8 / (1 + 1) = 0.4, r = 0.4 * (-1) + 0.6 * 1 = 0.2, B11 = 1 - 1 + 0.2
    B = damped_bfgs_update(BfgsState.identity(2), [1.0, 0], [-1.0, 0]).B
    assert B[0, 0] == pytest.approx(0.2, abs=1e-14)
    assert np.min(np.linalg.eigvalsh(B)) > 0


def test_bfgs_degenerate_step_skipped():
    st_ = damped_bfgs_update(BfgsState.identity(2), [1e-9, 0], [1.0, 0])
    assert st_.skipped
    np.testing.assert_array_equal(st_.B, np.eye(2))
    with pytest.raises(ValueError):
        damped_bfgs_update(BfgsState.identity(2), [0.0, 0.0], [1.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8))
def test_bfgs_stays_positive_definite(seed, n):
    rng = np.random.default_rng(seed)
    state = BfgsState.identity(n)
    for _ in range(50):
        state = damped_bfgs_update(state, rng.standard_normal(n), rng.standard_normal(n) * 3)
        np.testing.assert_allclose(state.B, state.B.T, atol=1e-12 * np.abs(state.B).max())
        assert np.all(np.isfinite(state.B))
        np.linalg.cholesky(state.B)


# --- classical subproblem and line search ------------------------------------

def test_build_subproblem_quadratic():
    qp = build_subproblem(evaluate_point(one_var(square), [3.0]), BfgsState.identity(1))
    np.testing.assert_array_equal(qp.H, [[1.0]])
    np.testing.assert_array_equal(qp.c, [6.0])


def test_build_subproblem_linear_constraint():
    g = fn(lambda x: (x[0], np.array([1.0])))
    qp = build_subproblem(evaluate_point(one_var(square, [g]), [2.0]), BfgsState.identity(1))
    np.testing.assert_array_equal(qp.A_ineq, [[1.0]])
    np.testing.assert_array_equal(qp.b_ineq, [1.0])


def test_boyd_optimum_gives_null_step():
    case = get_case("boyd")
    ev = evaluate_point(case.problem, case.known_optimum.x_star)
    d = solve_qp(build_subproblem(ev, BfgsState.identity(3))).d
    assert np.linalg.norm(d) <= 1e-5
    d = solve_qp(build_log_subproblem(log_transform(ev), BfgsState.identity(3))).d
    assert np.linalg.norm(d) <= 1e-5


def _search(x, d, opts=SolverOptions()):
    p = one_var(square)
    space = LinearSpace()
    m = space.model(evaluate_point(p, [x]))
    return line_search(p, space, m, np.array([d]), 1.0, opts, np.zeros(0))


def test_line_search_full_step():
    alpha, m = _search(1.0, -1.0)
    assert alpha == 1.0 and m.x[0] == 0.0


def test_line_search_backtracks():
    # Armijo by hand, slope -20: alpha 1, 0.5, 0.25 give f = 81, 16, 2.25; 0.125 gives 0.0625
    alpha, _ = _search(1.0, -10.0)
    assert alpha == 0.125


def test_line_search_gives_up():
    with pytest.raises(LineSearchFailure):
        _search(1.0, 1.0)  # ascent direction


# --- classical solves ----------------------------------------------------------

def test_start_at_unconstrained_optimum():
    obj = fn(lambda x: ((x[0] - 2) ** 2, np.array([2 * (x[0] - 2)])))
    res = sqp_engine.solve(one_var(obj), [2.0])
    assert res.termination is Termination.GRAD_LAGRANGIAN
    assert res.iterations == 0 and len(res.trace) == 1


def test_rosenbrock_good_start():
    case = get_case("rosenbrock")
    res = sqp_engine.solve(case.problem, [1.05, 0.95], case.options_for("sqp"))
    assert res.converged
    np.testing.assert_allclose(res.x_final, [1.0, 1.0], atol=1e-5)
    assert res.f_final == pytest.approx(1.0, abs=1e-8)
    assert 2 <= res.iterations <= 6


@pytest.mark.parametrize("engine", [sqp_engine.solve, lsqp_engine.solve])
def test_trace_and_trust_invariants(engine):
    case = get_case("rosenbrock")
    opts = case.options_for("sqp")
    res = engine(case.problem, [1.4, 1.9], opts)
    assert len(res.trace) == res.iterations + 1 <= opts.max_iter + 1
    xs = [r.x for r in res.trace]
    for k, frac in enumerate(opts.trust_fractions[:res.iterations]):
        ratio = np.abs(xs[k + 1] - xs[k]) / np.abs(xs[k])
        assert np.all(ratio <= frac * (1 + 1e-9))


@pytest.mark.parametrize("name", ["boyd", "floudas", "kirschen_ozturk"])
@pytest.mark.parametrize("alg", ["sqp", "lsqp"])
def test_merit_decreases_on_every_step(name, alg):
    case = get_case(name)
    rng = np.random.default_rng(1)
    x0 = case.known_optimum.x_star * (1 + rng.uniform(-0.1, 0.1, case.problem.n_vars))
    engine = sqp_engine.solve if alg == "sqp" else lsqp_engine.solve
    res = engine(case.problem, x0, case.options_for(alg))
    assert res.converged
    for rec in res.trace[1:]:
        assert rec.merit <= rec.merit_start + 1e-12 * max(1.0, abs(rec.merit_start))


def test_solve_is_deterministic():
    case = get_case("floudas")
    x0 = case.known_optimum.x_star * 1.05
    a = sqp_engine.solve(case.problem, x0, case.options_for("sqp"))
    b = sqp_engine.solve(case.problem, x0, case.options_for("sqp"))
    assert a.iterations == b.iterations
    for ra, rb in zip(a.trace, b.trace):
        np.testing.assert_array_equal(ra.x, rb.x)


def test_x0_below_floor_rejected():
    with pytest.raises(ValueError):
        sqp_engine.solve(one_var(square, lower=1.0), [0.5])


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(max_iter=0)
    with pytest.raises(ValueError):
        SolverOptions(eps_step=0)
    with pytest.raises(ValueError):
        SolverOptions(trust_fractions=(0.5, 1.5))


# --- log transform -------------------------------------------------------------

def test_log_gradient_of_monomial_is_exponents():
    m = Monomial(3.0, [2.0, -1.0])
    p = Problem(2, m.function())
    for x in ([0.3, 7.0], [12.0, 0.01]):
        lev = log_transform(evaluate_point(p, x))
        np.testing.assert_allclose(lev.log_grad_f, [2.0, -1.0], atol=1e-14)


def test_log_gradient_of_sum():
    p = Problem(2, (var(0, 2) + var(1, 2)).function())
    lev = log_transform(evaluate_point(p, [1.0, 1.0]))
    assert lev.log_f == pytest.approx(np.log(2.0), abs=1e-15)
    np.testing.assert_allclose(lev.log_grad_f, [0.5, 0.5], atol=1e-15)
    # central differences in y
    h = 1e-6
    F = lambda y: np.log(np.exp(y[0]) + np.exp(y[1]))
    fd = [(F([h, 0]) - F([-h, 0])) / (2 * h), (F([0, h]) - F([0, -h])) / (2 * h)]
    np.testing.assert_allclose(lev.log_grad_f, fd, rtol=1e-8)


def test_log_gradient_identity():
    lev = log_transform(evaluate_point(Problem(1, var(0, 1).function()), [3.0]))
    assert lev.log_f == pytest.approx(np.log(3.0))
    np.testing.assert_allclose(lev.log_grad_f, [1.0])


def test_log_transform_failure_lists_offenders():
    g = fn(lambda x: (x[0] - 2.0, np.array([1.0])))
    with pytest.raises(TransformFailure) as err:
        log_transform(evaluate_point(Problem(1, var(0, 1).function(), [g]), [1.0]))
    assert [lab for lab, _ in err.value.offenders] == ["g1"]


def test_log_subproblem_rows():
    p = Problem(2, var(0, 2).function(),
                [Monomial(1.0, [1, 1]).function(),
                 Posynomial([var(0, 2, 2.0), var(1, 2, 3.0)]).function()])
    qp = build_log_subproblem(log_transform(evaluate_point(p, [1.0, 1.0])), BfgsState.identity(2))
    np.testing.assert_allclose(qp.A_ineq[0], [1.0, 1.0])
    assert qp.b_ineq[0] == 0.0
    qp = build_log_subproblem(log_transform(evaluate_point(p, [0.1, 0.1])), BfgsState.identity(2))
    np.testing.assert_allclose(qp.A_ineq[1], [0.4, 0.6], atol=1e-15)
    assert qp.b_ineq[1] == pytest.approx(np.log(0.5), abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_monomial_rows_are_exact(seed):
    rng = np.random.default_rng(seed)
    m = Monomial(rng.uniform(0.1, 10), rng.uniform(-3, 3, 3))
    p = Problem(3, var(0, 3).function(), [m.function()])
    y = rng.uniform(-2, 2, 3)
    lev = LogSpace().model(evaluate_point(p, np.exp(y)))
    for _ in range(10):
        d = rng.standard_normal(3)
        d /= max(1.0, np.linalg.norm(d))
        exact = np.log(m(np.exp(y + d))[0])
        assert abs(exact - (lev.c[0] + lev.grad_c[0] @ d)) <= 1e-10


def test_exp_log_round_trip():
    x = np.geomspace(1e-6, 1e6, 10_001)
    space = LogSpace()
    np.testing.assert_allclose(space.to_x(space.to_internal(x)), x, rtol=1e-15, atol=0)


def test_scale_equivariance():
    # x1 -> c x1 with constants adjusted: the log trace shifts by log c
    c = 1000.0
    base = Problem(2, Monomial(1.0, [-1, -1]).function(),
                   [Posynomial([var(0, 2, 0.5), var(1, 2, 0.25)]).function(),
                    Monomial(0.5, [-1, 1]).function()])
    scaled = Problem(2, Monomial(c, [-1, -1]).function(),
                     [Posynomial([var(0, 2, 0.5 / c), var(1, 2, 0.25)]).function(),
                      Monomial(0.5 * c, [-1, 1]).function()])
    a = lsqp_engine.solve(base, [0.7, 1.3])
    b = lsqp_engine.solve(scaled, [0.7 * c, 1.3])
    assert a.iterations == b.iterations and a.converged
    for ra, rb in zip(a.trace, b.trace):
        np.testing.assert_allclose(np.log(rb.x) - np.log(ra.x), [np.log(c), 0.0], atol=1e-9)


def test_lsqp_transform_failure_at_start():
    case = get_case("floudas")
    x = case.known_optimum.x_star.copy()
    x[4] *= 1.5  # x5 > x8 makes 0.01(x8 - x5) negative
    res = lsqp_engine.solve(case.problem, x)
    assert res.termination is Termination.TRANSFORM_FAILURE
    assert "g6" in res.message
