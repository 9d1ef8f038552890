import io

import numpy as np
import pytest

from lsqp.benchmarks import get_case
from lsqp.harness import (ExperimentConfig, Outcome, curve_csv, initial_guess, records_from_csv,
                          records_to_csv, run_experiment, run_trial, sample_initial_guess,
                          summary_from_records)
from lsqp.problem import check_positivity, evaluate_point
from lsqp.report import render


def test_sample_good_interval():
    rng = np.random.default_rng(0)
    xs = np.array([sample_initial_guess([10.0], "good", rng)[0] for _ in range(2000)])
    assert xs.min() >= 9.0 and xs.max() <= 11.0
    assert xs.min() < 9.05 and xs.max() > 10.95


def test_sample_poor_interval():
    rng = np.random.default_rng(0)
    xs = np.array([sample_initial_guess([10.0], "poor", rng)[0] for _ in range(2000)])
    assert xs.min() >= 2.0 and xs.max() <= 18.0


def test_sample_zero_width():
    np.testing.assert_array_equal(sample_initial_guess([3.0, 7.0], 0.0, np.random.default_rng(1)),
                                  [3.0, 7.0])


def test_sample_clamps_to_floors():
    x = sample_initial_guess([1e-6], "poor", np.random.default_rng(2), floors=[1e-6])
    assert x[0] >= 1e-6


def test_positive_starts_are_positive():
    case = get_case("floudas")
    for i in range(30):
        x = initial_guess(case, "poor", 5, i)
        assert not check_positivity(evaluate_point(case.problem, x))


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("nope")
    with pytest.raises(ValueError):
        ExperimentConfig("boyd", algorithms=("ipopt",))
    with pytest.raises(ValueError):
        ExperimentConfig("boyd", trials_per_cell=0)


def test_trial_at_optimum():
    case = get_case("rosenbrock")
    for alg in ("sqp", "lsqp"):
        rec = run_trial(case, alg, np.array([1.0, 1.0]), ExperimentConfig("rosenbrock"))
        assert rec.outcome is Outcome.SUCCESS and rec.iterations == 0


def test_boyd_lsqp_good_within_ten():
    case = get_case("boyd")
    cfg = ExperimentConfig("boyd", algorithms=("lsqp",))
    for i in range(20):
        rec = run_trial(case, "lsqp", initial_guess(case, "good", 0, i), cfg, i)
        assert rec.outcome is Outcome.SUCCESS and rec.iterations <= 10
        assert rec.kkt_residual <= 1e-4


def test_floudas_poor_transform_failures():
    s = run_experiment(ExperimentConfig("floudas", algorithms=("lsqp",), trials_per_cell=40,
                                        guess_quality="poor", rng_seed=2024))
    assert s.algorithms["lsqp"].outcome_counts["TransformFailure"] > 0


def test_solver_exception_becomes_error_outcome():
    case = get_case("boyd")
    rec = run_trial(case, "sqp", np.array([1.0, 2.0]), ExperimentConfig("boyd"))
    assert rec.outcome is Outcome.ERROR


def small(**kw):
    base = dict(benchmark="boyd", trials_per_cell=12, guess_quality="poor", rng_seed=99)
    base.update(kw)
    return ExperimentConfig(**base)


def test_seed_determinism():
    assert run_experiment(small()).to_json() == run_experiment(small()).to_json()
    assert run_experiment(small()).to_json() != run_experiment(small(rng_seed=100)).to_json()


def test_worker_count_invariance():
    assert run_experiment(small(worker_count=1)).to_json() == run_experiment(small(worker_count=3)).to_json()


def test_common_guesses_across_algorithms():
    _, recs = run_experiment(small(), return_records=True)
    by = {(r.algorithm, r.trial): r.x0 for r in recs}
    for i in range(12):
        np.testing.assert_array_equal(by["sqp", i], by["lsqp", i])


def test_single_trial_summary():
    s, recs = run_experiment(small(trials_per_cell=1, algorithms=("lsqp",)), return_records=True)
    a, r = s.algorithms["lsqp"], recs[0]
    assert a.n_trials == 1
    assert a.mean_iterations == r.iterations and a.mean_objective == r.f_final
    assert a.failure_count == (r.outcome is not Outcome.SUCCESS)


def test_curve_properties():
    s = run_experiment(ExperimentConfig("rosenbrock", trials_per_cell=30, guess_quality="poor",
                                        rng_seed=4))
    for a in s.algorithms.values():
        c = np.array(a.convergence_curve)
        assert c.size == s.max_iter
        assert np.all(np.diff(c) >= 0)
        assert c[-1] == pytest.approx(1 - a.failure_rate)
    lines = curve_csv(s).splitlines()
    assert lines[0] == "k,sqp,lsqp" and len(lines) == s.max_iter + 1


def test_csv_round_trip_reproduces_summary():
    s, recs = run_experiment(small(), return_records=True)
    text = records_to_csv(recs, s.variable_names)
    back = summary_from_records(records_from_csv(io.StringIO(text)))
    assert back.to_json() == s.to_json()
    assert render(back, "md") == render(s, "md")


def test_report_layout():
    s = run_experiment(small())
    md = render(s, "md").splitlines()
    assert md[2] == "|  | Optimum | SQP | LSQP |"
    labels = [row.split("|")[1].strip() for row in md[4:]]
    assert labels == ["Objective", "h", "w", "d", "Iterations", "Failures"]
    assert render(s, "csv").splitlines()[0] == ",Optimum,SQP,LSQP"
    with pytest.raises(ValueError):
        render(s, "latex")
