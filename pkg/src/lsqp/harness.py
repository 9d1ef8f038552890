"""Monte Carlo experiments: common random starts, per-trial records, summaries.

Trial i always draws its start from its own generator seeded with
``(seed, i)``, so results do not depend on how trials are spread over
workers, and every algorithm sees the same starts.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from . import lsqp as lsqp_engine
from . import sqp as sqp_engine
from .benchmarks import NAMES, BenchmarkCase, get_case
from .kkt import kkt_residual
from .problem import NonFiniteEvaluation, check_positivity, evaluate_point
from .sqp import SolverOptions, Termination

SCHEMA_VERSION = 1
ALGORITHMS = ("sqp", "lsqp")
GUESS_DELTA = {"good": 0.10, "poor": 0.80}
MAX_RESAMPLES = 10_000
CSV_FIELDS = ("benchmark", "algorithm", "guess", "trial", "seed", "outcome", "termination",
              "iterations", "f_final", "rel_obj_error", "kkt_residual", "wall_ms")

_ENGINES = {"sqp": sqp_engine.solve, "lsqp": lsqp_engine.solve}
_CERT_SPACE = {"sqp": "linear", "lsqp": "log"}


class Outcome(str, Enum):
    SUCCESS = "Success"
    LOCAL_OPTIMUM = "LocalOptimum"
    MAX_ITER = "MaxIter"
    LINE_SEARCH_FAILURE = "LineSearchFailure"
    TRANSFORM_FAILURE = "TransformFailure"
    QP_FAILURE = "QpFailure"
    ERROR = "Error"


_TERMINATION_OUTCOME = {
    Termination.MAX_ITER: Outcome.MAX_ITER,
    Termination.LINE_SEARCH_FAILURE: Outcome.LINE_SEARCH_FAILURE,
    Termination.TRANSFORM_FAILURE: Outcome.TRANSFORM_FAILURE,
    Termination.QP_FAILURE: Outcome.QP_FAILURE,
}


@dataclass(frozen=True)
class ExperimentConfig:
    benchmark: str
    algorithms: tuple = ALGORITHMS
    trials_per_cell: int = 100
    guess_quality: str = "good"
    rng_seed: int = 0
    max_iter: int = 500
    worker_count: int = 1
    eps_grad_lagrangian: float | None = None
    eps_step: float | None = None
    enforce_positivity: bool = False
    positive_starts: bool | None = None  # None: the benchmark's default
    constants: dict | None = None

    def __post_init__(self):
        if self.benchmark not in NAMES:
            raise ValueError(f"unknown benchmark {self.benchmark!r}; choose from {', '.join(NAMES)}")
        algs = tuple(self.algorithms)
        if not algs or any(a not in ALGORITHMS for a in algs):
            raise ValueError(f"algorithms must be a non-empty subset of {ALGORITHMS}")
        object.__setattr__(self, "algorithms", algs)
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")
        if self.guess_quality not in GUESS_DELTA:
            raise ValueError("guess_quality must be 'good' or 'poor'")
        if self.max_iter < 1 or self.worker_count < 1:
            raise ValueError("max_iter and worker_count must be >= 1")

    def solver_options(self, case: BenchmarkCase, algorithm) -> SolverOptions:
        return case.options_for(algorithm).merged(
            max_iter=self.max_iter,
            eps_grad_lagrangian=self.eps_grad_lagrangian,
            eps_step=self.eps_step,
            enforce_positivity_in_linesearch=self.enforce_positivity,
        )


@dataclass
class TrialRecord:
    benchmark: str
    algorithm: str
    guess: str
    trial: int
    seed: int
    x0: np.ndarray
    outcome: Outcome
    termination: str
    iterations: int
    f_final: float
    rel_obj_error: float
    x_final: np.ndarray
    kkt_residual: float = math.nan
    wall_ms: float = 0.0


# --- sampling ---------------------------------------------------------------

def sample_initial_guess(optimum, quality, rng, floors=None):
    """Uniform, independent per variable, in [x*(1 - delta), x*(1 + delta)]."""
    optimum = np.asarray(optimum, dtype=float)
    if np.any(optimum <= 0):
        raise ValueError("optimum must be strictly positive")
    delta = GUESS_DELTA[quality] if isinstance(quality, str) else float(quality)
    x = optimum * (1.0 + rng.uniform(-delta, delta, optimum.size))
    if floors is not None:
        x = np.maximum(x, floors)
    return x


def trial_rng(seed, trial_index):
    return np.random.default_rng([int(seed), int(trial_index)])


def _positive_at(case, x):
    try:
        return not check_positivity(evaluate_point(case.problem, x))
    except NonFiniteEvaluation:
        return False


def initial_guess(case: BenchmarkCase, quality, seed, trial_index, positive_starts=None):
    """Start for one trial; with positive_starts, redraw until f, g, h > 0."""
    rng = trial_rng(seed, trial_index)
    positive = case.positive_starts if positive_starts is None else positive_starts
    x = sample_initial_guess(case.known_optimum.x_star, quality, rng, case.problem.lower_bounds)
    if positive:
        for _ in range(MAX_RESAMPLES):
            if _positive_at(case, x):
                break
            x = sample_initial_guess(case.known_optimum.x_star, quality, rng, case.problem.lower_bounds)
    return x


# --- single trials ----------------------------------------------------------

def classify(case: BenchmarkCase, result) -> Outcome:
    if not result.termination.converged:
        return _TERMINATION_OUTCOME[result.termination]
    if case.is_success(result.x_final, result.f_final):
        return Outcome.SUCCESS
    return Outcome.LOCAL_OPTIMUM


def run_trial(case: BenchmarkCase, algorithm, x0, config: ExperimentConfig, trial_index=0) -> TrialRecord:
    """Solve once from x0 and classify. Never raises for solver trouble."""
    options = config.solver_options(case, algorithm)
    t0 = time.perf_counter()
    n = case.problem.n_vars
    try:
        res = _ENGINES[algorithm](case.problem, x0, options)
    except Exception as exc:  # noqa: BLE001 - recorded as an outcome
        return TrialRecord(case.name, algorithm, config.guess_quality, trial_index, config.rng_seed,
                           np.array(x0, dtype=float), Outcome.ERROR, type(exc).__name__, 0,
                           math.nan, math.nan, np.full(n, math.nan),
                           wall_ms=1e3 * (time.perf_counter() - t0))
    wall = 1e3 * (time.perf_counter() - t0)
    outcome = classify(case, res)
    rel_f = math.nan
    if np.isfinite(res.f_final):
        rel_f = case.relative_errors(res.x_final, res.f_final)[0]
    kkt = math.nan
    if outcome is Outcome.SUCCESS:
        kkt = kkt_residual(case.problem, res.x_final, _CERT_SPACE[algorithm]).residual
    return TrialRecord(case.name, algorithm, config.guess_quality, trial_index, config.rng_seed,
                       np.array(x0, dtype=float), outcome, res.termination.value, res.iterations,
                       res.f_final, rel_f, res.x_final, kkt, wall)


# --- experiments ------------------------------------------------------------

@lru_cache(maxsize=16)
def _cached_case(name, constants_json):
    constants = json.loads(constants_json) if constants_json else None
    return get_case(name, constants=constants)


def _case_for(config):
    key = json.dumps(config.constants, sort_keys=True) if config.constants else ""
    return _cached_case(config.benchmark, key)


def _run_chunk(config, algorithm, indices):
    case = _case_for(config)
    out = []
    for i in indices:
        x0 = initial_guess(case, config.guess_quality, config.rng_seed, i, config.positive_starts)
        out.append(run_trial(case, algorithm, x0, config, i))
    return out


def run_trials(config: ExperimentConfig) -> list[TrialRecord]:
    """All trial records, ordered by algorithm then trial index."""
    indices = list(range(config.trials_per_cell))
    records = []
    if config.worker_count == 1:
        for alg in config.algorithms:
            records += _run_chunk(config, alg, indices)
        return records
    n_chunks = config.worker_count * 4
    chunks = [indices[i::n_chunks] for i in range(n_chunks) if indices[i::n_chunks]]
    with ProcessPoolExecutor(max_workers=config.worker_count) as pool:
        futures = [(alg, pool.submit(_run_chunk, config, alg, chunk))
                   for alg in config.algorithms for chunk in chunks]
        by_alg = {alg: [] for alg in config.algorithms}
        for alg, fut in futures:
            by_alg[alg] += fut.result()
    for alg in config.algorithms:
        records += sorted(by_alg[alg], key=lambda r: r.trial)
    return records


@dataclass
class AlgorithmSummary:
    algorithm: str
    n_trials: int
    n_success: int
    mean_iterations: float | None
    failure_count: int
    failure_rate: float
    outcome_counts: dict
    mean_objective: float | None
    mean_rel_obj_error: float | None
    mean_variables: list | None
    mean_rel_variable_errors: list | None
    max_kkt_residual: float | None
    convergence_curve: list

    def to_dict(self):
        return asdict(self)


@dataclass
class ExperimentSummary:
    benchmark: str
    guess_quality: str
    trials_per_cell: int
    rng_seed: int
    max_iter: int
    variable_names: list
    optimum_objective: float
    optimum_x: list
    algorithms: dict
    metadata: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        d = asdict(self)
        d["algorithms"] = {k: v.to_dict() for k, v in self.algorithms.items()}
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _mean(values):
    return float(np.mean(values)) if len(values) else None


def summarize_algorithm(records, algorithm, f_star, x_star, max_iter) -> AlgorithmSummary:
    recs = [r for r in records if r.algorithm == algorithm]
    ok = [r for r in recs if r.outcome is Outcome.SUCCESS]
    counts = {o.value: 0 for o in Outcome}
    for r in recs:
        counts[r.outcome.value] += 1
    n = len(recs)
    its = np.array([r.iterations for r in ok], dtype=int)
    curve = [float(np.count_nonzero(its <= k)) / n if n else 0.0 for k in range(1, max_iter + 1)]
    mean_x = mean_rel_x = None
    if ok:
        xs = np.vstack([r.x_final for r in ok])
        mean_x = xs.mean(axis=0).tolist()
        mean_rel_x = ((xs - x_star) / np.abs(x_star)).mean(axis=0).tolist()
    kkts = [r.kkt_residual for r in ok]
    return AlgorithmSummary(
        algorithm=algorithm,
        n_trials=n,
        n_success=len(ok),
        mean_iterations=_mean(its),
        failure_count=n - len(ok),
        failure_rate=(n - len(ok)) / n if n else 0.0,
        outcome_counts=counts,
        mean_objective=_mean([r.f_final for r in ok]),
        mean_rel_obj_error=_mean([r.rel_obj_error for r in ok]),
        mean_variables=mean_x,
        mean_rel_variable_errors=mean_rel_x,
        max_kkt_residual=float(max(kkts)) if kkts else None,
        convergence_curve=curve,
    )


def summarize(records, case: BenchmarkCase, config: ExperimentConfig) -> ExperimentSummary:
    """Deterministic fold over records in (algorithm, trial) order."""
    ko = case.known_optimum
    positive = case.positive_starts if config.positive_starts is None else config.positive_starts
    algs = {alg: summarize_algorithm(records, alg, ko.objective_value, ko.x_star, config.max_iter)
            for alg in config.algorithms}
    meta = {
        "sampling": "uniform, independent per variable, within +/-delta of x_star, clamped to floors",
        "delta": GUESS_DELTA[config.guess_quality],
        "positive_starts": bool(positive),
        "mean_iterations_over": "successful trials",
        "success_tolerances": list(case.success_tolerances),
        "enforce_positivity": config.enforce_positivity,
        "rng": "numpy default_rng([seed, trial_index])",
    }
    return ExperimentSummary(
        benchmark=case.name, guess_quality=config.guess_quality,
        trials_per_cell=config.trials_per_cell, rng_seed=config.rng_seed, max_iter=config.max_iter,
        variable_names=list(case.problem.variable_names),
        optimum_objective=float(ko.objective_value), optimum_x=ko.x_star.tolist(),
        algorithms=algs, metadata=meta)


def run_experiment(config: ExperimentConfig, return_records=False):
    case = _case_for(config)
    records = run_trials(config)
    summary = summarize(records, case, config)
    return (summary, records) if return_records else summary


# --- CSV / JSON -------------------------------------------------------------

def records_to_csv(records, variable_names, fh=None):
    """Write trial records; returns the text when fh is None."""
    own = fh is None
    fh = io.StringIO() if own else fh
    cols = list(CSV_FIELDS) + [f"x_{v}" for v in variable_names]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([r.benchmark, r.algorithm, r.guess, r.trial, r.seed, r.outcome.value, r.termination,
                    r.iterations, repr(float(r.f_final)), repr(float(r.rel_obj_error)),
                    repr(float(r.kkt_residual)), f"{r.wall_ms:.3f}"]
                   + [repr(float(v)) for v in r.x_final])
    return fh.getvalue() if own else None


def records_from_csv(fh) -> list[TrialRecord]:
    rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        xcols = [k for k in row if k.startswith("x_")]
        out.append(TrialRecord(
            benchmark=row["benchmark"], algorithm=row["algorithm"], guess=row["guess"],
            trial=int(row["trial"]), seed=int(row["seed"]), x0=np.zeros(0),
            outcome=Outcome(row["outcome"]), termination=row["termination"],
            iterations=int(row["iterations"]), f_final=float(row["f_final"]),
            rel_obj_error=float(row["rel_obj_error"]),
            x_final=np.array([float(row[k]) for k in xcols]),
            kkt_residual=float(row["kkt_residual"]), wall_ms=float(row["wall_ms"])))
    return out


def summary_from_records(records, max_iter=500, constants=None, positive_starts=None,
                         enforce_positivity=False) -> ExperimentSummary:
    """Rebuild a summary from records alone (e.g. read back from CSV)."""
    if not records:
        raise ValueError("no records")
    first = records[0]
    algs = tuple(a for a in ALGORITHMS if any(r.algorithm == a for r in records))
    config = ExperimentConfig(benchmark=first.benchmark, algorithms=algs,
                              trials_per_cell=len({r.trial for r in records}),
                              guess_quality=first.guess, rng_seed=first.seed, max_iter=max_iter,
                              enforce_positivity=enforce_positivity,
                              positive_starts=positive_starts, constants=constants)
    return summarize(records, _case_for(config), config)


def curve_csv(summary: ExperimentSummary) -> str:
    algs = list(summary.algorithms)
    lines = ["k," + ",".join(algs)]
    for k in range(summary.max_iter):
        lines.append(f"{k + 1}," + ",".join(repr(summary.algorithms[a].convergence_curve[k]) for a in algs))
    return "\n".join(lines) + "\n"
