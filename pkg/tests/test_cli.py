import json

import numpy as np
import pytest

from lsqp.benchmarks import get_case
from lsqp.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_list(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0
    for name in ("boyd", "rosenbrock", "floudas", "kirschen_ozturk"):
        assert name in out


def test_unknown_problem_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--problem", "nope"])
    assert exc.value.code == 1


def test_bad_x0_is_usage_error(capsys):
    code, _, err = run(capsys, "solve", "--problem", "boyd", "--x0", "1,2")
    assert code == 1 and "3 values" in err


def test_solve_at_optimum(capsys):
    code, out, _ = run(capsys, "solve", "--problem", "rosenbrock", "--algo", "sqp", "--x0", "1,1")
    assert code == 0
    assert out.startswith("# configuration")
    assert "after 0 iterations" in out


def test_solve_boyd_lsqp(capsys):
    code, out, _ = run(capsys, "solve", "--problem", "boyd", "--algo", "lsqp", "--x0", "3,6,12")
    assert code == 0 and "termination: GradLagrangian" in out


def test_solve_transform_failure_exits_2(capsys):
    case = get_case("floudas")
    x_star = case.known_optimum.x_star
    g1 = case.problem.ineq_constraints[0]
    d = -g1(x_star)[1]
    d /= np.linalg.norm(d)
    t = 1.0
    while g1(x_star + t * d)[0] > 0:
        t *= 1.5
    x0 = ",".join(repr(float(v)) for v in x_star + t * d)
    code, _, err = run(capsys, "solve", "--problem", "floudas", "--algo", "lsqp", "--x0", x0)
    assert code == 2 and "TransformFailure" in err


def test_scan_outputs(capsys):
    code, out, _ = run(capsys, "scan", "--problem", "boyd")
    assert code == 0 and "GP-compatible: 7/7" in out and "consider LSQP" in out
    code, out, _ = run(capsys, "scan", "--problem", "rosenbrock")
    assert code == 0 and "prefer SQP" in out
    code, out, _ = run(capsys, "scan", "--problem", "floudas", "--format", "json")
    assert code == 0
    report = json.loads(out[out.index("{"):])
    assert report["counts"]["signomial"] > 0


def test_bench_writes_artifacts(capsys, tmp_path):
    code, out, _ = run(capsys, "bench", "--problem", "boyd", "--trials", "5", "--seed", "3",
                       "--out", str(tmp_path))
    assert code == 0
    assert out.startswith("# configuration")
    assert "|  | Optimum | SQP | LSQP |" in out
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["boyd_good_s3_curve.csv", "boyd_good_s3_summary.json", "boyd_good_s3_trials.csv"]
    summary = json.loads((tmp_path / "boyd_good_s3_summary.json").read_text())
    assert summary["algorithms"]["lsqp"]["n_trials"] == 5


def test_bench_honours_env_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("LSQP_OUT_DIR", str(tmp_path / "env"))
    code, _, _ = run(capsys, "bench", "--problem", "rosenbrock", "--trials", "2", "--algo", "lsqp",
                     "--format", "json")
    assert code == 0
    assert (tmp_path / "env" / "rosenbrock_good_s0_summary.json").exists()
