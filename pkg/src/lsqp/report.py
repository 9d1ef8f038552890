"""Comparison tables: Optimum | SQP | LSQP."""
from __future__ import annotations

import csv
import io
import json

from .harness import ExperimentSummary

LABELS = {"sqp": "SQP", "lsqp": "LSQP"}


def _num(v):
    if v is None:
        return "-"
    a = abs(v)
    if a != 0 and (a < 1e-2 or a >= 1e5):
        return f"{v:.3e}"
    return f"{v:.4g}" if a < 10 else f"{v:.2f}"


def _pct(v):
    return "" if v is None else f" ({100 * v:+.2f}%)"


def table_rows(summary: ExperimentSummary):
    """Header plus rows of strings; the same cells back md and csv output."""
    algs = list(summary.algorithms)
    header = [""] + ["Optimum"] + [LABELS[a] for a in algs]
    rows = []
    row = ["Objective", _num(summary.optimum_objective)]
    for a in algs:
        s = summary.algorithms[a]
        row.append(_num(s.mean_objective) + _pct(s.mean_rel_obj_error))
    rows.append(row)
    for i, name in enumerate(summary.variable_names):
        row = [name, _num(summary.optimum_x[i])]
        for a in algs:
            s = summary.algorithms[a]
            if s.mean_variables is None:
                row.append("-")
            else:
                row.append(_num(s.mean_variables[i]) + _pct(s.mean_rel_variable_errors[i]))
        rows.append(row)
    base = summary.algorithms[algs[0]].mean_iterations
    row = ["Iterations", "-"]
    for a in algs:
        m = summary.algorithms[a].mean_iterations
        rel = None if (m is None or not base) else m / base - 1.0
        row.append("-" if m is None else f"{m:.2f}" + _pct(rel))
    rows.append(row)
    row = ["Failures", "-"]
    for a in algs:
        s = summary.algorithms[a]
        row.append(f"{s.failure_count} ({100 * s.failure_rate:.2f}%)")
    rows.append(row)
    return header, rows


def markdown_table(summary: ExperimentSummary) -> str:
    header, rows = table_rows(summary)
    title = (f"{summary.benchmark}, {summary.guess_quality} initial guess, "
             f"{summary.trials_per_cell} trials, seed {summary.rng_seed} "
             f"(means over successful trials)")
    out = [f"**{title}**", "", "| " + " | ".join(header) + " |",
           "|" + "|".join(["---"] * len(header)) + "|"]
    out += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(out) + "\n"


def csv_table(summary: ExperimentSummary) -> str:
    header, rows = table_rows(summary)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render(summary: ExperimentSummary, fmt="md") -> str:
    if fmt == "md":
        return markdown_table(summary)
    if fmt == "csv":
        return csv_table(summary)
    if fmt == "json":
        return json.dumps(summary.to_dict(), indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")
