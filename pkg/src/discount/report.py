"""Run artifacts: counterfactual table, JSON report, traces, plot data.

Feasible runs write six files; infeasible runs write ``report.json`` and
``trace.csv`` only. Every CSV has a header row and floats are written with
``repr`` so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import MetricReport
from .optimizer import DiscountResult, IterationRecord
from .ot import ProjectionSet, QuantileView

__all__ = ["emit_report", "QUANTILE_LEVELS", "FEASIBLE_FILES", "INFEASIBLE_FILES"]

QUANTILE_LEVELS = np.arange(1, 100) / 100.0
FEASIBLE_FILES = ("counterfactual.csv", "report.json", "trace.csv", "quantiles.csv", "plan_mu.csv", "plan_nu.csv")
INFEASIBLE_FILES = ("report.json", "trace.csv")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_plan(path: Path, plan: np.ndarray) -> None:
    m = plan.shape[1]
    _write_csv(path, ["i"] + [f"j{j}" for j in range(m)], ([i, *plan[i]] for i in range(plan.shape[0])))


def mean_plan(mu: np.ndarray) -> np.ndarray:
    """Plans averaged over directions and rescaled to total mass 1."""
    avg = np.asarray(mu, dtype=float).mean(axis=0)
    return avg / avg.sum()


def _quantile_rows(series: str, kind: str, values) -> list:
    qv = QuantileView.of(np.asarray(values, dtype=float).reshape(-1))
    return [(series, kind, float(u), float(v)) for u, v in zip(QUANTILE_LEVELS, qv(QUANTILE_LEVELS))]


def quantile_table(factual, counterfactual, theta: ProjectionSet, y_factual, y_cf, y_star,
                   feature_names: Sequence[str]) -> list:
    rows = []
    fx = np.asarray(factual, dtype=float)
    cx = np.asarray(counterfactual, dtype=float)
    for j, name in enumerate(feature_names):
        rows += _quantile_rows("factual", f"feature:{name}", fx[:, j])
        rows += _quantile_rows("counterfactual", f"feature:{name}", cx[:, j])
    pf, pc = theta.project(fx), theta.project(cx)
    for k in range(theta.count):
        rows += _quantile_rows("factual", f"projection:{k}", pf[:, k])
        rows += _quantile_rows("counterfactual", f"projection:{k}", pc[:, k])
    rows += _quantile_rows("factual", "output", y_factual)
    rows += _quantile_rows("counterfactual", "output", y_cf)
    rows += _quantile_rows("target", "output", y_star)
    return rows


def emit_report(
    result: DiscountResult,
    metrics: MetricReport | None,
    outdir,
    *,
    config: dict | None = None,
    counterfactual_columns: dict[str, list] | None = None,
    theta: ProjectionSet | None = None,
    factual=None,
    y_factual=None,
    y_cf=None,
    extra: dict | None = None,
    timestamp: str | None = None,
) -> list[Path]:
    """Write the run artifacts into ``outdir`` and return the written paths.

    ``counterfactual_columns`` holds the decoded table (original units).
    Quantile curves need ``theta``, ``factual`` and both output samples.
    """
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    written = []

    names = [f.name for f in fields(IterationRecord)]
    path = out / "trace.csv"
    _write_csv(path, names, ([getattr(r, k) for k in names] for r in result.trace))
    written.append(path)

    doc = {
        "status": result.status,
        "feasible": result.feasible,
        "final_ucls": {"sw2": result.final_ucls[0], "w2": result.final_ucls[1]},
        "iterations": len(result.trace),
        "converged": result.converged,
        "metrics": metrics.to_json() if metrics is not None else None,
        "config": config or {},
        "timestamp": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        doc.update(extra)
    path = out / "report.json"
    try:
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    written.append(path)

    if not result.feasible:
        return written

    cx = result.counterfactual.points
    if counterfactual_columns is None:
        counterfactual_columns = {n: cx[:, j].tolist() for j, n in enumerate(result.counterfactual.feature_names)}
    header = list(counterfactual_columns)
    n = len(next(iter(counterfactual_columns.values())))
    path = out / "counterfactual.csv"
    _write_csv(path, header, ([counterfactual_columns[h][i] for h in header] for i in range(n)))
    written.append(path)

    path = out / "quantiles.csv"
    if theta is not None and factual is not None:
        rows = quantile_table(factual, cx, theta, y_factual, y_cf, result.y_star,
                              result.counterfactual.feature_names)
    else:
        rows = _quantile_rows("target", "output", result.y_star)
    _write_csv(path, ["series", "kind", "level", "value"], rows)
    written.append(path)

    path = out / "plan_mu.csv"
    _write_plan(path, mean_plan(result.mu))
    written.append(path)
    path = out / "plan_nu.csv"
    _write_plan(path, np.asarray(result.nu, dtype=float))
    written.append(path)
    return written
