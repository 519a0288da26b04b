"""Parameter sweeps across the a_min versus chi* boundary."""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Callable

from ..diagnostics import format_float
from ..thresholds import chi_star, query_for
from .config import RunConfig, SweepConfig
from .scenario import atomic_write, run_scenario

RESULT_COLUMNS = ["chi_star", "persistence_margin", "regime"]
RUN_COLUMNS = ["stop_reason", "final_time", "M0", "M1", "M2", "M3", "checks_passed"]


def sweep_columns(sweep: SweepConfig) -> list[str]:
    names: list[str] = []
    for axis, _ in sweep.axes:
        for name in axis:
            if name not in names:
                names.append(name)
    return names + RESULT_COLUMNS + (RUN_COLUMNS if sweep.simulate else []) + ["error"]


def regime(margin: float) -> str:
    """Which side of a_min = chi* a point lies on; the boundedness and persistence estimates need a strict inequality."""
    return "inside" if margin > 0 else "boundary" if margin == 0 else "outside"


def evaluate_point(base: RunConfig, point: dict[str, float], simulate: bool) -> dict:
    """One sweep row; any failure is caught and reported in the ``error`` column."""
    row: dict = dict(point)
    try:
        config = replace(base.with_params(**point), csv_path=None, summary_path=None)
        threshold = chi_star(query_for(config.params, **dict(config.threshold)), config.params)
        row.update(chi_star=threshold.chi_star, persistence_margin=threshold.margin,
                   regime=regime(threshold.margin))
        if simulate:
            s = run_scenario(config, write=False).summary
            row.update(stop_reason=s.stop_reason, final_time=s.final_time, M0=s.M0, M1=s.M1,
                       M2=s.M2, M3=s.M3, checks_passed=s.passed)
        row["error"] = ""
    except Exception as exc:  # per-row failures must not abort the sweep
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _evaluate(args) -> dict:
    return evaluate_point(*args)


def run_sweep(sweep: SweepConfig, progress: Callable[[int, int, dict], None] | None = None) -> list[dict]:
    """Evaluate every sweep point, concurrently when ``workers`` allows.

    Rows come back in axis-major order (first axis slowest) regardless of
    which worker finishes first.
    """
    points = sweep.points()
    jobs = [(sweep.base, p, sweep.simulate) for p in points]
    rows: list[dict] = []
    workers = sweep.workers
    if workers == 1 or len(jobs) == 1:
        results = map(_evaluate, jobs)
        for i, row in enumerate(results):
            rows.append(row)
            if progress is not None:
                progress(i + 1, len(jobs), row)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, row in enumerate(pool.map(_evaluate, jobs)):
                rows.append(row)
                if progress is not None:
                    progress(i + 1, len(jobs), row)
    if sweep.output is not None:
        atomic_write(sweep.output, rows_to_csv(rows, sweep_columns(sweep)))
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value) if not math.isnan(value) else "nan"
    if isinstance(value, int):
        return str(value)
    text = str(value)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_cell(row.get(c)) for c in columns) + "\n")
    return buf.getvalue()
