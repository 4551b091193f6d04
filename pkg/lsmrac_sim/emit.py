"""
Writers for traces (CSV), metrics (JSON) and comparison reports.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import pandas as pd

from lsmrac.constants import TRACE_FLOAT_FORMAT
from lsmrac.sim_engine import ComparisonReport, MetricsSummary, SimTrace


def _json_safe(value):
    """Replace non-finite floats, which JSON cannot hold, by strings."""
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def trace_frame(trace: SimTrace, include_theta: bool = True) -> pd.DataFrame:
    return pd.DataFrame(trace.rows(include_theta=include_theta))


def emit_trace(trace: SimTrace, path: str | Path, include_theta: bool = True) -> Path:
    """One row per (step, robot), floats with 9 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace_frame(trace, include_theta).to_csv(path, index=False, float_format=TRACE_FLOAT_FORMAT)
    return path


def emit_metrics(summary: MetricsSummary, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_json_safe(summary.to_dict()), indent=2), encoding="utf-8")
    return path


def emit_comparison(report: ComparisonReport, out_dir: str | Path) -> dict[str, Path]:
    """Write the delta report (JSON) and the paired per-step series (CSV)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "comparison.json"
    report_path.write_text(json.dumps(_json_safe(report.to_dict()), indent=2), encoding="utf-8")

    columns = {}
    for label, series in ((report.label_a, report.series_a), (report.label_b, report.series_b)):
        if series.ndim == 1:
            columns[f"{label}:{report.metric}"] = series
        else:
            for i in range(series.shape[1]):
                columns[f"{label}:{report.metric}_{i}"] = series[:, i]
    frame = pd.DataFrame(columns)
    frame.insert(0, "step", range(len(frame)))
    series_path = out_dir / "comparison_series.csv"
    frame.to_csv(series_path, index=False, float_format=TRACE_FLOAT_FORMAT)
    return {"report": report_path, "series": series_path}
