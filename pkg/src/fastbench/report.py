"""Result artifacts: JSON summary, per-step CSV trace, comparison table, SVG plot.

Floats are written with ``repr`` so every number reads back bit-exactly, and
nothing run-dependent (time, host, absolute paths) enters the files.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .metric import ComparisonRow, FastResult

SCHEMA_VERSION = 1
FORMATS = ("json", "csv", "svg")

TRACE_COLUMNS = (
    ["duration_s", "passed", "time_s"]
    + [f"ref_{a}" for a in "xyz"] + [f"foot_{a}" for a in "xyz"]
    + [f"ref_v{a}" for a in "xyz"] + [f"foot_v{a}" for a in "xyz"]
)
COMPARISON_COLUMNS = ["model", "actuation_kind", "fastest_time_s", "swing_length_m", "theoretical_velocity_mps",
                      "rank", "status", "error"]


def _num(x):
    """JSON-safe float: non-finite values become null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if math.isfinite(x) else ""
    return str(x)


def result_to_dict(result: FastResult, config: dict = None) -> dict:
    geo = result.geometry
    out = {
        "schema_version": SCHEMA_VERSION,
        "model": result.model_name,
        "achievable": result.achievable,
        "fastest_time_s": _num(result.fastest_time),
        "swing_length_m": _num(result.swing_length),
        "theoretical_velocity_mps": _num(result.theoretical_velocity),
    }
    if geo is not None:
        out["geometry"] = {
            "leg_length_m": _num(geo.leg_length),
            "effective_length_m": _num(geo.effective_length),
            "apex_height_m": _num(geo.apex_height),
            "start_hip_frame_m": [_num(v) for v in geo.start],
            "end_hip_frame_m": [_num(v) for v in geo.end],
        }
    out["candidates"] = [
        {
            "duration_s": _num(tr.duration),
            "passed": tr.passed,
            "failure_reason": tr.failure_reason,
            "position_error_m": _num(tr.position_error),
            "max_velocity_error_mps": _num(tr.velocity_error),
            "max_kkt_residual": _num(tr.max_kkt_residual),
            "completed_steps": tr.solver_steps,
        }
        for tr in result.traces
    ]
    if config is not None:
        out["config"] = config
    out["metadata"] = {"package_version": __version__}
    return out


def write_result_json(path, result: FastResult, config: dict = None) -> Path:
    path = Path(path)
    path.write_text(json.dumps(result_to_dict(result, config), indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path


def trace_rows(result: FastResult):
    for tr in result.traces:
        for k, t in enumerate(tr.times):
            yield ([tr.duration, tr.passed, t] + list(tr.reference_positions[k]) + list(tr.foot_positions[k])
                   + list(tr.reference_velocities[k]) + list(tr.foot_velocities[k]))


def write_trace_csv(path, result: FastResult) -> Path:
    """Reference vs achieved foot states of every simulated candidate."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace_rows(result):
            w.writerow([_cell(x) for x in row])
    return path


def comparison_records(rows) -> list:
    out = []
    for row in rows:
        r: ComparisonRow = row
        res = r.result
        if res is None:
            status = "error"
        else:
            status = "ok" if res.achievable else "not_achievable"
        out.append({
            "model": r.label,
            "actuation_kind": r.kind,
            "fastest_time_s": None if res is None else _num(res.fastest_time),
            "swing_length_m": None if res is None else _num(res.swing_length),
            "theoretical_velocity_mps": None if res is None else _num(res.theoretical_velocity),
            "rank": r.rank,
            "status": status,
            "error": r.error,
        })
    return out


def write_comparison_csv(path, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        for rec in comparison_records(rows):
            w.writerow([_cell(rec[c]) for c in COMPARISON_COLUMNS])
    return path


def write_comparison_json(path, rows, config: dict = None) -> Path:
    doc = {"schema_version": SCHEMA_VERSION, "rows": comparison_records(rows)}
    if config is not None:
        doc["config"] = config
    doc["metadata"] = {"package_version": __version__}
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def velocity_profile_figure(result: FastResult):
    """Vertical foot velocity, reference vs achieved, for every candidate.

    Each candidate is plotted against normalized time t/T so profiles of
    different durations overlay; the passing candidate is emphasized.
    """
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib.figure import Figure

    fig = Figure(figsize=(7.0, 4.2))
    ax = fig.add_subplot(1, 1, 1)
    n = len(result.traces)
    for k, tr in enumerate(result.traces):
        s = tr.times / tr.duration
        if tr.passed:
            ax.plot(s, tr.reference_velocities[:, 2], color="black", lw=1.6, ls="--",
                    label=f"reference, T = {tr.duration:g} s")
            ax.plot(s, tr.foot_velocities[:, 2], color="tab:green", lw=1.8, label=f"achieved, T = {tr.duration:g} s")
        else:
            shade = 0.35 + 0.5 * (k / max(n - 1, 1))
            ax.plot(s, tr.foot_velocities[:, 2], color=(0.8, 0.3, 0.2, shade), lw=0.8,
                    label="achieved, failing candidates" if k == 0 else None)
    if result.passing_trace is None and result.traces:
        tr = result.traces[-1]
        ax.plot(tr.times / tr.duration, tr.reference_velocities[:, 2], color="black", lw=1.2, ls="--",
                label=f"reference, T = {tr.duration:g} s")
    ax.set_xlabel("normalized time t / T")
    ax.set_ylabel("vertical foot velocity (m/s)")
    title = result.model_name
    title += f": FAST = {result.fastest_time:g} s" if result.achievable else ": not achievable on the grid"
    ax.set_title(title)
    ax.grid(True, lw=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def write_velocity_svg(path, result: FastResult) -> Path:
    import matplotlib

    path = Path(path)
    fig = velocity_profile_figure(result)
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "fastbench", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path
