"""Deterministic scenario runner: trace files, summaries, compute timing.

run_scenario drives one SteppingEngine tick loop to completion and captures
every trace record. The trace file holds exactly what the engine recorded,
one JSON object per line in a fixed key order, so two runs of the same
scenario produce byte-identical files. Wall-clock timing never enters the
trace; it lives in the summary, which is allowed to differ between runs.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from .engine import SteppingEngine, TRACE_SCHEMA_VERSION
from .scenario import Scenario

SUMMARY_SCHEMA_VERSION = 1

# a disturbance counts as absorbed by sway only if no step lands between
# its onset and this long after it ends
SWAY_SETTLE_WINDOW_S = 1.0


@dataclass(frozen=True)
class RunResult:
    scenario_name: str
    records: list[dict]
    summary: dict
    trace_path: Path | None = None
    summary_path: Path | None = None

    @property
    def fell(self) -> bool:
        return self.summary.get("fall_time_s") is not None


def _percentile_us(sorted_ns: list[int], q: float) -> float:
    """Nearest-rank percentile, reported in microseconds."""
    if not sorted_ns:
        return 0.0
    rank = max(1, math.ceil(q / 100.0 * len(sorted_ns)))
    return sorted_ns[rank - 1] / 1000.0


def _force_episodes(records: list[dict]) -> list[tuple[float, float]]:
    """Contiguous spans of nonzero external force, as (start, end) times."""
    spans: list[tuple[float, float]] = []
    open_start: float | None = None
    last_t = 0.0
    for rec in records:
        f = rec["external_force_n"]
        active = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]) > 1e-12
        t = rec["time_s"]
        if active and open_start is None:
            open_start = t
        elif not active and open_start is not None:
            spans.append((open_start, t))
            open_start = None
        last_t = t
    if open_start is not None:
        spans.append((open_start, last_t))
    return spans


def sway_recovery_count(records: list[dict]) -> int:
    """Disturbance episodes ridden out with zero steps and no fall."""
    step_times = [r["time_s"] for r in records if r["step_event"] is not None]
    fall_times = [r["time_s"] for r in records if r["fallen"]]
    count = 0
    for start, end in _force_episodes(records):
        horizon = end + SWAY_SETTLE_WINDOW_S
        if any(start <= t <= horizon for t in step_times):
            continue
        if any(start <= t <= horizon for t in fall_times):
            continue
        count += 1
    return count


def summarize(
    records: list[dict],
    scenario_name: str = "",
    transient_s: float = 3.0,
    compute_ns: list[int] | None = None,
) -> dict:
    """Speed window stats, step counts, fall time, compute percentiles.

    The speed window starts after the transient; if the run is shorter than
    the transient the window falls back to the whole run so short scenarios
    still report a number.
    """
    if not records:
        return {
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "scenario": scenario_name,
            "empty": True,
            "ticks": 0,
        }
    speeds = []
    for rec in records:
        if rec["time_s"] < transient_s:
            continue
        v = rec["vel"]
        speeds.append(math.hypot(v[0], v[2]))
    if not speeds:
        for rec in records:
            v = rec["vel"]
            speeds.append(math.hypot(v[0], v[2]))
    fall_time = next((r["time_s"] for r in records if r["fallen"]), None)
    timing = sorted(compute_ns) if compute_ns else []
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "scenario": scenario_name,
        "ticks": len(records),
        "duration_s": records[-1]["time_s"],
        "transient_s": transient_s,
        "speed_mps": {
            "mean": sum(speeds) / len(speeds),
            "min": min(speeds),
            "max": max(speeds),
        },
        "step_count": sum(1 for r in records if r["step_event"] is not None),
        "sway_recovery_count": sway_recovery_count(records),
        "fall_time_s": fall_time,
        "torque_max_nm": max(r["torque_max_nm"] for r in records),
        "compute_us": {
            "p50": _percentile_us(timing, 50.0),
            "p99": _percentile_us(timing, 99.0),
            "max": timing[-1] / 1000.0 if timing else 0.0,
        },
    }


def trace_line(record: dict) -> str:
    """One trace record as its canonical serialized line."""
    return json.dumps(record, separators=(",", ":"), allow_nan=False)


def write_trace(records: list[dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(trace_line(rec))
            f.write("\n")


def read_trace(path: Path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def run_scenario(
    scenario: Scenario,
    out_dir: str | Path | None = None,
    transient_s: float = 3.0,
) -> RunResult:
    """Run to duration or FALLEN; optionally write trace and summary files.

    Records are exactly the engine's, in tick order, FALLEN absorbing.
    Compute time is measured around each engine step and reported only in
    the summary.
    """
    engine = SteppingEngine(scenario)
    records: list[dict] = []
    compute_ns: list[int] = []
    while engine.time_s < scenario.duration_s - 1e-12 and not engine.fallen:
        t0 = time.perf_counter_ns()
        rec = engine.step()
        compute_ns.append(time.perf_counter_ns() - t0)
        records.append(rec)
    summary = summarize(
        records,
        scenario_name=scenario.name,
        transient_s=transient_s,
        compute_ns=compute_ns,
    )
    trace_path = summary_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        trace_path = out / f"{scenario.name}.trace.jsonl"
        summary_path = out / f"{scenario.name}.summary.json"
        write_trace(records, trace_path)
        with open(summary_path, "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2)
            f.write("\n")
    return RunResult(
        scenario_name=scenario.name,
        records=records,
        summary=summary,
        trace_path=trace_path,
        summary_path=summary_path,
    )
