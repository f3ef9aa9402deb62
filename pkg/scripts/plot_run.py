"""Render speed, COM height, and torque panels from a run.

Give either a built-in scenario name (it runs fresh) or --trace pointing at
an existing .trace.jsonl. Writes a single PNG.
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from slipstep.harness import read_trace, run_scenario
from slipstep.scenario import get_scenario


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenario", nargs="?", help="built-in name or scenario file")
    parser.add_argument("--trace", help="existing trace file instead of running")
    parser.add_argument("--out", default=None, help="output image path")
    args = parser.parse_args(argv)

    if args.trace:
        records = read_trace(Path(args.trace))
        title = Path(args.trace).name.replace(".trace.jsonl", "")
    elif args.scenario:
        scenario = get_scenario(args.scenario)
        records = run_scenario(scenario).records
        title = scenario.name
    else:
        parser.error("give a scenario name or --trace")

    t = [r["time_s"] for r in records]
    speed = [math.hypot(r["vel"][0], r["vel"][2]) for r in records]
    com_y = [r["com"][1] for r in records]
    torque = [r["torque_max_nm"] for r in records]
    steps = [r["time_s"] for r in records if r["step_event"] is not None]

    fig, axes = plt.subplots(3, 1, figsize=(10, 7), sharex=True)
    axes[0].plot(t, speed, lw=0.8)
    for ts in steps:
        axes[0].axvline(ts, color="0.85", lw=0.5, zorder=0)
    axes[0].set_ylabel("speed [m/s]")
    axes[1].plot(t, com_y, lw=0.8, color="tab:green")
    axes[1].set_ylabel("COM height [m]")
    axes[2].plot(t, torque, lw=0.8, color="tab:red")
    axes[2].set_ylabel("max |torque| [Nm]")
    axes[2].set_xlabel("time [s]")
    axes[0].set_title(f"{title}  ({len(records)} ticks, {len(steps)} steps)")
    fig.tight_layout()

    out = args.out or f"{title}.png"
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
