"""Run every built-in scenario and print a one-line summary for each.

Traces and summaries land in --out (default ./runs). Exit code is nonzero
if any scenario ends FALLEN, so this doubles as a smoke gate.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from slipstep.harness import run_scenario
from slipstep.scenario import builtin_scenarios, with_seed


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override every scenario seed")
    parser.add_argument("--only", action="append", default=None, help="run only this scenario (repeatable)")
    args = parser.parse_args(argv)

    pack = builtin_scenarios()
    names = args.only if args.only else list(pack)
    unknown = [n for n in names if n not in pack]
    if unknown:
        print(f"unknown scenario(s): {', '.join(unknown)}", file=sys.stderr)
        return 1

    out = Path(args.out)
    fell = []
    for name in names:
        scenario = pack[name]
        if args.seed is not None:
            scenario = with_seed(scenario, args.seed)
        res = run_scenario(scenario, out_dir=out)
        s = res.summary
        line = (
            f"{name:24s} ticks={s['ticks']:6d} "
            f"mean={s['speed_mps']['mean']:5.2f} m/s steps={s['step_count']:3d} "
            f"tau_max={s['torque_max_nm']:6.1f} Nm p99={s['compute_us']['p99']:7.1f} us"
        )
        if s["fall_time_s"] is not None:
            line += f"  FALLEN at {s['fall_time_s']:.2f} s"
            fell.append(name)
        print(line)
    print(f"wrote traces to {out}/")
    return 1 if fell else 0


if __name__ == "__main__":
    raise SystemExit(main())
