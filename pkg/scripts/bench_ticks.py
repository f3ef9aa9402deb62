"""Per-tick compute cost over one scenario (default: push-storm).

Prints the percentile table the performance budget is judged against and
an overall ticks-per-second figure.
"""

from __future__ import annotations

import argparse
import time

from slipstep.engine import SteppingEngine
from slipstep.scenario import get_scenario, with_seed


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenario", nargs="?", default="push-storm")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--repeat", type=int, default=1, help="average over N runs")
    args = parser.parse_args(argv)

    scenario = get_scenario(args.scenario)
    if args.seed is not None:
        scenario = with_seed(scenario, args.seed)

    samples_ns: list[int] = []
    wall = 0.0
    for _ in range(max(1, args.repeat)):
        engine = SteppingEngine(scenario)
        t_run = time.perf_counter()
        while engine.time_s < scenario.duration_s - 1e-12 and not engine.fallen:
            t0 = time.perf_counter_ns()
            engine.step()
            samples_ns.append(time.perf_counter_ns() - t0)
        wall += time.perf_counter() - t_run

    samples_ns.sort()
    n = len(samples_ns)

    def pct(p: float) -> float:
        rank = max(1, min(n, round(p / 100.0 * n)))
        return samples_ns[rank - 1] / 1000.0

    print(f"{scenario.name}: {n} ticks over {args.repeat} run(s)")
    for p in (50, 90, 99, 99.9):
        print(f"  p{p:<5} {pct(p):9.1f} us")
    print(f"  max   {samples_ns[-1] / 1000.0:9.1f} us")
    print(f"  rate  {n / wall:9.0f} ticks/s ({n / wall / 100.0:.0f}x real time)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
