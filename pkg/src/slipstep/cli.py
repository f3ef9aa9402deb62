"""Command-line front end: run, validate, list-scenarios, export, serve.

Exit codes are scriptable: 0 success, 1 configuration or input error,
2 the character fell during a run. The default output directory comes
from SLIPSTEP_OUT_DIR when set, else ./out.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .harness import read_trace, run_scenario
from .scenario import ScenarioError, builtin_scenarios, get_scenario, with_seed

OUT_DIR_ENV = "SLIPSTEP_OUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FALLEN = 2


class CliError(Exception):
    """User-facing problem; message printed to stderr, exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 means "fell over" here, so route
    # bad flags through the config-error path instead
    def error(self, message: str):
        raise CliError(message)


def _speed(rec: dict) -> float:
    v = rec["vel"]
    return math.hypot(v[0], v[2])


def _step_kind(rec: dict) -> str:
    ev = rec["step_event"]
    return "" if ev is None else str(ev["kind"])


EXPORT_COLUMNS = {
    "time_s": lambda rec: f"{rec['time_s']:.9g}",
    "speed_mps": lambda rec: f"{_speed(rec):.9g}",
    "step": _step_kind,
    "ankle_force_n": lambda rec: f"{math.hypot(*rec['ankle_force_n']):.9g}",
}
DEFAULT_COLUMNS = "time_s,speed_mps,step,ankle_force_n"


def _default_out_dir() -> str:
    return os.environ.get(OUT_DIR_ENV, "out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slipstep", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run_p = sub.add_parser("run", help="run a scenario, write trace and summary")
    run_p.add_argument("--scenario", required=True,
                       help="built-in name or scenario file path")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario rng_seed")
    run_p.add_argument("--out", default=None,
                       help=f"output directory (default ${OUT_DIR_ENV} or ./out)")
    run_p.add_argument("--transient", type=float, default=3.0,
                       help="seconds excluded from the summary speed window")

    val_p = sub.add_parser("validate", help="check a scenario file without running it")
    val_p.add_argument("--scenario", required=True)

    sub.add_parser("list-scenarios", help="print the built-in scenario names")

    exp_p = sub.add_parser("export", help="emit a trace as plot-ready CSV")
    exp_p.add_argument("--trace", required=True, help="trace file from a run")
    exp_p.add_argument("--columns", default=DEFAULT_COLUMNS,
                       help=f"comma-separated subset of {sorted(EXPORT_COLUMNS)}")
    exp_p.add_argument("--out", default=None,
                       help="write CSV here instead of stdout")

    srv_p = sub.add_parser("serve", help="run one live session over a websocket")
    srv_p.add_argument("--scenario", default="flat-walk")
    srv_p.add_argument("--seed", type=int, default=None)
    srv_p.add_argument("--host", default="127.0.0.1")
    srv_p.add_argument("--port", type=int, default=8765)
    srv_p.add_argument("--frame-every", type=int, default=2,
                       help="broadcast every Nth tick (default 2: 50 Hz from 100 Hz)")
    srv_p.add_argument("--tape", default=None,
                       help="append accepted commands to this file for replay")

    return parser


def _cmd_run(args) -> int:
    scenario = get_scenario(args.scenario)
    if args.seed is not None:
        scenario = with_seed(scenario, args.seed)
    out_dir = Path(args.out if args.out is not None else _default_out_dir())
    try:
        result = run_scenario(scenario, out_dir=out_dir, transient_s=args.transient)
    except OSError as exc:
        raise CliError(f"cannot write outputs: {exc}") from exc
    summary = result.summary
    print(f"scenario {scenario.name}: {summary['ticks']} ticks, "
          f"{summary['step_count']} steps, "
          f"mean speed {summary['speed_mps']['mean']:.3f} m/s")
    print(f"trace: {result.trace_path}")
    print(f"summary: {result.summary_path}")
    if result.fell:
        print(f"FALLEN at t={summary['fall_time_s']:.2f} s")
        return EXIT_FALLEN
    return EXIT_OK


def _cmd_validate(args) -> int:
    scenario = get_scenario(args.scenario)
    print(f"ok: {scenario.name} ({scenario.duration_s:.1f} s, "
          f"{len(scenario.schedule)} schedule entries)")
    return EXIT_OK


def _cmd_list(_args) -> int:
    for name, scn in builtin_scenarios().items():
        print(f"{name:22s} {scn.duration_s:5.1f} s  "
              f"target {scn.controller.target_speed_mps:.1f} m/s  "
              f"{scn.terrain.kind.value}")
    return EXIT_OK


def _cmd_export(args) -> int:
    names = [c.strip() for c in args.columns.split(",") if c.strip()]
    if not names:
        raise CliError("no columns requested")
    unknown = [c for c in names if c not in EXPORT_COLUMNS]
    if unknown:
        raise CliError(
            f"unknown columns {unknown}; available: {sorted(EXPORT_COLUMNS)}"
        )
    try:
        records = read_trace(Path(args.trace))
    except OSError as exc:
        raise CliError(f"cannot read trace: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"corrupt trace: {exc}") from exc
    lines = [",".join(names)]
    try:
        for rec in records:
            lines.append(",".join(EXPORT_COLUMNS[c](rec) for c in names))
    except (KeyError, TypeError) as exc:
        raise CliError(f"corrupt trace: missing field {exc}") from exc
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot write CSV: {exc}") from exc
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .service import serve  # lazy: pulls in the ASGI stack

    scenario = get_scenario(args.scenario)
    if args.seed is not None:
        scenario = with_seed(scenario, args.seed)
    serve(
        scenario,
        host=args.host,
        port=args.port,
        frame_every=args.frame_every,
        tape_path=args.tape,
    )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "run": _cmd_run,
            "validate": _cmd_validate,
            "list-scenarios": _cmd_list,
            "export": _cmd_export,
            "serve": _cmd_serve,
        }[args.subcommand]
        return handler(args)
    except (CliError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
