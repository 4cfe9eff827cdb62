"""Command line front end: run scenarios, inspect them, dump depth frames.

Exit codes: 0 on success, 1 when a scenario fails to load, 2 when a run
finished but hit the emergency stop at least once, 64 for usage errors.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from tpik.perception.pipeline import render_depth, robot_link_boxes, write_pgm
from tpik.scenario_io import ScenarioLoadError, load_builtin, load_scenario
from tpik.sim import Scenario, run

EXIT_OK = 0
EXIT_LOAD = 1
EXIT_EMERGENCY = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which collides with the emergency code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tpik", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="simulate a scenario file and write the tick log")
    p_run.add_argument("scenario", help="path to a scenario TOML file")
    p_run.add_argument("--out", required=True, help="CSV file to write")

    for name in ("case1", "case2"):
        p_case = sub.add_parser(name, help=f"simulate the bundled {name} scenario")
        p_case.add_argument("--out", required=True, help="CSV file to write")

    p_val = sub.add_parser("validate", help="load a scenario and print its task table")
    p_val.add_argument("scenario", help="path to a scenario TOML file")

    p_dump = sub.add_parser("dump-depth", help="write the camera depth frame at a given time")
    p_dump.add_argument("scenario", help="path to a scenario TOML file")
    p_dump.add_argument("--t", type=float, default=0.0, help="simulation time in seconds")
    p_dump.add_argument("--out", required=True, help="PGM file to write")

    return parser


def _run_to_csv(scenario: Scenario, out_path: str) -> int:
    log = run(scenario)
    log.write_csv(out_path)
    ticks = len(log.rows)
    emergencies = int(log.column("emerg").sum())
    print(f"{scenario.name}: {ticks} ticks -> {out_path}")
    if emergencies:
        print(f"emergency stop on {emergencies} tick(s)", file=sys.stderr)
        return EXIT_EMERGENCY
    return EXIT_OK


def _validate(scenario: Scenario) -> int:
    print(f"scenario {scenario.name!r}: {scenario.duration:g} s at "
          f"{scenario.control_hz:g}/{scenario.perception_hz:g} Hz, "
          f"{scenario.perception_mode}, {len(scenario.obstacles)} obstacle(s), "
          f"{len(scenario.waypoints)} waypoint(s)")
    rows = []
    for rank, spec in enumerate(scenario.tasks, start=1):
        if spec.is_set_based:
            bounds = f"[{spec.thresholds.safety_lower:g}, {spec.thresholds.safety_upper:g}]"
        else:
            bounds = "-"
        rows.append((str(rank), spec.label, spec.kind, spec.group,
                     f"{spec.gain:g}", bounds))
    header = ("#", "label", "kind", "group", "gain", "valid range")
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]
    for row in [header] + rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return EXIT_OK


def _dump_depth(scenario: Scenario, t: float, out_path: str) -> int:
    if t < 0.0 or t > scenario.duration:
        print(f"time {t:g} outside [0, {scenario.duration:g}]", file=sys.stderr)
        return EXIT_USAGE
    if t == 0.0:
        q = scenario.q0
    else:
        log = run(scenario)
        tick = min(int(round(t * scenario.control_hz)), len(log.rows) - 1)
        q = np.array([log.column(f"q{j}")[tick] for j in range(1, scenario.model.n + 1)])
    prims = [s.primitive_at(t) for s in scenario.obstacles]
    prims += robot_link_boxes(scenario.model, q)
    image = render_depth(prims, scenario.camera, quantize_mm=scenario.quantize_mm)
    write_pgm(image, out_path)
    print(f"{scenario.name}: depth frame at t={t:g} -> {out_path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("case1", "case2"):
            scenario = load_builtin(args.command)
        else:
            scenario = load_scenario(args.scenario)
    except ScenarioLoadError as exc:
        print(f"tpik: {exc}", file=sys.stderr)
        return EXIT_LOAD

    if args.command in ("run", "case1", "case2"):
        return _run_to_csv(scenario, args.out)
    if args.command == "validate":
        return _validate(scenario)
    return _dump_depth(scenario, args.t, args.out)


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
