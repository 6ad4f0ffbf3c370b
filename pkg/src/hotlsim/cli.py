"""Command-line entry point: run missions, replay logs, print reports."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import gateway
from .errors import HotlError
from .sim_world import load_scenario


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    record = args.record or gateway.default_log_path(scenario)
    runner = gateway.MissionRunner(scenario, ticks=args.ticks, record_path=record)
    server = None
    if args.serve:
        server = gateway.serve(runner, args.serve)
        print(f"gateway listening on {args.serve}", file=sys.stderr)
    try:
        runner.run(tick_ms=args.tick_ms)
    finally:
        if server is not None:
            server.shutdown()
    print(f"mission complete: {runner.envelope_count()} envelopes over "
          f"{min(runner.ticks, runner.world.next_tick)} ticks")
    if record:
        print(f"log written to {record}")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    if args.serve:
        runner = gateway.replay_runner(args.log)
        server = gateway.serve(runner, args.serve)
        print(f"paced replay on {args.serve}", file=sys.stderr)
        try:
            runner.run(tick_ms=args.tick_ms)
        finally:
            server.shutdown()
        return 0
    result = gateway.replay(args.log)
    if result.ok:
        print(f"replay pass: {result.envelopes_checked} envelopes regenerated byte-identical")
        return 0
    print(f"replay FAIL at seq {result.first_divergent_seq}: {result.reason}")
    return 1


def _cmd_report(args: argparse.Namespace) -> int:
    print(gateway.format_report(gateway.report(args.log)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hotlsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a mission from a scenario file")
    run.add_argument("--scenario", required=True, help="path to a .scenario.json file")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--ticks", type=int, default=None, help="override ticks_max")
    run.add_argument("--serve", default=None, metavar="ADDR",
                     help="expose the gateway on host:port while running")
    run.add_argument("--tick-ms", type=int, default=0, dest="tick_ms",
                     help="wall-clock pacing per tick (0 = as fast as possible)")
    run.add_argument("--record", default=None, help="write the event log to this file "
                     "(default: $HOTL_LOG_DIR/<name>-seed<seed>.jsonl when set)")
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser("replay", help="verify a recorded log regenerates byte-identically")
    rep.add_argument("--log", required=True)
    rep.add_argument("--serve", default=None, metavar="ADDR",
                     help="serve a paced re-run for debrief instead of verifying")
    rep.add_argument("--tick-ms", type=int, default=100, dest="tick_ms")
    rep.set_defaults(func=_cmd_replay)

    rpt = sub.add_parser("report", help="summarize a recorded log")
    rpt.add_argument("--log", required=True)
    rpt.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HotlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
