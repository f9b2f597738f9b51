#!/usr/bin/env python3
"""
TwinMon - Digital-twin runtime verification for a differential-drive robot.

Entry point for the command-line harness.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional

from app import __app_name__, __version__
from app.core.settings import Settings
from app.harness import (
    ReplayError,
    check,
    compare,
    parse_assignments,
    parse_seeds,
    replay,
    replay_to_twin,
    run_experiment,
)
from app.monitors import MonitorError
from app.sim import Scenario, ScenarioError
from app.stream import SpecError, StreamRuntimeError
from app.twin import EventStore, TransportError, create_transport, run_service

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_ACCEPTANCE = 3

logger = logging.getLogger(__name__)


def setup_logging(debug: bool = False):
    """Configure logging."""
    level = logging.DEBUG if debug else logging.INFO

    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%H:%M:%S",
    )

    # Reduce noise from external libraries
    logging.getLogger("paho").setLevel(logging.WARNING)


def load_settings(args: argparse.Namespace) -> Settings:
    settings = Settings.load(Path(args.config)) if args.config else Settings.load()
    if getattr(args, "broker", None):
        settings.broker_url = args.broker
    if getattr(args, "preset", None):
        settings.apply_preset(args.preset)
    if getattr(args, "backend", None):
        settings.monitor_backend = args.backend
    settings.validate()
    return settings


def cmd_check(args: argparse.Namespace) -> int:
    output = check(Path(args.spec), Path(args.trace), parse_assignments(args.set or []))
    if output:
        print(output)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    settings = load_settings(args)
    if settings.broker_url.startswith("memory://"):
        log_path = Path(args.log) if args.log else settings.resolved_log_path()
        report, status = replay_to_twin(Path(args.source), settings, EventStore(log_path),
                                        args.rate)
        print(f"sent {report.sent} states, {report.verdicts} verdicts, "
              f"{status.dead_letters} dead letters (log: {log_path})")
        return EXIT_OK

    transport = create_transport(settings)
    transport.connect()
    try:
        report = replay(Path(args.source), transport, settings.topic_config(), args.rate)
        # Verdicts still in flight when the last state leaves
        time.sleep(settings.verdict_timeout)
    finally:
        transport.disconnect()
    print(f"sent {report.sent} states, {report.verdicts} verdicts")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    settings = load_settings(args)
    scenario = Scenario.load(Path(args.scenario))
    result = run_experiment(scenario, args.mode, args.seed,
                            Path(args.out) if args.out else None, settings)
    summary = result.summary()
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    settings = load_settings(args)
    scenario = Scenario.load(Path(args.scenario))
    seeds = parse_seeds(args.seeds) if args.seeds else [scenario.seed]
    comparison = compare(scenario, seeds, Path(args.out) if args.out else None, settings)
    print(comparison.to_table())
    if args.assert_reduction is not None:
        threshold = args.assert_reduction / 100.0
        if comparison.mean_reduction < threshold:
            print(f"mean reduction {comparison.mean_reduction:.1%} below "
                  f"{args.assert_reduction:g}%", file=sys.stderr)
            return EXIT_ACCEPTANCE
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    settings = load_settings(args)
    if args.status_port is not None:
        settings.status_port = args.status_port
    if args.log:
        settings.log_path = args.log
    settings.validate()
    run_service(settings)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twinmon", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"{__app_name__} {__version__}")
    parser.add_argument("--debug", action="store_true", help="verbose logging")
    parser.add_argument("--config", help="settings file (.json or .yaml)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run a trace through a spec offline")
    p.add_argument("spec")
    p.add_argument("trace")
    p.add_argument("--set", action="append", metavar="NAME=VALUE",
                   help="override a constant definition")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("replay", help="publish recorded states as a mock robot")
    p.add_argument("source", help="replay CSV or twin log (.jsonl)")
    p.add_argument("--rate", type=float, default=0.0, help="pacing multiplier, 0 = no pacing")
    p.add_argument("--broker", help="broker URL; memory:// runs an in-process twin")
    p.add_argument("--log", help="twin log of the in-process twin")
    p.add_argument("--preset", help="monitor preset")
    p.set_defaults(func=cmd_replay)

    for name, func, text in (("experiment", cmd_experiment, "run one scenario in one mode"),
                             ("compare", cmd_compare, "run both modes and compare MSE")):
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario", help="scenario YAML")
        p.add_argument("--out", help="output directory")
        p.add_argument("--broker", help="broker URL for the twin link")
        p.add_argument("--backend", choices=("direct", "stream"), help="P2 monitor backend")
        p.set_defaults(func=func)
        if name == "experiment":
            p.add_argument("--mode", choices=("default", "augmented"), default="default")
            p.add_argument("--seed", type=int)
        else:
            p.add_argument("--seed", "--seeds", dest="seeds", help="seed, range 1-10 or list 1,4,7")
            p.add_argument("--assert-reduction", type=float, metavar="PERCENT",
                           help="exit 3 unless the mean MSE reduction reaches PERCENT")

    p = sub.add_parser("serve", help="run the twin service")
    p.add_argument("--broker", help="broker URL")
    p.add_argument("--status-port", type=int, help="plain-text status endpoint port, 0 = off")
    p.add_argument("--log", help="twin log path")
    p.add_argument("--preset", help="monitor preset")
    p.add_argument("--backend", choices=("direct", "stream"), help="P2 monitor backend")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse reports usage errors with 2
        return EXIT_USAGE if e.code == 2 else int(e.code or 0)

    setup_logging(args.debug)
    logger.debug(f"Starting {__app_name__} v{__version__}")

    try:
        return args.func(args)
    except ReplayError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME if isinstance(e.__cause__, TransportError) else EXIT_USAGE
    except (SpecError, ScenarioError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (StreamRuntimeError, MonitorError, TransportError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
