"""Command line harness.

    telelink run <scenario> [--seed N] [--out DIR]
    telelink checks [scenario] [--warmup S]
    telelink serve <scenario> [--bind ADDR:PORT] [--speed F] [--seed N]

Exit codes are the contract: 0 success, 1 failed expectations or a no-go
check verdict, 2 usage/config errors.  ``TELELINK_CONFIG`` supplies the
scenario path when the argument is omitted.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError
from .scenario import ScenarioInvalid, ScenarioRun, load_scenario, write_report
from .sysmon import Verdict, aggregate, format_check_table

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

DEFAULT_BIND = "127.0.0.1:8000"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="telelink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write metrics")
    p_run.add_argument("scenario", help="scenario file path")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", default="out", help="output directory (metrics.json/csv, transitions.log)")

    p_checks = sub.add_parser("checks", help="run the health checks against a scenario fixture")
    p_checks.add_argument("scenario", nargs="?", default=None, help="scenario file (or $TELELINK_CONFIG)")
    p_checks.add_argument("--warmup", type=float, default=3.0, help="simulated warmup seconds before checking")
    p_checks.add_argument("--allow-warn", action="store_true", help="treat warnings as go")

    p_serve = sub.add_parser("serve", help="serve the live feed and control endpoint")
    p_serve.add_argument("scenario", nargs="?", default=None, help="scenario file (or $TELELINK_CONFIG)")
    p_serve.add_argument("--bind", default=DEFAULT_BIND, help="address:port to bind")
    p_serve.add_argument("--speed", type=float, default=1.0, help="pacing factor (sim seconds per wall second)")
    p_serve.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_serve.add_argument("--static", default=None, help="directory of dashboard assets to serve at /")
    return parser


def _scenario_path(arg: str | None) -> Path | None:
    if arg:
        return Path(arg)
    env = os.environ.get("TELELINK_CONFIG")
    return Path(env) if env else None


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        report = ScenarioRun(scenario, seed=args.seed).run()
    except (ScenarioInvalid, ConfigError) as exc:
        print(f"telelink run: {exc}", file=sys.stderr)
        return EXIT_USAGE
    paths = write_report(report, args.out)
    for label, path in paths.items():
        print(f"wrote {label}: {path}")
    failed = [e for e in report["expects"] if not e["ok"]]
    for entry in failed:
        print(f"expect failed: {entry['expr']} (actual: {entry['actual']})", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_checks(args) -> int:
    path = _scenario_path(args.scenario)
    if path is None:
        print("telelink checks: no scenario given and TELELINK_CONFIG unset", file=sys.stderr)
        return EXIT_USAGE
    try:
        scenario = load_scenario(path)
        run = ScenarioRun(scenario)
    except (ScenarioInvalid, ConfigError) as exc:
        print(f"telelink checks: {exc}", file=sys.stderr)
        return EXIT_USAGE
    warmup_ns = int(args.warmup * 1e9)
    if warmup_ns > 0:
        run.sim.step(warmup_ns)
    results = run.registry.tick(run.sim.now_ns)
    print(format_check_table(results))
    if not results:
        print("warning: no checks registered; go verdict is vacuous", file=sys.stderr)
        return EXIT_OK
    verdict = aggregate(results, warn_is_nogo=not args.allow_warn)
    print(f"verdict: {verdict.value}")
    return EXIT_OK if verdict is Verdict.GO else EXIT_FAILED


def cmd_serve(args) -> int:
    path = _scenario_path(args.scenario)
    if path is None:
        print("telelink serve: no scenario given and TELELINK_CONFIG unset", file=sys.stderr)
        return EXIT_USAGE
    try:
        scenario = load_scenario(path)
    except (ScenarioInvalid, ConfigError) as exc:
        print(f"telelink serve: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        host, port_text = args.bind.rsplit(":", 1)
        port = int(port_text)
    except ValueError:
        print(f"telelink serve: bad --bind {args.bind!r}, expected addr:port", file=sys.stderr)
        return EXIT_USAGE

    import uvicorn

    from .service import SimSession, create_app

    session = SimSession(scenario, speed=args.speed, seed=args.seed)
    static_dir = Path(args.static) if args.static else _default_static_dir()
    app = create_app(session, static_dir=static_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"telelink serve: bind failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def _default_static_dir() -> Path | None:
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "checks":
        return cmd_checks(args)
    if args.command == "serve":
        return cmd_serve(args)
    return EXIT_USAGE


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
