"""Command-line entry point.

    parapat run APP [--procs P] [--backend threads|sockets] [--seed S] [--out FILE] [app flags]
    parapat bench APP --procs-list 1,2,4 [--bench-csv FILE] [--out FILE] [app flags]

Exit status: 0 on success, 2 on a usage error, 1 on a runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import runners
from .apps import dmc, parabola, poisson
from .comm import BACKENDS
from .report import BENCH_SCHEMA, REPORT_SCHEMA, bench_csv, bench_table

log = logging.getLogger("parapat")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=BACKENDS, default="threads")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=30.0,
                   help="per-receive timeout in seconds (sockets backend)")
    p.add_argument("--out", metavar="FILE", help="write the JSON report here (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true")


def _app_flags(app: str, p: argparse.ArgumentParser) -> None:
    if app == "parabola":
        p.add_argument("--m", type=int, default=100)
        p.add_argument("--n", type=int, default=50)
        p.add_argument("--L", type=float, default=10.0)
        p.add_argument("--csv", metavar="FILE", help="write the selected (a, b) pairs")
    elif app == "idealpoint":
        p.add_argument("--legislators", type=int, default=50)
        p.add_argument("--votes", type=int, default=200)
        p.add_argument("--dims", type=int, default=1)
        p.add_argument("--iters", type=int, default=2000)
        p.add_argument("--burnin", type=int, default=500)
        p.add_argument("--thin", type=int, default=1)
        p.add_argument("--chains", type=int, default=4)
        p.add_argument("--data", metavar="CSV", help="roll-call CSV instead of synthetic votes")
    elif app == "dmc":
        p.add_argument("--walkers", type=int, default=1000)
        p.add_argument("--steps", type=int, default=200)
        p.add_argument("--tau", type=float, default=0.01)
        p.add_argument("--D", type=float, default=1.0)
        p.add_argument("--burnin", type=int, default=None, help="default: 20%% of --steps")
        p.add_argument("--timing", choices=("wall", "uniform"), default="wall",
                       help="task time fed to the load balancer")
        p.add_argument("--trace", metavar="FILE", help="write the per-step trace CSV")
    elif app == "poisson":
        p.add_argument("--nx", type=int, default=63)
        p.add_argument("--ny", type=int, default=None)
        p.add_argument("--overlap", type=int, default=4)
        p.add_argument("--threshold", type=float, default=1e-10)
        p.add_argument("--max-iter", type=int, default=1000)
        p.add_argument("--inner-tol", type=float, default=1e-10)
        p.add_argument("--field-csv", metavar="FILE", help="write the assembled solution")
    elif app == "sleep":
        p.add_argument("--tasks", type=int, default=1000)
        p.add_argument("--task-ms", type=float, default=10.0)


def _procs_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None
    if not values or values[0] != 1 or values != sorted(set(values)):
        raise argparse.ArgumentTypeError("procs list must be strictly ascending and start at 1")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parapat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("schema", help="print the report JSON schemas")
    for command in ("run", "bench"):
        cmd = sub.add_parser(command, help=f"{command} an application")
        apps = cmd.add_subparsers(dest="app", required=True)
        for app in runners.APPS:
            ap = apps.add_parser(app)
            _common(ap)
            if command == "run":
                ap.add_argument("--procs", type=int, default=1)
            else:
                ap.add_argument("--procs-list", type=_procs_list, default=[1, 2, 4])
                ap.add_argument("--bench-csv", metavar="FILE",
                                help="write the speedup table as CSV")
            _app_flags(app, ap)
    return parser


_OUTPUT_FLAGS = {"csv", "trace", "field_csv", "bench_csv"}
_NOT_PARAMS = {"command", "app", "backend", "seed", "timeout", "out", "verbose", "procs",
               "procs_list"} | _OUTPUT_FLAGS


def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _NOT_PARAMS}


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_side_outputs(args, report) -> None:
    res = report.results
    if args.app == "parabola" and args.csv:
        parabola.write_ab_csv(args.csv, res["ab"])
    if args.app == "dmc" and args.trace:
        t = res["trace"]
        trace = [dmc.Observation(n, v, e) for n, v, e in zip(t["population"], t["meanV"], t["E_T"])]
        dmc.write_trace_csv(args.trace, trace)
    if args.app == "poisson" and args.field_csv:
        poisson.write_field_csv(args.field_csv, res["field"])


def _validate(parser, args) -> None:
    if getattr(args, "procs", 1) < 1:
        parser.error("--procs must be positive")
    if args.timeout <= 0:
        parser.error("--timeout must be positive")
    procs = [args.procs] if args.command == "run" else args.procs_list
    try:
        for p in procs:
            runners.validate(args.app, _params(args), p)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "schema":
        print(json.dumps({"report": REPORT_SCHEMA, "bench": BENCH_SCHEMA}, indent=2))
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _validate(parser, args)
    params = _params(args)
    procs = [args.procs] if args.command == "run" else args.procs_list
    reports = []
    try:
        for p in procs:
            reports.append(runners.run_app(args.app, params, p, args.backend, args.seed, args.timeout))
            log.info("%s on %d rank(s): %.3f s", args.app, p, reports[-1].elapsed)
    except Exception as exc:  # noqa: BLE001 - any failure is reported, not traced
        print(f"parapat: error: {exc}", file=sys.stderr)
        details = getattr(exc, "details", "")
        if details and args.verbose:
            print(details, file=sys.stderr)
        return 1

    if args.command == "run":
        report = reports[0]
        if report.ranks == 1:
            report.set_baseline(report.elapsed)
        _write_side_outputs(args, report)
        _emit(report.to_json() + "\n", args.out)
        return 0
    rows = bench_table(reports)
    table = {"app": args.app, "backend": args.backend, "params": params, "rows": rows}
    if args.bench_csv:
        _emit(bench_csv(rows), args.bench_csv)
    _emit(json.dumps(table, indent=2) + "\n", args.out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
