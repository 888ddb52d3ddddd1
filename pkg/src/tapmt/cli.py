"""Command-line interface.

Exit status: 0 success, 1 metamorphic violations found (``mt-run``),
2 usage or input errors. Every run ends with a one-line summary on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import TapError
from .external import ExternalEngine
from .harmonic import (
    REFERENCE,
    ConstituentSet,
    FitConfig,
    analyze,
    predict,
    read_csv,
    read_solution,
    write_csv,
    write_solution,
)
from .metamorphic import APPEND_MODES, CampaignReport, MRId, Tolerance, run_campaign
from .mutants import get_mutant, list_mutants, mutation_campaign
from .signals import SyntheticSpec, generate, random_campaign_spec

EXIT_OK, EXIT_VIOLATIONS, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def _campaign_flags(p):
    p.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
    p.add_argument("--cases", type=_positive_int, default=100, help="number of source cases (default 100)")
    p.add_argument("--mrs", default="all", help="comma-separated relations, e.g. MR1,MR4 (default all)")
    p.add_argument("--tolerance", type=_positive_float, default=0.01,
                   help="absolute tolerance per quantity, native units (default 0.01)")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out", default=None, help="directory for report files")
    p.add_argument("--format", choices=("json", "table"), default="table", help="stdout format")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tapmt", description="Tidal harmonic analysis with metamorphic testing.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic series as CSV")
    p.add_argument("spec", nargs="?", help="spec JSON file; omitted: draw a random campaign spec")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", default="-", help="CSV path (default stdout)")
    p.add_argument("--write-spec", help="also write the spec used as JSON")

    p = sub.add_parser("analyze", help="fit a CSV series, write a solution JSON")
    p.add_argument("series")
    p.add_argument("--constituents", default="M2")
    p.add_argument("--no-trend", action="store_true")
    p.add_argument("--min-conditioning", type=float, default=1e-10)
    p.add_argument("--out", default="-")

    p = sub.add_parser("predict", help="evaluate a solution JSON at given times")
    p.add_argument("solution")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--times", help="CSV with a time_hours column")
    g.add_argument("--count", type=_positive_int)
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--step", type=_positive_float, default=1.0)
    p.add_argument("--out", default="-")

    p = sub.add_parser("mt-run", help="run a metamorphic testing campaign")
    _campaign_flags(p)
    p.add_argument("--engine-cmd", help="external engine command line (default: in-process engine)")
    p.add_argument("--timeout-s", type=_positive_float, default=30.0)
    p.add_argument("--persistent", action="store_true", help="keep one external process per run")
    p.add_argument("--append-mode", choices=APPEND_MODES, default="next")
    p.add_argument("--strict-mr2", action="store_true", help="also require MR2 phase + 180")

    p = sub.add_parser("mutants", help="mutant catalog and mutation analysis")
    msub = p.add_subparsers(dest="mutants_command", required=True)
    pl = msub.add_parser("list")
    pl.add_argument("--format", choices=("json", "table"), default="table")
    pr = msub.add_parser("run")
    _campaign_flags(pr)
    pr.add_argument("--probes", type=_positive_int, default=20, help="equivalence-filter probes")
    pr.add_argument("--mutants", help="comma-separated ids (default: whole catalog)")
    pr.add_argument("--crash-kills", action="store_true", help="count engine crashes as kills")

    p = sub.add_parser("report", help="render a saved report JSON")
    p.add_argument("report")
    p.add_argument("--format", choices=("json", "table"), default="table")
    return parser


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _write_reports(out_dir, stem, json_text, table_text):
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    _emit(json_text, os.path.join(out_dir, f"{stem}.json"))
    _emit(table_text, os.path.join(out_dir, f"{stem}.txt"))


def cmd_gen(args):
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = SyntheticSpec.from_json(fh.read())
    else:
        spec = random_campaign_spec(args.seed)
    series = generate(spec, args.seed)
    if args.write_spec:
        _emit(spec.to_json(), args.write_spec)
    if args.out == "-":
        write_csv(series, sys.stdout)
    else:
        write_csv(series, args.out)
    return EXIT_OK, f"wrote {len(series)} samples"


def cmd_analyze(args):
    series = read_csv(args.series)
    constituents = ConstituentSet.from_names(n.strip() for n in args.constituents.split(",") if n.strip())
    config = FitConfig(include_trend=not args.no_trend, min_conditioning=args.min_conditioning)
    sol = analyze(series, constituents, config)
    if args.out == "-":
        _emit(json.dumps(sol.to_dict(), indent=2), None)
    else:
        write_solution(sol, args.out)
    return EXIT_OK, f"fitted {len(constituents)} constituent(s) to {len(series)} samples"


def cmd_predict(args):
    sol = read_solution(args.solution)
    if args.times:
        times = _read_times(args.times)
    else:
        times = args.start + args.step * np.arange(args.count, dtype=float)
    series = predict(sol, times)
    if args.out == "-":
        write_csv(series, sys.stdout)
    else:
        write_csv(series, args.out)
    return EXIT_OK, f"predicted {len(series)} samples"


def _read_times(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split(",")[0].strip() != "time_hours":
        raise TapError(f"{path}: line 1: expected a header starting with time_hours")
    times = []
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            times.append(float(line.split(",")[0]))
        except ValueError:
            raise TapError(f"{path}: line {no}: non-numeric time") from None
    return times


def cmd_mt_run(args):
    mrs = MRId.parse(args.mrs)
    tol = Tolerance.uniform(args.tolerance)
    engine = REFERENCE
    if args.engine_cmd:
        engine = ExternalEngine(args.engine_cmd, args.timeout_s, persistent=args.persistent)
    workers = 1 if getattr(engine, "persistent", False) else args.workers
    try:
        report = run_campaign(engine, mrs, args.cases, args.seed, tol, workers,
                              args.append_mode, args.strict_mr2)
    finally:
        if isinstance(engine, ExternalEngine):
            engine.close()
    table = report.to_table()
    _write_reports(args.out, "report", report.to_json(), table)
    _emit(report.to_json() if args.format == "json" else table, None)
    totals = report.totals()
    inconclusive = sum(t["inconclusive"] for t in totals.values())
    summary = (f"{report.violations} violation(s), {inconclusive} inconclusive, "
               f"{report.skipped} skipped case(s) over {report.n_cases} cases")
    return (EXIT_VIOLATIONS if report.violations else EXIT_OK), summary


def cmd_mutants(args):
    if args.mutants_command == "list":
        catalog = list_mutants()
        if args.format == "json":
            _emit(json.dumps([m.to_dict() for m in catalog], indent=1), None)
        else:
            w = max(len(m.id) for m in catalog) + 2
            rows = [f"{m.id.ljust(w)}{m.category.ljust(18)}{m.description}" for m in catalog]
            _emit("\n".join(rows), None)
        return EXIT_OK, f"{len(catalog)} mutants"
    mutants = None
    if args.mutants:
        mutants = [get_mutant(m.strip()) for m in args.mutants.split(",") if m.strip()]
    result = mutation_campaign(
        mutants, MRId.parse(args.mrs), args.cases, args.seed,
        Tolerance.uniform(args.tolerance), args.probes, args.workers, args.crash_kills,
    )
    table = result.to_table()
    _write_reports(args.out, "mutation", result.to_json(), table)
    _emit(result.to_json() if args.format == "json" else table, None)
    sc = result.score
    return EXIT_OK, f"{sc.union_killed}/{sc.n_mutants} non-equivalent mutants killed"


def cmd_report(args):
    with open(args.report, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TapError(f"{args.report}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
    if args.format == "json":
        _emit(json.dumps(doc, indent=1), None)
        return EXIT_OK, "report rendered"
    if "kill_matrix" in doc:
        text = _mutation_table(doc)
    elif "cases" in doc:
        text = CampaignReport.from_dict(doc).to_table()
    else:
        raise TapError(f"{args.report}: not a campaign or mutation report")
    _emit(text, None)
    return EXIT_OK, "report rendered"


def _mutation_table(doc):
    km = doc["kill_matrix"]
    mrs = km["mrs"]
    ms = doc["mutation_score"]
    lines = ["mutant".ljust(24) + "category".ljust(18) + "".join(m.rjust(6) for m in mrs)]
    for row in km["rows"]:
        lines.append(row["id"].ljust(24) + row["category"].ljust(18)
                     + "".join(str(row["kills"][m]).rjust(6) for m in mrs))
    lines.append("MS".ljust(42) + "".join(f"{ms['score_percent'][m]:.0f}%".rjust(6) for m in mrs))
    return "\n".join(lines)


COMMANDS = {
    "gen": cmd_gen,
    "analyze": cmd_analyze,
    "predict": cmd_predict,
    "mt-run": cmd_mt_run,
    "mutants": cmd_mutants,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        status, summary = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(str(exc), file=sys.stderr)
        status, summary = EXIT_USAGE, "usage error"
    except (TapError, OSError, ValueError) as exc:
        print(f"tapmt: error: {exc}", file=sys.stderr)
        status, summary = EXIT_USAGE, "input error"
    sys.stdout.flush()
    label = {EXIT_OK: "ok", EXIT_VIOLATIONS: "violations found", EXIT_USAGE: "failed"}[status]
    print(f"tapmt: {label}: {summary}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
