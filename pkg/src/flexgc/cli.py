"""``flexgc`` command line: run, analyze, mine, report.

Exit codes: 0 success, 1 runtime fault, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from typing import Iterator, Optional, Sequence, TextIO

from .heap_gc import write_stats_csv
from .report import write_supply_csv, write_typeset_csv
from .toy_ir import Program, ProgramError, RunTrace, interpret, load_program
from .traceminer import TraceError, TraceWriter, mine
from .typeflow import compute_type_sets, mark_plans, null_ratios, set_size_distribution, to_json

EXIT_OK, EXIT_FAULT, EXIT_INPUT = 0, 1, 2


class _InputError(Exception):
    pass


def _load(path: str) -> Program:
    try:
        return load_program(path)
    except OSError as e:
        raise _InputError(f"{path}: {e.strerror}") from None
    except ProgramError as e:
        raise _InputError(f"{path}: {e}") from None


@contextmanager
def _output(path: Optional[str]) -> Iterator[TextIO]:
    if path is None or path == "-":
        yield sys.stdout
        return
    try:
        fp = open(path, "w", encoding="utf-8", newline="")
    except OSError as e:
        raise _InputError(f"{path}: {e.strerror}") from None
    with fp:
        yield fp


def _execute(p: Program, args, tracer=None) -> RunTrace:
    plans = None if args.generic else mark_plans(compute_type_sets(p))
    return interpret(p, budget=args.budget, gc_budget=args.gc_budget, plans=plans, tracer=tracer)


def _report_faults(trace: RunTrace) -> int:
    for ev in trace.faults + trace.null_derefs:
        print(f"fault: {ev.kind} at {ev.where}: {ev.message}", file=sys.stderr)
    if trace.exhausted:
        print("fault: step or depth budget exhausted", file=sys.stderr)
    return EXIT_OK if trace.ok else EXIT_FAULT


def cmd_run(args) -> int:
    p = _load(args.program)
    trace_fp = None
    if args.trace_out:
        try:
            trace_fp = open(args.trace_out, "w", encoding="utf-8")
        except OSError as e:
            raise _InputError(f"{args.trace_out}: {e.strerror}") from None
    try:
        tracer = TraceWriter(trace_fp, args.word_size) if trace_fp else None
        trace = _execute(p, args, tracer)
    finally:
        if trace_fp:
            trace_fp.close()
    if args.stats_out:
        with _output(args.stats_out) as fp:
            write_stats_csv(trace.gc, fp)
    print(f"steps={trace.steps} gc_cycles={len(trace.gc)} live_arrays={len(trace.exit_arrays)} "
          f"faults={len(trace.faults) + len(trace.null_derefs)}")
    return _report_faults(trace)


def cmd_analyze(args) -> int:
    p = _load(args.program)
    before = compute_type_sets(p)
    doc = {"flow": to_json(before)}
    ratios = {"before": _ratios(before)}
    sizes = {"before": _sizes(before)}
    if args.saturate != "none":
        after = compute_type_sets(p, saturate=args.saturate)
        doc["flow"] = to_json(after)
        ratios["after"] = _ratios(after)
        sizes["after"] = _sizes(after)
    doc["saturation"] = args.saturate
    doc["null_ratios"] = ratios
    doc["local_set_sizes"] = sizes
    with _output(args.out) as fp:
        json.dump(doc, fp, indent=2, sort_keys=True)
        fp.write("\n")
    return EXIT_OK


def _ratios(r) -> dict:
    return {k: {"null_holders": h, "locations": n, "ratio": round(x, 6)}
            for k, (h, n, x) in null_ratios(r).items()}


def _sizes(r) -> dict:
    dist = set_size_distribution(r)
    return {"distinct": len(dist), "histogram": {str(k): dist[k] for k in sorted(dist)}}


def cmd_mine(args) -> int:
    if args.word_size <= 0:
        raise _InputError("--word-size must be positive")
    try:
        with open(args.trace, encoding="utf-8") as fp:
            rep = mine(fp, args.word_size)
    except OSError as e:
        raise _InputError(f"{args.trace}: {e.strerror}") from None
    except TraceError as e:
        raise _InputError(f"{args.trace}: {e}") from None
    sys.stdout.write(rep.to_csv())
    return EXIT_OK


def cmd_report(args) -> int:
    p = _load(args.program)
    if args.table == "types":
        r = compute_type_sets(p, saturate=None if args.saturate == "none" else args.saturate)
        with _output(args.out) as fp:
            write_typeset_csv(r, fp)
        return EXIT_OK
    trace = _execute(p, args)
    if not trace.gc:
        raise _InputError("no collection cycle was recorded")
    try:
        with _output(args.out) as fp:
            write_supply_csv(trace.gc, fp, args.cycle)
    except ValueError as e:
        raise _InputError(str(e)) from None
    return _report_faults(trace)


def _positive(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _exec_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--gc-budget", type=_positive, default=4096,
                    help="collect when more than this many entities are live (default 4096)")
    sp.add_argument("--budget", type=_positive, default=100_000, help="statement budget")
    sp.add_argument("--generic", action="store_true",
                    help="mark with the generic routine instead of analysis-derived plans")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flexgc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="interpret a program")
    sp.add_argument("program")
    _exec_flags(sp)
    sp.add_argument("--trace-out", help="write an allocation trace here")
    sp.add_argument("--stats-out", help="write per-cycle collector stats CSV here")
    sp.add_argument("--word-size", type=_positive, default=8, help="bytes per slot in the trace")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("analyze", help="type-set analysis as JSON")
    sp.add_argument("program")
    sp.add_argument("--saturate", choices=("none", "null", "subtypes"), default="none")
    sp.add_argument("--out", help="output file (default stdout)")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("mine", help="classify an allocation trace")
    sp.add_argument("trace")
    sp.add_argument("--word-size", type=int, default=8, help="reference width in bytes (default 8)")
    sp.set_defaults(func=cmd_mine)

    sp = sub.add_parser("report", help="CSV histogram tables")
    rs = sp.add_subparsers(dest="table", required=True)
    gp = rs.add_parser("gc", help="supply-ratio histogram of collected arrays")
    gp.add_argument("program")
    _exec_flags(gp)
    gp.add_argument("--cycle", help="cycle number or 'all' (default: last cycle)")
    gp.add_argument("--out")
    gp.set_defaults(func=cmd_report)
    tp = rs.add_parser("types", help="type-set size histogram of array holders")
    tp.add_argument("program")
    tp.add_argument("--saturate", choices=("none", "null", "subtypes"), default="none")
    tp.add_argument("--out")
    tp.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
