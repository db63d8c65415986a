"""Command-line entry point: ``qtree run | check | enumerate | figure``.

Exit codes: 0 when everything passes, 1 when a check fails, 2 on usage or
input errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import figures
from .checker import check_equivalence, count_sequences
from .core import MODES, SINGLE_DECREE
from .harness import check_endtoend, check_refinement, check_sequences, format_report
from .labels import LabelParseError, parse_sequence
from .sim.config import PROTOCOLS, STRATEGIES, ConfigError, SimConfig, parse_config
from .sim.kernel import ScheduleError, TraceParseError, parse_schedule, parse_trace, run

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# enumerate refuses to start above this many sequences unless --limit is raised
DEFAULT_ENUM_LIMIT = 5_000_000


class UsageFailure(Exception):
    pass


def _range(text: str) -> List[int]:
    lo, sep, hi = text.partition("..")
    try:
        first, last = int(lo), int(hi if sep else lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None
    if last < first:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return list(range(first, last + 1))


def _ids(text: str) -> frozenset:
    try:
        return frozenset(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated process ids, got {text!r}") from None


def _crashes(text: str) -> dict:
    try:
        pairs = [item.split(":") for item in text.split(",") if item.strip()]
        return {int(p): int(s) for p, s in pairs}
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected pid:step,..., got {text!r}") from None


def _delay(text: str):
    lo, _, hi = text.partition("..")
    try:
        return int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo..hi, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a protocol and check the trace")
    p.add_argument("--config", type=Path, help="key = value config file; flags override it")
    p.add_argument("--protocol", choices=PROTOCOLS)
    p.add_argument("--n", type=int)
    p.add_argument("--f", type=int)
    p.add_argument("--q1", type=int)
    p.add_argument("--q2", type=int)
    seeds = p.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int)
    seeds.add_argument("--seeds", type=_range, help="inclusive range a..b")
    p.add_argument("--steps", type=int, dest="max_steps")
    p.add_argument("--instances", type=int)
    p.add_argument("--max-round", type=int)
    p.add_argument("--values", help="comma-separated client values")
    p.add_argument("--schedule", type=Path, help="scripted schedule file")
    p.add_argument("--byzantine", type=_ids)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--drop", type=float)
    p.add_argument("--dup", type=float)
    p.add_argument("--delay", type=_delay)
    p.add_argument("--crash", type=_crashes, help="pid:step,...")
    p.add_argument("--trace", type=Path, help="trace output; with --seeds each seed gets <path>.<seed>")
    p.add_argument("--quiet", action="store_true", help="print only the summary line per seed")

    c = sub.add_parser("check", help="check a trace or label-sequence file")
    c.add_argument("file", type=Path)
    c.add_argument("--mode", choices=MODES, help="default: from the trace header, else single-decree")

    e = sub.add_parser("enumerate", help="exhaustively compare both checkers")
    e.add_argument("--max-len", type=int, default=4)
    e.add_argument("--max-round", type=int, default=3)
    e.add_argument("--values", type=int, default=2, help="number of distinct values")
    e.add_argument("--mode", choices=MODES + ("both",), default="both")
    e.add_argument("--limit", type=int, default=DEFAULT_ENUM_LIMIT)

    g = sub.add_parser("figure", help="reproduce a figure and diff it against its golden")
    g.add_argument("name", choices=figures.FIGURES + ("all",))
    return parser


# -- run ------------------------------------------------------------------------

def config_from_args(args) -> SimConfig:
    cfg = SimConfig()
    if args.config is not None:
        cfg = parse_config(_read(args.config))
    top = {}
    for name in ("protocol", "n", "f", "q1", "q2", "max_steps", "instances", "max_round"):
        value = getattr(args, name)
        if value is not None:
            top[name] = value
    if args.values is not None:
        top["client_values"] = tuple(v for v in args.values.split(",") if v)
    if args.schedule is not None:
        top["schedule"] = tuple(parse_schedule(_read(args.schedule)))
    faults = {}
    for flag, name in (("byzantine", "byzantine"), ("strategy", "strategy"), ("drop", "drop_prob"),
                       ("dup", "duplicate_prob"), ("delay", "delay_range"), ("crash", "crash_at")):
        value = getattr(args, flag)
        if value is not None:
            faults[name] = value
    cfg = dataclasses.replace(cfg, faults=dataclasses.replace(cfg.faults, **faults), **top)
    cfg.resolved()  # validate early; the kernel resolves again per seed
    return cfg


def run_one(cfg: SimConfig, trace_path: Optional[Path], quiet: bool, out) -> bool:
    trace = run(cfg)
    if trace_path is not None:
        trace_path.write_text(trace.format())
    refinement = check_refinement(trace)
    safety = check_endtoend(trace)
    ok = refinement.passed and refinement.concordant and safety.safe
    report = format_report(refinement, safety)
    head = f"seed={cfg.seed} digest={trace.digest()[:16]} "
    if quiet:
        out.write(head + report.splitlines()[0] + "\n")
    else:
        out.write(head + report)
    return ok


def cmd_run(args, out=None) -> int:
    out = out or sys.stdout
    cfg = config_from_args(args)
    seeds = args.seeds if args.seeds is not None else [args.seed if args.seed is not None else cfg.seed]
    failures = 0
    for seed in seeds:
        path = args.trace
        if path is not None and len(seeds) > 1:
            path = path.with_name(f"{path.name}.{seed}")
        if not run_one(dataclasses.replace(cfg, seed=seed), path, args.quiet, out):
            failures += 1
    if len(seeds) > 1:
        out.write(f"runs={len(seeds)} failed={failures}\n")
    return EXIT_FAIL if failures else EXIT_PASS


# -- check ----------------------------------------------------------------------

def _looks_like_trace(text: str) -> bool:
    return any("kind=" in line for line in text.splitlines() if not line.startswith("#"))


def cmd_check(args, out=None) -> int:
    out = out or sys.stdout
    text = _read(args.file)
    if _looks_like_trace(text) or text.startswith("# protocol="):
        trace = parse_trace(text)
        refinement = check_refinement(trace, args.mode)
        safety = check_endtoend(trace) if "protocol" in trace.header else None
    else:
        labels = parse_sequence(text)
        groups = {}
        for label in labels:
            groups.setdefault(label.sn, []).append(label)
        refinement = check_sequences(groups, args.mode or SINGLE_DECREE)
        safety = None
    out.write(format_report(refinement, safety))
    ok = refinement.passed and refinement.concordant and (safety is None or safety.safe)
    return EXIT_PASS if ok else EXIT_FAIL


# -- enumerate ------------------------------------------------------------------

def cmd_enumerate(args, out=None, checkers=None) -> int:
    out = out or sys.stdout
    if min(args.max_len, args.max_round, args.values) < 0 or (args.max_len > 0 and args.values < 1):
        raise UsageFailure("bounds must be non-negative and need at least one value")
    modes = MODES if args.mode == "both" else (args.mode,)
    estimate = count_sequences(args.max_len, args.max_round, args.values) * len(modes)
    if estimate > args.limit:
        raise UsageFailure(f"refusing to enumerate about {estimate} sequences (limit {args.limit}); "
                           f"lower the bounds or raise --limit")
    values = [f"v{i}" for i in range(1, args.values + 1)]
    discordant = 0
    for mode in modes:
        report = check_equivalence(args.max_len, args.max_round, values, mode, **(checkers or {}))
        out.write(f"mode={mode} sequences={report.total} accepted={report.accepted} "
                  f"rejected={report.rejected} discordant={len(report.discordant)}\n")
        for seq, d, p in report.discordant:
            discordant += 1
            out.write(f"discordant mode={mode} declarative={d} replay={p} sequence=[{', '.join(map(str, seq))}]\n")
    return EXIT_FAIL if discordant else EXIT_PASS


# -- figure ---------------------------------------------------------------------

def cmd_figure(args, out=None) -> int:
    out = out or sys.stdout
    names = figures.FIGURES if args.name == "all" else (args.name,)
    failed = False
    for name in names:
        ok, diff = figures.compare(name)
        out.write(f"figure={name} golden={'match' if ok else 'differ'}\n")
        if not ok:
            failed = True
            out.write(diff)
    return EXIT_FAIL if failed else EXIT_PASS


COMMANDS = {"run": cmd_run, "check": cmd_check, "enumerate": cmd_enumerate, "figure": cmd_figure}


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise UsageFailure(f"cannot read {path}: {exc.strerror}") from None


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageFailure, ConfigError, ScheduleError, TraceParseError, LabelParseError) as exc:
        parser.print_usage(sys.stderr)
        print(f"qtree {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
