"""Command-line front end: ``run``, ``report``, ``sweep`` and ``synth``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import formats
from .formats import FormatError
from .policy import MMASpec, WaitKSpec, parse_heads
from .predecision import FixedPreDecision
from .simulator import (
    CostModel,
    FlexiblePreDecision,
    SessionError,
    SweepConfig,
    report_rows,
    run_corpus,
)
from .stream import validate_trace
from .synthetic import synthetic_corpus

logger = logging.getLogger("simulstream")


class UsageError(Exception):
    pass


def parse_grid(text: str) -> list:
    """``"1..10"`` -> 1..10 inclusive, ``"120,280,560"`` -> that list."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        values = list(range(int(lo), int(hi) + 1))
    else:
        values = [int(v) for v in text.split(",") if v.strip()]
    if not values:
        raise UsageError(f"empty grid {text!r}")
    return values


def _add_session_args(p: argparse.ArgumentParser, sweep: bool) -> None:
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--refs", required=True, type=Path)
    p.add_argument("--policy", required=True, choices=("wait-k", "mma"))
    p.add_argument("--k", type=int)
    p.add_argument("--heads", help="e.g. waitk:2,waitk:4 or table:PATH[@DEFAULT]")
    p.add_argument("--pre-decision", required=True, choices=("fixed", "flexible"))
    p.add_argument("--step-ms", type=str)
    p.add_argument("--alignments", type=Path)
    p.add_argument("--agent", default="oracle", choices=("oracle", "coverage"))
    p.add_argument("--placeholder", default="<unk>")
    p.add_argument("--cost-model", default="zero")
    p.add_argument("--subsample", type=int, default=4, help="frames per encoder state")
    p.add_argument("--max-tokens", type=int, default=1000)
    p.add_argument("--workers", type=int, help="parallel sessions (default: SIMULSTREAM_THREADS or CPU count)")
    if sweep:
        p.add_argument("--k-grid")
        p.add_argument("--step-grid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulstream",
        description="Simulate simultaneous speech-translation policies and report quality/latency.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one configuration and write traces")
    _add_session_args(run, sweep=False)
    run.add_argument("--out", required=True, type=Path)

    report = sub.add_parser("report", help="summarize trace files into a CSV report")
    report.add_argument("traces", nargs="+", type=Path)
    report.add_argument("--refs", type=Path)
    report.add_argument("--latency", choices=("both", "nca", "ca"), default="both")
    report.add_argument("--out", type=Path)

    sweep = sub.add_parser("sweep", help="run a parameter grid and write the CSV report")
    _add_session_args(sweep, sweep=True)
    sweep.add_argument("--out", type=Path)
    sweep.add_argument("--traces-out", type=Path)

    synth = sub.add_parser("synth", help="write a synthetic manifest, references and alignments")
    synth.add_argument("--out-dir", required=True, type=Path)
    synth.add_argument("--n", type=int, default=50)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--min-frames", type=int, default=300)
    synth.add_argument("--max-frames", type=int, default=1500)
    synth.add_argument("--frame-period", type=int, default=10)
    synth.add_argument("--ms-per-token", default="270", help="pace, or LO,HI range")
    synth.add_argument("--word-ms", type=int, default=270)
    return parser


def _policies(args, sweep: bool) -> list:
    k_grid = getattr(args, "k_grid", None)
    if args.policy == "wait-k":
        if args.heads:
            raise UsageError("--heads only applies to --policy mma")
        if args.k is not None and k_grid:
            raise UsageError("give either --k or --k-grid, not both")
        if k_grid:
            return [WaitKSpec(k) for k in parse_grid(k_grid)]
        if args.k is None:
            raise UsageError("--policy wait-k needs --k" + (" or --k-grid" if sweep else ""))
        return [WaitKSpec(args.k)]
    if args.k is not None or k_grid:
        raise UsageError("--k/--k-grid only apply to --policy wait-k")
    if not args.heads:
        raise UsageError("--policy mma needs --heads")
    return [MMASpec(tuple(parse_heads(args.heads, formats.read_stepwise_table)))]


def _pre_decisions(args, entries) -> list:
    step_grid = getattr(args, "step_grid", None)
    if args.pre_decision == "fixed":
        if args.alignments:
            raise UsageError("--alignments only applies to --pre-decision flexible")
        if args.step_ms and step_grid:
            raise UsageError("give either --step-ms or --step-grid, not both")
        steps = parse_grid(step_grid) if step_grid else None
        if steps is None:
            if not args.step_ms:
                raise UsageError("--pre-decision fixed needs --step-ms")
            steps = [args.step_ms]
        periods = sorted({e.frame_period_ms for e in entries})
        out = []
        for step in steps:
            try:
                # validate against every frame period in the manifest
                pres = [FixedPreDecision(step, period, args.subsample) for period in periods]
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            out.append(pres[0])
        return out

    if args.step_ms or step_grid:
        raise UsageError("--step-ms/--step-grid only apply to --pre-decision fixed")
    if not args.alignments:
        raise UsageError("--pre-decision flexible needs --alignments")
    alignments = formats.read_alignments(args.alignments)
    segments = {}
    levels = set()
    for entry in entries:
        key = entry.alignment_id or entry.id
        if key not in alignments:
            raise SessionError(f"no alignment {key!r} for manifest entry {entry.id!r}")
        segments[entry.id] = alignments[key].segments
        levels.add(alignments[key].level)
    if len(levels) != 1:
        raise UsageError(f"alignments mix levels {sorted(levels)}")
    return [FlexiblePreDecision(levels.pop(), segments, args.subsample)]


def _load_inputs(args):
    entries = formats.read_manifest(args.manifest)
    refs = formats.read_references(args.refs)
    missing = [e.id for e in entries if e.id not in refs]
    if missing:
        raise SessionError(f"no reference for manifest ids: {', '.join(missing[:5])}")
    return entries, refs


def _configs(args, entries, sweep: bool) -> list:
    if args.subsample < 1:
        raise UsageError("--subsample must be >= 1")
    try:
        cost_model = CostModel.parse(args.cost_model)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad --cost-model: {exc}") from None
    policies = _policies(args, sweep)
    pre_decisions = _pre_decisions(args, entries)
    return [
        SweepConfig(
            policy=policy,
            pre_decision=pre,
            cost_model=cost_model,
            agent=args.agent,
            max_tokens=args.max_tokens,
            placeholder=args.placeholder,
        )
        for policy in policies
        for pre in pre_decisions
    ]


def _simulate(args, sweep: bool) -> tuple:
    entries, refs = _load_inputs(args)
    configs = _configs(args, entries, sweep)
    streams = [e.to_stream() for e in entries]
    per_config = run_corpus(streams, configs, refs, workers=args.workers)
    items = []
    for config, traces in zip(configs, per_config):
        echo = config.echo()
        for trace in traces:
            problems = validate_trace(trace)
            if problems:
                raise SessionError(f"invalid trace for {trace.stream_id!r}: {problems[0]}")
            items.append((trace, echo))
    return items, refs


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_run(args) -> int:
    items, _ = _simulate(args, sweep=False)
    formats.write_traces(args.out, items)
    logger.info("wrote %d traces to %s", len(items), args.out)
    return 0


def cmd_report(args) -> int:
    items = []
    for path in args.traces:
        items.extend(formats.read_traces(path))
    refs = formats.read_references(args.refs) if args.refs else None
    rows = report_rows(items, refs, args.latency)
    _emit(formats.format_report(rows), args.out)
    return 0


def cmd_sweep(args) -> int:
    items, refs = _simulate(args, sweep=True)
    if args.traces_out:
        formats.write_traces(args.traces_out, items)
    rows = report_rows(items, refs, "both")
    _emit(formats.format_report(rows), args.out)
    return 0


def cmd_synth(args) -> int:
    pace = [float(v) for v in args.ms_per_token.split(",")]
    if len(pace) == 1:
        pace = pace * 2
    corpus = synthetic_corpus(
        args.n,
        seed=args.seed,
        min_frames=args.min_frames,
        max_frames=args.max_frames,
        frame_period_ms=args.frame_period,
        ms_per_token=tuple(pace),
        word_ms=args.word_ms,
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    formats.write_manifest(
        args.out_dir / "manifest.jsonl",
        (formats.ManifestEntry(s.id, s.num_frames, s.frame_period_ms) for s in corpus.streams),
    )
    formats.write_references(args.out_dir / "refs.tsv", corpus.references)
    formats.write_alignments(args.out_dir / "alignments.jsonl", corpus.alignments.values())
    return 0


COMMANDS = {"run": cmd_run, "report": cmd_report, "sweep": cmd_sweep, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except (FormatError, SessionError, ValueError, OSError) as exc:
        print(f"simulstream: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
