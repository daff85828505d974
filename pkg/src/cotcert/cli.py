"""Command-line surface for the certification pipeline.

Commands: check, render, label, certify, aggregate, align, emit, synth,
sweep. Exit codes: 0 success, 2 input error, 3 gate-config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import harness
from .alignment import align, render_markdown
from .csc import majority_vote, group_by_question
from .emitter_client import EmitterConfig, EmitterMode, emit_k
from .gates import GateConfigError, builtin_presets, evaluate_gate, resolve_gate
from .harness import (
    EXIT_GATE_ERROR,
    EXIT_INPUT_ERROR,
    EXIT_OK,
    atomic_write,
    certify_records,
    read_runs_jsonl,
    sweep_csv,
    sweep_thresholds,
)
from .metrics import compute_metrics, metrics_report
from .program_model import ProgramParseError, parse_program, render_typed
from .step_labeler import label_text, steps_to_jsonl
from .synth import FaultKind, FaultSpec, corpus_to_jsonl, make_corpus
from .trg import build_from_program
from .type_system import format_rational


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except GateConfigError as exc:
        print(f"gate config error: {exc}", file=sys.stderr)
        return EXIT_GATE_ERROR
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cotcert",
        description="Certify arithmetic reasoning traces as typed programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="certify one program file")
    p.add_argument("program", type=Path)
    p.add_argument("--gate", default=None, help="extra gate: preset name or JSON path")
    p.set_defaults(handler=_cmd_check)

    p = sub.add_parser("render", help="print the typed proof sketch of a program")
    p.add_argument("program", type=Path)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=_cmd_render)

    p = sub.add_parser("label", help="segment and classify a trace file")
    p.add_argument("cot", type=Path)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=_cmd_label)

    p = sub.add_parser("certify", help="certify a JSONL batch of runs")
    p.add_argument("runs", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--gate", default=None, help="extra gate: preset name or JSON path")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-type-check", action="store_true",
                   help="ablation: treat every constructed step as valid")
    p.add_argument("--no-path", action="store_true",
                   help="ablation: drop the path requirement from all gates")
    p.add_argument("--no-csc", action="store_true",
                   help="ablation: aggregate by unfiltered majority vote")
    p.add_argument("--no-per-question", action="store_true",
                   help="skip per-question output directories")
    p.set_defaults(handler=_cmd_certify)

    p = sub.add_parser("aggregate", help="certified vote per question, one gate")
    p.add_argument("runs", type=Path)
    p.add_argument("--gate", default="relaxed")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=_cmd_aggregate)

    p = sub.add_parser("align", help="score program/trace correspondence")
    p.add_argument("--program", type=Path, required=True)
    p.add_argument("--cot", type=Path, required=True)
    p.add_argument("--operands-only", action="store_true",
                   help="match on operands and operator only, ignore results")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=_cmd_align)

    p = sub.add_parser("emit", help="obtain k candidate programs for a question")
    p.add_argument("question")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--mode", choices=["mock", "http"], default="mock")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixtures", type=Path, default=None,
                   help="mock: directory of fixture programs keyed by question hash")
    p.add_argument("--endpoint", default="")
    p.add_argument("--model", default="")
    p.add_argument("--auth-env", default="EMITTER_API_KEY")
    p.add_argument("--max-tokens", type=int, default=1200)
    p.add_argument("--escalation", type=int, default=1000)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--transcripts", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=_cmd_emit)

    p = sub.add_parser("synth", help="generate a seeded fault-injected corpus")
    p.add_argument("--questions", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--fault", action="append", default=[],
                   metavar="KIND=RATE",
                   help="e.g. unit_swap=0.1 (repeatable; kinds: "
                        "unit_swap, arith_corrupt, dangling_input, answer_mismatch)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-ops", type=int, default=1)
    p.add_argument("--max-ops", type=int, default=5)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("sweep", help="re-gate a batch across a threshold grid")
    p.add_argument("runs", type=Path)
    p.add_argument("--metric", choices=list(harness.SWEEP_METRICS), required=True)
    p.add_argument("--grid", required=True, help="comma-separated thresholds")
    p.add_argument("--gate", default="strict", help="base gate to vary")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=_cmd_sweep)

    return parser


def _emit_text(text: str, out: Path | None) -> None:
    if out is None:
        print(text)
    else:
        atomic_write(out, text + "\n")


def _gates_for(args) -> list:
    gates = builtin_presets()
    if getattr(args, "gate", None):
        extra = resolve_gate(args.gate)
        if all(g.name != extra.name for g in gates):
            gates.append(extra)
    return gates


def _cmd_check(args) -> int:
    try:
        program = parse_program(args.program.read_text(encoding="utf-8"))
    except ProgramParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    graph = build_from_program(program)
    metrics = compute_metrics(graph)
    print(render_typed(program, graph))
    print(metrics_report(metrics))
    print(f"consistency={1 if graph.consistent else 0}")
    for gate in _gates_for(args):
        decision = evaluate_gate(metrics, graph.consistent, gate)
        if decision.accepted:
            print(f"{gate.name}: ACCEPT")
        else:
            print(f"{gate.name}: REJECT ({', '.join(decision.failed_conditions)})")
    return EXIT_OK


def _cmd_render(args) -> int:
    try:
        program = parse_program(args.program.read_text(encoding="utf-8"))
    except ProgramParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    _emit_text(render_typed(program, build_from_program(program)), args.out)
    return EXIT_OK


def _cmd_label(args) -> int:
    steps = label_text(args.cot.read_text(encoding="utf-8"))
    _emit_text(steps_to_jsonl(steps), args.out)
    return EXIT_OK


def _cmd_certify(args) -> int:
    records, errors = read_runs_jsonl(args.runs.read_text(encoding="utf-8"))
    gates = _gates_for(args)
    processed, report = certify_records(
        records,
        gates,
        jobs=args.jobs,
        no_type_check=args.no_type_check,
        no_path=args.no_path,
    )
    if args.no_csc:
        report = _majority_report(processed, report)
    harness.write_reports(
        args.out, processed, report, errors, per_question=not args.no_per_question
    )
    for line in errors:
        print(f"skipped: {line}", file=sys.stderr)
    summary = harness.summary_dict(report)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _majority_report(processed, report):
    # Ablation: one row per question, mode over every answered run.
    from .csc import BatchReport

    grouped = group_by_question([p.result for p in processed])
    rows = []
    for qid in sorted(grouped):
        result = majority_vote(grouped[qid])
        gold = next((r.gold for r in grouped[qid] if r.gold is not None), None)
        correct = None
        if gold is not None:
            correct = (not result.abstained) and result.predicted == gold
        rows.append((qid, "none", result, correct))
    return BatchReport(tuple(rows), report.summaries)


def _cmd_aggregate(args) -> int:
    records, errors = read_runs_jsonl(args.runs.read_text(encoding="utf-8"))
    gate = resolve_gate(args.gate)
    processed, report = certify_records(records, [gate])
    for line in errors:
        print(f"skipped: {line}", file=sys.stderr)
    _emit_text(harness.csc_csv(report), args.out)
    return EXIT_OK


def _cmd_align(args) -> int:
    try:
        program = parse_program(args.program.read_text(encoding="utf-8"))
    except ProgramParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    steps = label_text(args.cot.read_text(encoding="utf-8"))
    report = align(program, steps, require_result=not args.operands_only)
    _emit_text(render_markdown(report, program, steps), args.out)
    return EXIT_OK


def _cmd_emit(args) -> int:
    cfg = EmitterConfig(
        mode=EmitterMode(args.mode),
        endpoint=args.endpoint,
        model=args.model,
        auth_env=args.auth_env,
        max_completion_tokens=args.max_tokens,
        retry_escalation=args.escalation,
        max_retries=args.retries,
        timeout=args.timeout,
        seed=args.seed,
        fixtures_dir=str(args.fixtures) if args.fixtures else None,
        transcript_dir=str(args.transcripts) if args.transcripts else None,
    )
    results = emit_k(args.question, args.k, cfg)
    for i, result in enumerate(results):
        if args.out is None:
            print(result.raw_text)
            continue
        meta = {
            "parsed": result.parsed_program is not None,
            "truncated": result.truncated,
            "attempts": result.attempts,
            "error": result.error,
        }
        atomic_write(args.out / f"emission{i}.json", json.dumps(meta, indent=2) + "\n")
        atomic_write(args.out / f"emission{i}.txt", result.raw_text + "\n")
    return EXIT_OK


def _parse_faults(items: list[str]) -> list[FaultSpec]:
    specs = []
    for item in items:
        if "=" not in item:
            raise ValueError(f"--fault expects KIND=RATE, got {item!r}")
        kind_text, rate_text = item.split("=", 1)
        kind = FaultKind(kind_text.strip().lower())
        specs.append(FaultSpec(kind, float(Fraction(rate_text.strip()))))
    return specs


def _cmd_synth(args) -> int:
    try:
        faults = _parse_faults(args.fault)
        records = make_corpus(
            args.questions, args.k, faults, args.seed, args.min_ops, args.max_ops
        )
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    atomic_write(args.out, corpus_to_jsonl(records) + "\n")
    print(f"wrote {len(records)} runs to {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    records, errors = read_runs_jsonl(args.runs.read_text(encoding="utf-8"))
    base = resolve_gate(args.gate)
    try:
        grid = [Fraction(v.strip()) for v in args.grid.split(",") if v.strip()]
    except ValueError as exc:
        print(f"input error: bad grid ({exc})", file=sys.stderr)
        return EXIT_INPUT_ERROR
    if not grid or any(not 0 <= v <= 1 for v in grid):
        print("input error: grid values must lie in [0,1]", file=sys.stderr)
        return EXIT_INPUT_ERROR
    for line in errors:
        print(f"skipped: {line}", file=sys.stderr)
    rows = sweep_thresholds(records, args.metric, grid, base, jobs=args.jobs)
    _emit_text(sweep_csv(rows), args.out)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
