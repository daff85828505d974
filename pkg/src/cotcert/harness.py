"""Batch pipeline: run records in, certification reports out.

A run record is one JSONL object: {"question_id", "run_id", "program": {...}}
for emitted programs or {"question_id", "run_id", "cot_text": "..."} for raw
traces, optionally with "gold_answer". Records that fail to parse are kept
as answer-less runs with zeroed metrics (ineligible for every gate) so a
batch never aborts on one bad line.

All report files are written atomically (temp file + rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

from .csc import BatchReport, RunResult, batch_aggregate
from .gates import GateConfig, builtin_presets, evaluate_gate
from .metrics import (
    CSV_HEADER,
    CertMetrics,
    compute_metrics,
    metrics_csv_row,
)
from .program_model import (
    Program,
    ProgramParseError,
    execute_program,
    parse_program,
    render_typed,
    serialize_program,
)
from .rule_schemas import RuleName
from .step_labeler import label_text, steps_to_jsonl
from .trg import TypedReasoningGraph, build_from_program, build_from_steps
from .type_system import as_fraction, format_rational

ZERO_METRICS = CertMetrics(Fraction(0), Fraction(0), Fraction(1), False, -1, 0, 0)

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_GATE_ERROR = 3


@dataclass(frozen=True)
class RunRecord:
    question_id: str
    run_id: str
    source: str  # "program" | "cot"
    payload: str
    gold: Fraction | None = None


class RecordError(ValueError):
    pass


def parse_record(obj: dict) -> RunRecord:
    if not isinstance(obj, dict):
        raise RecordError("record is not an object")
    try:
        question_id = str(obj["question_id"])
        run_id = str(obj["run_id"])
    except KeyError as exc:
        raise RecordError(f"record missing {exc.args[0]}") from None
    gold = None
    if obj.get("gold_answer") is not None:
        gold = as_fraction(obj["gold_answer"])
    if "program" in obj:
        payload = obj["program"]
        text = payload if isinstance(payload, str) else json.dumps(payload)
        return RunRecord(question_id, run_id, "program", text, gold)
    if "cot_text" in obj:
        return RunRecord(question_id, run_id, "cot", str(obj["cot_text"]), gold)
    if "payload" in obj and "source" in obj:
        source = str(obj["source"]).lower()
        source = "program" if "program" in source else "cot"
        payload = obj["payload"]
        text = payload if isinstance(payload, str) else json.dumps(payload)
        return RunRecord(question_id, run_id, source, text, gold)
    raise RecordError(f"record {run_id}: no program or cot_text payload")


def read_runs_jsonl(text: str) -> tuple[list[RunRecord], list[str]]:
    """Parse a JSONL document; malformed lines are reported, not fatal."""
    records, errors = [], []
    for i, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            records.append(parse_record(json.loads(line, parse_float=Fraction)))
        except (json.JSONDecodeError, RecordError, ValueError, TypeError) as exc:
            errors.append(f"line {i + 1}: {exc}")
    return records, errors


@dataclass(frozen=True)
class ProcessedRun:
    result: RunResult
    record: RunRecord
    program: Program | None = None
    graph: TypedReasoningGraph | None = None


def process_record(
    record: RunRecord,
    gates: list[GateConfig],
    no_type_check: bool = False,
    no_path: bool = False,
) -> ProcessedRun:
    """Certify one run: parse/label, build the graph, compute metrics, apply
    every gate. ``no_type_check`` treats every constructed step as valid;
    ``no_path`` drops the path requirement from every gate."""
    if no_path:
        gates = [replace(g, require_pe=False) for g in gates]

    program = None
    graph = None
    answer: Fraction | None = None
    note = ""
    if record.source == "program":
        try:
            program = parse_program(record.payload)
        except ProgramParseError as exc:
            note = str(exc)
        if program is not None:
            graph = build_from_program(program, assume_valid=no_type_check)
            answer = program.answer.value
    else:
        steps = label_text(record.payload)
        graph = build_from_steps(steps, assume_valid=no_type_check)
        claims = [
            s.claimed_result
            for s in steps
            if s.schema is RuleName.THEREFORE and s.claimed_result is not None
        ]
        answer = claims[-1] if claims else None

    if graph is None:
        metrics = ZERO_METRICS
        consistent = False
    else:
        metrics = compute_metrics(graph)
        consistent = graph.consistent

    decisions = {g.name: evaluate_gate(metrics, consistent, g) for g in gates}
    result = RunResult(
        run_id=record.run_id,
        question_id=record.question_id,
        answer=answer,
        metrics=metrics,
        consistent=consistent,
        decisions=decisions,
        gold=record.gold,
        source=record.source,
        note=note,
    )
    return ProcessedRun(result, record, program, graph)


def process_records(
    records: list[RunRecord],
    gates: list[GateConfig],
    jobs: int = 1,
    no_type_check: bool = False,
    no_path: bool = False,
) -> list[ProcessedRun]:
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(
                pool.map(
                    lambda r: process_record(r, gates, no_type_check, no_path),
                    records,
                )
            )
    return [process_record(r, gates, no_type_check, no_path) for r in records]


def certify_records(
    records: list[RunRecord],
    gates: list[GateConfig] | None = None,
    jobs: int = 1,
    no_type_check: bool = False,
    no_path: bool = False,
) -> tuple[list[ProcessedRun], BatchReport]:
    gates = gates if gates is not None else builtin_presets()
    processed = process_records(records, gates, jobs, no_type_check, no_path)
    report = batch_aggregate([p.result for p in processed], gates)
    return processed, report


# -- report files ------------------------------------------------------------------


SWEEP_METRICS = ("uvr", "evr", "coverage")


def sweep_thresholds(
    records: list[RunRecord],
    metric: str,
    grid: list[Fraction],
    base_gate: GateConfig,
    jobs: int = 1,
) -> list[dict]:
    """Re-gate the batch at each threshold of one metric.

    Returns one row per grid value with question coverage, accepted-run
    precision, and (gold permitting) certified-vote and majority accuracy —
    the data behind a coverage/selectivity trade-off curve.
    """
    if metric not in SWEEP_METRICS:
        raise ValueError(f"sweep metric must be one of {SWEEP_METRICS}")
    processed = process_records(records, [base_gate], jobs)
    results = [p.result for p in processed]
    rows = []
    for value in grid:
        gate = replace(base_gate, name=f"{base_gate.name}@{value}", **{f"{metric}_min": value})
        report = batch_aggregate(results, [gate])
        summary = report.summaries[gate.name]
        rows.append(
            {
                "metric": metric,
                "threshold": value,
                "certified_questions": summary.certified_questions,
                "question_coverage": summary.question_coverage,
                "accepted_runs": summary.accepted_runs,
                "accepted_accuracy": summary.accepted_accuracy,
                "rejected_accuracy": summary.rejected_accuracy,
                "csc_accuracy": summary.csc_accuracy,
                "majority_accuracy": summary.majority_accuracy,
            }
        )
    return rows


def sweep_csv(rows: list[dict]) -> str:
    header = (
        "metric,threshold,certified_questions,question_coverage,accepted_runs,"
        "accepted_accuracy,rejected_accuracy,csc_accuracy,majority_accuracy"
    )

    def cell(value) -> str:
        if value is None:
            return ""
        if isinstance(value, Fraction):
            return f"{float(value):.3f}"
        return str(value)

    lines = [header]
    for row in rows:
        lines.append(
            ",".join(
                cell(row[key])
                for key in (
                    "metric",
                    "threshold",
                    "certified_questions",
                    "question_coverage",
                    "accepted_runs",
                    "accepted_accuracy",
                    "rejected_accuracy",
                    "csc_accuracy",
                    "majority_accuracy",
                )
            )
        )
    return "\n".join(lines)


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _opt_ratio(value: Fraction | None) -> float | None:
    return None if value is None else round(float(value), 6)


def summary_dict(report: BatchReport) -> dict:
    return {
        gate: {
            "questions": s.questions,
            "certified_questions": s.certified_questions,
            "question_coverage": _opt_ratio(s.question_coverage),
            "accepted_runs": s.accepted_runs,
            "rejected_runs": s.rejected_runs,
            "accepted_accuracy": _opt_ratio(s.accepted_accuracy),
            "rejected_accuracy": _opt_ratio(s.rejected_accuracy),
            "csc_accuracy": _opt_ratio(s.csc_accuracy),
            "majority_accuracy": _opt_ratio(s.majority_accuracy),
        }
        for gate, s in sorted(report.summaries.items())
    }


def csc_csv(report: BatchReport) -> str:
    lines = ["question_id,gate,predicted,abstained,support_count,certified_count,correct"]
    for qid, gate, result, correct in report.rows:
        predicted = "" if result.predicted is None else format_rational(result.predicted)
        correct_text = "" if correct is None else ("1" if correct else "0")
        lines.append(
            f"{qid},{gate},{predicted},{1 if result.abstained else 0},"
            f"{result.support_count},{result.certified_count},{correct_text}"
        )
    return "\n".join(lines)


def metrics_csv(processed: list[ProcessedRun]) -> str:
    lines = [CSV_HEADER]
    for p in processed:
        lines.append(metrics_csv_row(p.result.run_id, p.result.metrics))
    return "\n".join(lines)


def write_reports(
    out_dir: Path,
    processed: list[ProcessedRun],
    report: BatchReport,
    errors: list[str],
    per_question: bool = True,
) -> None:
    atomic_write(out_dir / "metrics.csv", metrics_csv(processed) + "\n")
    atomic_write(out_dir / "csc.csv", csc_csv(report) + "\n")
    atomic_write(
        out_dir / "summary.json",
        json.dumps(summary_dict(report), indent=2) + "\n",
    )
    if errors:
        atomic_write(out_dir / "errors.log", "\n".join(errors) + "\n")
    if not per_question:
        return
    by_question: dict[str, list[ProcessedRun]] = {}
    for p in processed:
        by_question.setdefault(p.result.question_id, []).append(p)
    for qid, runs in sorted(by_question.items()):
        qdir = out_dir / "questions" / qid
        merged = []
        for i, p in enumerate(runs):
            stem = f"run{i}"
            if p.program is not None:
                atomic_write(
                    qdir / f"{stem}_program.pretty.json",
                    serialize_program(p.program) + "\n",
                )
                atomic_write(
                    qdir / f"{stem}_typed_program.txt",
                    render_typed(p.program, p.graph) + "\n",
                )
            elif p.result.source == "cot":
                atomic_write(qdir / f"{stem}_cot.txt", p.record.payload + "\n")
                atomic_write(
                    qdir / f"{stem}_steps.jsonl",
                    steps_to_jsonl(label_text(p.record.payload)) + "\n",
                )
            merged.append(
                {
                    "run_id": p.result.run_id,
                    "answer": None
                    if p.result.answer is None
                    else format_rational(p.result.answer),
                    "consistent": p.result.consistent,
                    "metrics": {
                        "coverage": _opt_ratio(p.result.metrics.coverage),
                        "evr": _opt_ratio(p.result.metrics.evr),
                        "uvr": _opt_ratio(p.result.metrics.uvr),
                        "pe": p.result.metrics.pe,
                        "mps": p.result.metrics.mps,
                    },
                    "gates": {
                        name: {
                            "accepted": d.accepted,
                            "failed": list(d.failed_conditions),
                        }
                        for name, d in sorted(p.result.decisions.items())
                    },
                    "note": p.result.note,
                }
            )
        atomic_write(
            qdir / "report.json", json.dumps(merged, indent=2) + "\n"
        )
