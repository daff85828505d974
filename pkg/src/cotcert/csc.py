"""Certified self-consistency: majority vote restricted to certified runs.

Only runs that pass the gate (and actually produced an answer) vote. An
empty certified set means abstention — never a fallback to an uncertified
guess. Mode ties break toward the candidate whose supporting runs have the
higher mean EVR; a residual tie also abstains. Answers compare as exact
rationals, so "187" and "187.0" are one candidate.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

from .gates import GateConfig, GateDecision, evaluate_gate
from .metrics import CertMetrics


@dataclass(frozen=True)
class RunResult:
    """One certified-or-not run of one question."""

    run_id: str
    question_id: str
    answer: Fraction | None
    metrics: CertMetrics
    consistent: bool
    decisions: dict[str, GateDecision] = field(default_factory=dict)
    gold: Fraction | None = None
    source: str = "program"
    note: str = ""

    def decision_for(self, gate: GateConfig) -> GateDecision:
        cached = self.decisions.get(gate.name)
        if cached is not None:
            return cached
        return evaluate_gate(self.metrics, self.consistent, gate)

    @property
    def correct(self) -> bool | None:
        if self.gold is None:
            return None
        return self.answer is not None and self.answer == self.gold


@dataclass(frozen=True)
class CSCResult:
    question_id: str
    predicted: Fraction | None
    abstained: bool
    support_count: int
    certified_count: int


def _mode_with_tiebreak(
    candidates: dict[Fraction, list[RunResult]]
) -> Fraction | None:
    """Most-supported answer; ties break on mean supporter EVR, then abstain."""
    best_count = max(len(runs) for runs in candidates.values())
    tied = [a for a, runs in candidates.items() if len(runs) == best_count]
    if len(tied) == 1:
        return tied[0]
    scored = {
        a: sum((r.metrics.evr for r in candidates[a]), Fraction(0))
        / len(candidates[a])
        for a in tied
    }
    best_evr = max(scored.values())
    winners = [a for a in tied if scored[a] == best_evr]
    return winners[0] if len(winners) == 1 else None


def aggregate(runs: list[RunResult], gate: GateConfig) -> CSCResult:
    """Certified majority vote over one question's runs."""
    if not runs:
        return CSCResult("", None, True, 0, 0)
    question_ids = {r.question_id for r in runs}
    if len(question_ids) != 1:
        raise ValueError(f"aggregate expects one question, got {sorted(question_ids)}")
    question_id = runs[0].question_id

    certified = [
        r for r in runs if r.answer is not None and r.decision_for(gate).accepted
    ]
    if not certified:
        return CSCResult(question_id, None, True, 0, 0)
    candidates: dict[Fraction, list[RunResult]] = defaultdict(list)
    for run in certified:
        candidates[run.answer].append(run)
    predicted = _mode_with_tiebreak(candidates)
    if predicted is None:
        return CSCResult(question_id, None, True, 0, len(certified))
    return CSCResult(
        question_id, predicted, False, len(candidates[predicted]), len(certified)
    )


def majority_vote(runs: list[RunResult]) -> CSCResult:
    """Uncertified baseline: mode over every run that produced an answer."""
    if not runs:
        return CSCResult("", None, True, 0, 0)
    question_id = runs[0].question_id
    voters = [r for r in runs if r.answer is not None]
    if not voters:
        return CSCResult(question_id, None, True, 0, 0)
    candidates: dict[Fraction, list[RunResult]] = defaultdict(list)
    for run in voters:
        candidates[run.answer].append(run)
    predicted = _mode_with_tiebreak(candidates)
    if predicted is None:
        return CSCResult(question_id, None, True, 0, len(voters))
    return CSCResult(
        question_id, predicted, False, len(candidates[predicted]), len(voters)
    )


@dataclass(frozen=True)
class GateSummary:
    """Per-gate batch statistics; accuracy fields are None without gold."""

    gate: str
    questions: int
    certified_questions: int
    question_coverage: Fraction
    accepted_runs: int
    rejected_runs: int
    accepted_accuracy: Fraction | None
    rejected_accuracy: Fraction | None
    csc_accuracy: Fraction | None
    majority_accuracy: Fraction | None


@dataclass(frozen=True)
class BatchReport:
    rows: tuple[tuple[str, str, CSCResult, bool | None], ...]
    summaries: dict[str, GateSummary]


def group_by_question(runs: list[RunResult]) -> dict[str, list[RunResult]]:
    grouped: dict[str, list[RunResult]] = defaultdict(list)
    for run in runs:
        grouped[run.question_id].append(run)
    return dict(grouped)


def batch_aggregate(runs: list[RunResult], gates: list[GateConfig]) -> BatchReport:
    """Per-question, per-gate aggregation plus selectivity statistics.

    With gold answers present, reports run-level accuracy split by gate
    decision (a run with no answer counts as incorrect) and question-level
    accuracy for both certified voting and the unfiltered majority
    baseline. Abstentions count as incorrect.
    """
    grouped = group_by_question(runs)
    questions = sorted(grouped)
    rows = []
    summaries = {}
    has_gold = any(r.gold is not None for r in runs)

    majority_correct = 0
    for gate in gates:
        certified_questions = 0
        accepted: list[RunResult] = []
        rejected: list[RunResult] = []
        csc_correct = 0
        for qid in questions:
            qruns = grouped[qid]
            result = aggregate(qruns, gate)
            gold = next((r.gold for r in qruns if r.gold is not None), None)
            correct = None
            if gold is not None:
                correct = (not result.abstained) and result.predicted == gold
                csc_correct += 1 if correct else 0
            rows.append((qid, gate.name, result, correct))
            if result.certified_count > 0:
                certified_questions += 1
            for run in qruns:
                accepted_run = (
                    run.answer is not None and run.decision_for(gate).accepted
                )
                (accepted if accepted_run else rejected).append(run)

        def _accuracy(pool: list[RunResult]) -> Fraction | None:
            if not has_gold or not pool:
                return None
            return Fraction(sum(1 for r in pool if r.correct), len(pool))

        summaries[gate.name] = GateSummary(
            gate=gate.name,
            questions=len(questions),
            certified_questions=certified_questions,
            question_coverage=(
                Fraction(certified_questions, len(questions))
                if questions
                else Fraction(0)
            ),
            accepted_runs=len(accepted),
            rejected_runs=len(rejected),
            accepted_accuracy=_accuracy(accepted),
            rejected_accuracy=_accuracy(rejected),
            csc_accuracy=(
                Fraction(csc_correct, len(questions))
                if has_gold and questions
                else None
            ),
            majority_accuracy=None,  # filled below, gate-independent
        )

    majority_accuracy = None
    if has_gold and questions:
        for qid in questions:
            qruns = grouped[qid]
            gold = next((r.gold for r in qruns if r.gold is not None), None)
            result = majority_vote(qruns)
            if gold is not None and not result.abstained and result.predicted == gold:
                majority_correct += 1
        majority_accuracy = Fraction(majority_correct, len(questions))
    if majority_accuracy is not None:
        summaries = {
            name: GateSummary(
                **{**summary.__dict__, "majority_accuracy": majority_accuracy}
            )
            for name, summary in summaries.items()
        }
    return BatchReport(tuple(rows), summaries)
