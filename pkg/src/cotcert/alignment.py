"""Program-to-trace alignment scoring.

An operation is traceable to a trace line when the line's equation uses the
same operands (order-insensitive for the commutative operators), the same
operator class, and claims exactly the value the operation computes. The
result-equality requirement is what keeps repeated numbers in a word
problem from producing spurious matches; an operand-only mode exists for
looser auditing. Matching is greedy in program order and each line matches
at most one operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .program_model import ExecutionResult, Program, execute_program
from .rule_schemas import ARITH_RULES, RuleName
from .step_labeler import LabeledStep

_OP_TO_RULE = {
    "add": RuleName.COMPUTE_ADD,
    "sub": RuleName.COMPUTE_SUB,
    "mul": RuleName.COMPUTE_MUL,
    "div": RuleName.COMPUTE_DIV,
}
_COMMUTATIVE = {"add", "mul"}


class AlignmentLevel(Enum):
    FULL = "full"
    PARTIAL = "partial"
    LOW = "low"


def level_for(ratio: Fraction) -> AlignmentLevel:
    """Band the match ratio: 100% full, [50%, 100%) partial, below half low."""
    if ratio == 1:
        return AlignmentLevel.FULL
    if ratio >= Fraction(1, 2):
        return AlignmentLevel.PARTIAL
    return AlignmentLevel.LOW


@dataclass(frozen=True)
class AlignmentReport:
    matched_ops: int
    total_ops: int
    ratio: Fraction
    level: AlignmentLevel
    matches: tuple[tuple[str, int | None], ...]  # (op_id, line_index or None)


def align(
    program: Program, cot: list[LabeledStep], require_result: bool = True
) -> AlignmentReport:
    """Score how much of ``program`` is traceable to labeled trace lines.

    A program with no operations is vacuously fully aligned.
    """
    execution = execute_program(program)
    values: dict[str, Fraction | None] = {p.id: p.value for p in program.premises}
    for record in execution.records:
        values[record.op_id] = record.value

    used: set[int] = set()
    matches: list[tuple[str, int | None]] = []
    matched = 0
    for op in program.ops:
        line = _find_match(op, values, cot, used, require_result)
        if line is not None:
            used.add(line)
            matched += 1
        matches.append((op.id, line))

    total = len(program.ops)
    ratio = Fraction(matched, total) if total else Fraction(1)
    return AlignmentReport(matched, total, ratio, level_for(ratio), tuple(matches))


def _find_match(
    op,
    values: dict[str, Fraction | None],
    cot: list[LabeledStep],
    used: set[int],
    require_result: bool,
) -> int | None:
    rule = _OP_TO_RULE.get(op.op)
    if rule is None:  # sumlist lines are not expressible as a,b equations
        return None
    operands = [values.get(ref) for ref in op.inputs]
    computed = values.get(op.out)
    if any(v is None for v in operands) or len(operands) != 2:
        return None
    for i, step in enumerate(cot):
        if i in used or step.schema is not rule or len(step.args) < 2:
            continue
        line_ops = [step.args[0][0], step.args[1][0]]
        if op.op in _COMMUTATIVE:
            ok = sorted(line_ops) == sorted(operands)
        else:
            ok = line_ops == operands
        if not ok:
            continue
        if require_result and (
            computed is None
            or step.claimed_result is None
            or step.claimed_result != computed
        ):
            continue
        return i
    return None


def render_markdown(
    report: AlignmentReport, program: Program, cot: list[LabeledStep]
) -> str:
    """Side-by-side audit table: one row per operation."""
    by_index = {s.line_index: s for s in cot}
    ordered = {i: s for i, s in enumerate(cot)}
    lines = [
        f"# Program / trace alignment — {report.level.value} "
        f"({report.matched_ops}/{report.total_ops})",
        "",
        "| op | operation | matched line | verdict |",
        "|---|---|---|---|",
    ]
    ops_by_id = {op.id: op for op in program.ops}
    for op_id, line_index in report.matches:
        op = ops_by_id[op_id]
        desc = f"{op.op}({', '.join(op.inputs)})"
        if line_index is None:
            lines.append(f"| {op_id} | {desc} |  | unmatched |")
        else:
            step = ordered.get(line_index) or by_index.get(line_index)
            text = step.raw_text.replace("|", "\\|") if step else ""
            lines.append(f"| {op_id} | {desc} | {text} | matched |")
    return "\n".join(lines)
