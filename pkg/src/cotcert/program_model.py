"""The JSON typed-program format: parsing, execution, deterministic rendering.

A program is premises + straight-line operations + a declared answer:

    {"program": {
       "premises": [{"id": "v1", "value": 6, "unit": "count"}, ...],
       "ops": [{"id": "t1", "op": "mul", "inputs": ["v1","v2"], "out": "t1"}, ...],
       "answer": {"value": 187, "unit": "count", "therefore_id": "therefore::1"}}}

Ops must appear in topological (declaration) order; forward references are
parse errors rather than something we silently reorder. Numbers may be JSON
integers, decimals, or "a/b" strings, and always convert exactly to
rationals. The "program" wrapper is optional on input and restored on
output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .type_system import (
    ArithOp,
    TypedValue,
    UNIT_NONE,
    UnitOutcome,
    as_fraction,
    format_rational,
    normalize_unit,
    propagate_unit_tainted,
)

VALID_OPS = {"add", "sub", "mul", "div", "sumlist"}

OP_SYMBOL = {"add": "+", "sub": "−", "mul": "×", "div": "÷"}

DEFAULT_THEREFORE_ID = "therefore::1"


class ProgramParseError(ValueError):
    """Structural parse failure; ``kind`` names the failure class and the
    message names the first offending field or reference."""

    SYNTAX = "Syntax"
    MISSING_FIELD = "MissingField"
    DANGLING_REFERENCE = "DanglingReference"
    DUPLICATE_ID = "DuplicateId"
    FORWARD_REFERENCE = "ForwardReference"

    def __init__(self, kind: str, message: str) -> None:
        super().__init__(f"{kind}: {message}")
        self.kind = kind


@dataclass(frozen=True)
class Premise:
    id: str
    value: Fraction
    unit: str = UNIT_NONE


@dataclass(frozen=True)
class ProgramOp:
    id: str
    op: str
    inputs: tuple[str, ...]
    out: str


@dataclass(frozen=True)
class Answer:
    value: Fraction
    unit: str = UNIT_NONE
    therefore_id: str = DEFAULT_THEREFORE_ID


@dataclass(frozen=True)
class Program:
    premises: tuple[Premise, ...]
    ops: tuple[ProgramOp, ...]
    answer: Answer


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ProgramParseError(ProgramParseError.MISSING_FIELD, f"{where}.{key}")
    return obj[key]


def _exact(raw, where: str) -> Fraction:
    try:
        return as_fraction(raw)
    except (TypeError, ValueError) as exc:
        raise ProgramParseError(
            ProgramParseError.SYNTAX, f"{where}: not an exact number ({exc})"
        ) from None


def parse_program(json_text: str) -> Program:
    """Parse and structurally validate a program document.

    Decimal literals are intercepted before float conversion, so "1250.5"
    arrives as the exact rational 2501/2.
    """
    def _reject_const(name: str):
        raise ProgramParseError(
            ProgramParseError.SYNTAX, f"non-finite number {name}"
        )

    try:
        doc = json.loads(
            json_text, parse_float=Fraction, parse_constant=_reject_const
        )
    except json.JSONDecodeError as exc:
        raise ProgramParseError(ProgramParseError.SYNTAX, str(exc)) from None
    if not isinstance(doc, dict):
        raise ProgramParseError(ProgramParseError.SYNTAX, "top level is not an object")
    body = doc.get("program", doc)
    if not isinstance(body, dict):
        raise ProgramParseError(ProgramParseError.SYNTAX, "program is not an object")
    return _parse_body(body)


def _parse_body(body: dict) -> Program:
    raw_premises = _require(body, "premises", "program")
    raw_ops = _require(body, "ops", "program")
    raw_answer = _require(body, "answer", "program")
    if not isinstance(raw_premises, list) or not isinstance(raw_ops, list):
        raise ProgramParseError(
            ProgramParseError.SYNTAX, "premises and ops must be arrays"
        )
    if not isinstance(raw_answer, dict):
        raise ProgramParseError(ProgramParseError.SYNTAX, "answer must be an object")

    seen: set[str] = set()
    premises = []
    for i, item in enumerate(raw_premises):
        where = f"premises[{i}]"
        if not isinstance(item, dict):
            raise ProgramParseError(ProgramParseError.SYNTAX, f"{where} not an object")
        pid = str(_require(item, "id", where))
        if not pid:
            raise ProgramParseError(ProgramParseError.SYNTAX, f"{where}.id is empty")
        if pid in seen:
            raise ProgramParseError(ProgramParseError.DUPLICATE_ID, pid)
        seen.add(pid)
        value = _exact(_require(item, "value", where), f"{where}.value")
        premises.append(Premise(pid, value, normalize_unit(item.get("unit"))))

    declared_later = {str(item.get("id", "")) for item in raw_ops if isinstance(item, dict)}
    ops = []
    for i, item in enumerate(raw_ops):
        where = f"ops[{i}]"
        if not isinstance(item, dict):
            raise ProgramParseError(ProgramParseError.SYNTAX, f"{where} not an object")
        oid = str(_require(item, "id", where))
        if not oid:
            raise ProgramParseError(ProgramParseError.SYNTAX, f"{where}.id is empty")
        if oid in seen:
            raise ProgramParseError(ProgramParseError.DUPLICATE_ID, oid)
        name = str(_require(item, "op", where))
        if name not in VALID_OPS:
            raise ProgramParseError(
                ProgramParseError.SYNTAX, f"{where}.op: unknown operation {name!r}"
            )
        raw_inputs = _require(item, "inputs", where)
        if not isinstance(raw_inputs, list):
            raise ProgramParseError(
                ProgramParseError.SYNTAX, f"{where}.inputs must be an array"
            )
        inputs = tuple(str(ref) for ref in raw_inputs)
        for ref in inputs:
            if ref in seen:
                continue
            if ref in declared_later:
                raise ProgramParseError(
                    ProgramParseError.FORWARD_REFERENCE, f"{where}.inputs: {ref}"
                )
            raise ProgramParseError(
                ProgramParseError.DANGLING_REFERENCE, f"{where}.inputs: {ref}"
            )
        out = str(item.get("out", oid))
        if out != oid:
            raise ProgramParseError(
                ProgramParseError.SYNTAX, f"{where}.out: {out!r} differs from id {oid!r}"
            )
        seen.add(oid)
        ops.append(ProgramOp(oid, name, inputs, out))

    value = _exact(_require(raw_answer, "value", "answer"), "answer.value")
    therefore_id = str(raw_answer.get("therefore_id", DEFAULT_THEREFORE_ID))
    if not therefore_id:
        raise ProgramParseError(ProgramParseError.SYNTAX, "answer.therefore_id is empty")
    answer = Answer(value, normalize_unit(raw_answer.get("unit")), therefore_id)
    return Program(tuple(premises), tuple(ops), answer)


def _json_number(value: Fraction):
    # Integers stay JSON integers; anything else becomes an exact "a/b"
    # string (decimal literals are accepted on input but never emitted, so
    # no value ever routes through binary floating point).
    if value.denominator == 1:
        return value.numerator
    return format_rational(value)


def serialize_program(program: Program) -> str:
    """Canonical two-space-indented JSON, keys in schema order, no trailing
    whitespace. Byte-stable for equal programs."""
    body = {
        "premises": [
            {"id": p.id, "value": _json_number(p.value), "unit": p.unit}
            for p in program.premises
        ],
        "ops": [
            {"id": op.id, "op": op.op, "inputs": list(op.inputs), "out": op.out}
            for op in program.ops
        ],
        "answer": {
            "value": _json_number(program.answer.value),
            "unit": program.answer.unit,
            "therefore_id": program.answer.therefore_id,
        },
    }
    return json.dumps({"program": body}, indent=2, ensure_ascii=False)


@dataclass(frozen=True)
class OpRecord:
    """Per-operation execution outcome."""

    op_id: str
    value: Fraction | None
    unit: UnitOutcome | None
    structurally_valid: bool
    note: str = ""


@dataclass(frozen=True)
class ExecutionResult:
    records: tuple[OpRecord, ...]
    final_value: Fraction | None
    consistent: bool


def execute_program(program: Program) -> ExecutionResult:
    """Evaluate every op in order with exact arithmetic.

    Failures never raise: a structurally broken op produces a value-less
    record and anything referencing it fails in turn. The consistency bit
    compares the computed final value with the declared answer; a program
    with no ops is consistent when the answer restates some premise.
    """
    env: dict[str, tuple[Fraction | None, str, bool]] = {}
    for p in program.premises:
        env[p.id] = (p.value, p.unit, False)

    records = []
    final: Fraction | None = None
    for op in program.ops:
        inputs = [env.get(ref, (None, UNIT_NONE, False)) for ref in op.inputs]
        record = _execute_op(op, inputs)
        records.append(record)
        out_unit = record.unit.unit if record.unit else UNIT_NONE
        out_taint = record.unit.tainted if record.unit else False
        env[op.out] = (record.value, out_unit, out_taint)
        final = record.value

    if program.ops:
        consistent = final is not None and final == program.answer.value
    else:
        consistent = any(p.value == program.answer.value for p in program.premises)
        final = program.answer.value if consistent else None
    return ExecutionResult(tuple(records), final, consistent)


def _execute_op(
    op: ProgramOp, inputs: list[tuple[Fraction | None, str, bool]]
) -> OpRecord:
    values = [v for v, _, _ in inputs]
    if any(v is None for v in values):
        return OpRecord(op.id, None, None, False, "missing input value")
    expected = None if op.op == "sumlist" else 2
    if expected is not None and len(values) != expected:
        return OpRecord(op.id, None, None, False, f"{op.op} takes {expected} inputs")
    if op.op == "sumlist" and not values:
        return OpRecord(op.id, None, None, False, "sumlist needs inputs")

    if op.op == "sumlist":
        unit = (inputs[0][1], inputs[0][2])
        for nxt in inputs[1:]:
            outcome = propagate_unit_tainted(ArithOp.ADD, unit, (nxt[1], nxt[2]))
            if not outcome.ok:
                break
            unit = (outcome.unit, outcome.tainted)
        else:
            outcome = UnitOutcome(unit[0], True, unit[1])
        return OpRecord(op.id, sum(values, Fraction(0)), outcome, True)

    a, b = values
    if op.op == "div" and b == 0:
        return OpRecord(op.id, None, None, False, "division by zero")
    arith = ArithOp(op.op)
    outcome = propagate_unit_tainted(
        arith, (inputs[0][1], inputs[0][2]), (inputs[1][1], inputs[1][2])
    )
    value = {
        ArithOp.ADD: a + b,
        ArithOp.SUB: a - b,
        ArithOp.MUL: a * b,
        ArithOp.DIV: a / b if b else None,
    }[arith]
    return OpRecord(op.id, value, outcome, True)


def render_typed(program: Program, trg) -> str:
    """Deterministic line-per-node proof sketch.

    One line per premise, one per operation (with its computed value and
    unit verdict), then the declared conclusion. Unit-invalid steps render
    "[invalid]"; steps downstream of one render their unit with a "?". The
    output is byte-identical across runs for identical input.
    """
    execution = execute_program(program)
    by_id = {r.op_id: r for r in execution.records}
    env_value: dict[str, Fraction | None] = {p.id: p.value for p in program.premises}

    lines = []
    for p in program.premises:
        lines.append(f"Premise {p.id} : {format_rational(p.value)} [{p.unit}]")
    for op in program.ops:
        record = by_id[op.id]
        operands = []
        for ref in op.inputs:
            val = env_value.get(ref)
            operands.append("?" if val is None else format_rational(val))
        env_value[op.out] = record.value
        symbol = OP_SYMBOL.get(op.op, "+")
        expr = f" {symbol} ".join(operands)
        result = "?" if record.value is None else format_rational(record.value)
        if not record.structurally_valid or (record.unit and not record.unit.ok):
            verdict = "[invalid]"
        elif record.unit and record.unit.tainted:
            verdict = f"[{record.unit.unit}?]"
        else:
            verdict = f"[{record.unit.unit if record.unit else UNIT_NONE}]"
        lines.append(f"{op.id} : {expr} = {result} {verdict}")
    answer = program.answer
    lines.append(
        f"Therefore : {format_rational(answer.value)} [{answer.unit}]"
    )
    return "\n".join(lines)


def program_answer(program: Program) -> TypedValue:
    return TypedValue(program.answer.value, unit=program.answer.unit)
