"""Typed inference primitives and per-application checking.

Each rule schema is a small typed combinator: number extraction, the four
arithmetic operators, list summation, hypothesis introduction, and the final
"therefore" step that turns a numeric value into an answer. Checking is
two-layered on purpose: structural preconditions (arity, numeric inputs,
nonzero divisor) are separate from unit validity, because the two feed
different certification ratios downstream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .type_system import (
    ArithOp,
    NumericKind,
    TypedValue,
    UNIT_NONE,
    UNIT_USD,
    UnitError,
    arith_result_kind,
    as_fraction,
    propagate_unit,
)


class RuleName(Enum):
    EXTRACT_NUMBER = "Extract-Number"
    COMPUTE_ADD = "Compute-Add"
    COMPUTE_SUB = "Compute-Sub"
    COMPUTE_MUL = "Compute-Mul"
    COMPUTE_DIV = "Compute-Div"
    SUMLIST = "Sumlist"
    ASSUME = "Assume"
    THEREFORE = "Therefore"
    UNKNOWN = "Unknown"


ARITH_RULES: dict[RuleName, ArithOp] = {
    RuleName.COMPUTE_ADD: ArithOp.ADD,
    RuleName.COMPUTE_SUB: ArithOp.SUB,
    RuleName.COMPUTE_MUL: ArithOp.MUL,
    RuleName.COMPUTE_DIV: ArithOp.DIV,
}


@dataclass(frozen=True)
class RuleSchema:
    """Signature of one inference primitive.

    ``arity`` is None for the single variadic schema (Sumlist, arity >= 1).
    Signatures are descriptive strings; the checker enforces them directly.
    """

    name: RuleName
    input_signature: tuple[str, ...]
    output_type: str
    arity: int | None


SCHEMAS: dict[RuleName, RuleSchema] = {
    RuleName.EXTRACT_NUMBER: RuleSchema(
        RuleName.EXTRACT_NUMBER, ("string",), "rational", 1
    ),
    RuleName.COMPUTE_ADD: RuleSchema(
        RuleName.COMPUTE_ADD, ("rational", "rational"), "rational", 2
    ),
    RuleName.COMPUTE_SUB: RuleSchema(
        RuleName.COMPUTE_SUB, ("rational", "rational"), "rational", 2
    ),
    RuleName.COMPUTE_MUL: RuleSchema(
        RuleName.COMPUTE_MUL, ("rational", "rational"), "rational", 2
    ),
    RuleName.COMPUTE_DIV: RuleSchema(
        RuleName.COMPUTE_DIV, ("rational", "rational"), "rational", 2
    ),
    RuleName.SUMLIST: RuleSchema(RuleName.SUMLIST, ("rational*",), "rational", None),
    RuleName.ASSUME: RuleSchema(RuleName.ASSUME, ("proposition",), "hypothesis", 1),
    RuleName.THEREFORE: RuleSchema(RuleName.THEREFORE, ("rational",), "answer", 1),
}


@dataclass(frozen=True)
class Hypothesis:
    """Non-numeric statement introduced by Assume; never feeds arithmetic."""

    proposition: str


@dataclass(frozen=True)
class RuleApplication:
    """One instantiated rule: a schema plus concrete inputs.

    Inputs are TypedValues for numeric rules and raw strings for
    Extract-Number / Assume. ``claimed_output`` is the value the trace
    asserted for this step, when it asserted one.
    """

    schema: RuleName
    inputs: tuple
    claimed_output: TypedValue | None = None
    source_span: str | None = None


@dataclass(frozen=True)
class PrecondReport:
    """Outcome of precondition checking for one application.

    ``satisfied`` covers structural preconditions only. The unit outcome is
    carried separately (``unit_ok`` is None when the schema is not
    arithmetic or units could not be evaluated).
    """

    satisfied: bool
    reasons: tuple[str, ...] = ()
    unit_ok: bool | None = None
    unit_error: UnitError | None = None
    result_kind: NumericKind | None = None


@dataclass(frozen=True)
class StepInvalid:
    """Failure record for apply_rule; exactly one of the two causes is set."""

    reason: str
    unit_error: UnitError | None = None


# Numerals allow digit grouping commas, one decimal point, an optional sign,
# and an optional leading currency symbol. The lookbehind keeps digits that
# are part of identifiers (v1, t2) from matching.
NUMERAL_RE = re.compile(r"(?<![A-Za-z0-9_.])(\$)?\s*(-?\d[\d,]*\.?\d*)")


def parse_numeral(text: str) -> TypedValue | None:
    """First numeral in ``text`` as a TypedValue, or None.

    A leading currency symbol assigns the usd unit; otherwise the value is
    unitless. Decimal strings convert exactly (base-10), never through
    binary floating point.
    """
    match = NUMERAL_RE.search(text)
    if not match:
        return None
    currency, digits = match.group(1), match.group(2)
    cleaned = digits.replace(",", "").rstrip(".")
    if not cleaned or cleaned == "-":
        return None
    value = Fraction(cleaned)
    return TypedValue(value, unit=UNIT_USD if currency else UNIT_NONE)


def _numeric_inputs(app: RuleApplication) -> list[str]:
    problems = []
    for i, item in enumerate(app.inputs):
        if not isinstance(item, TypedValue):
            problems.append(f"input {i} is not a numeric value")
    return problems


def check_preconditions(app: RuleApplication) -> PrecondReport:
    """Check one application's structural preconditions.

    Arithmetic rules additionally get a unit verdict, reported separately
    from ``satisfied`` so dimensional failures do not masquerade as
    structural ones.
    """
    schema = SCHEMAS.get(app.schema)
    if schema is None:
        return PrecondReport(False, (f"no schema named {app.schema}",))
    reasons: list[str] = []
    n = len(app.inputs)
    if schema.arity is None:
        if n < 1:
            reasons.append("sumlist needs at least one input")
    elif n != schema.arity:
        reasons.append(f"{schema.name.value} takes {schema.arity} inputs, got {n}")

    if app.schema in (RuleName.EXTRACT_NUMBER, RuleName.ASSUME):
        if n == 1 and not isinstance(app.inputs[0], str):
            reasons.append("input must be a raw string")
        if app.schema is RuleName.EXTRACT_NUMBER and not reasons:
            if parse_numeral(app.inputs[0]) is None:
                reasons.append("no numeral found in input")
        return PrecondReport(not reasons, tuple(reasons))

    reasons.extend(_numeric_inputs(app))
    if reasons:
        return PrecondReport(False, tuple(reasons))

    if app.schema is RuleName.THEREFORE:
        return PrecondReport(True)

    if app.schema is RuleName.SUMLIST:
        kind = NumericKind.NAT
        unit_ok: bool | None = True
        unit_error = None
        unit = app.inputs[0].unit
        for item in app.inputs:
            kind = arith_result_kind(ArithOp.ADD, kind, item.kind)
        for item in app.inputs[1:]:
            outcome = propagate_unit(ArithOp.ADD, unit, item.unit)
            if isinstance(outcome, UnitError):
                unit_ok, unit_error = False, outcome
                break
            unit = outcome
        return PrecondReport(True, (), unit_ok, unit_error, kind)

    op = ARITH_RULES[app.schema]
    a, b = app.inputs
    if op is ArithOp.DIV and b.value == 0:
        return PrecondReport(False, ("division by zero",))
    outcome = propagate_unit(op, a.unit, b.unit)
    unit_ok = not isinstance(outcome, UnitError)
    return PrecondReport(
        True,
        (),
        unit_ok,
        outcome if isinstance(outcome, UnitError) else None,
        arith_result_kind(op, a.kind, b.kind),
    )


def compute_value(app: RuleApplication) -> Fraction:
    """Exact numeric result of a structurally valid arithmetic application."""
    if app.schema is RuleName.SUMLIST:
        return sum((item.value for item in app.inputs), Fraction(0))
    op = ARITH_RULES[app.schema]
    a, b = app.inputs[0].value, app.inputs[1].value
    if op is ArithOp.ADD:
        return a + b
    if op is ArithOp.SUB:
        return a - b
    if op is ArithOp.MUL:
        return a * b
    return a / b


def apply_rule(app: RuleApplication) -> TypedValue | Hypothesis | StepInvalid:
    """Run one rule application end to end.

    Returns the typed output on success. Any failing precondition or unit
    error yields StepInvalid instead — the two outcomes are exclusive, and
    callers must record invalid steps rather than crash on them.
    """
    report = check_preconditions(app)
    if not report.satisfied:
        return StepInvalid("; ".join(report.reasons) or "precondition failed")

    if app.schema is RuleName.EXTRACT_NUMBER:
        parsed = parse_numeral(app.inputs[0])
        assert parsed is not None  # guaranteed by preconditions
        return parsed
    if app.schema is RuleName.ASSUME:
        return Hypothesis(app.inputs[0])
    if app.schema is RuleName.THEREFORE:
        return app.inputs[0]

    if report.unit_ok is False:
        return StepInvalid(str(report.unit_error), report.unit_error)

    value = compute_value(app)
    unit = app.inputs[0].unit
    if app.schema is RuleName.SUMLIST:
        for item in app.inputs[1:]:
            unit = propagate_unit(ArithOp.ADD, unit, item.unit)
    else:
        op = ARITH_RULES[app.schema]
        unit = propagate_unit(op, app.inputs[0].unit, app.inputs[1].unit)
    assert not isinstance(unit, UnitError)
    return TypedValue(value, report.result_kind, unit)


def check_claimed_output(app: RuleApplication, computed: TypedValue) -> bool:
    """True iff the trace's claimed value equals the computed one exactly.

    Comparison is over normalized rationals, so "0.5" and 1/2 agree.
    """
    if app.claimed_output is None:
        return False
    return as_fraction(app.claimed_output.value) == computed.value
