"""Segmentation and rule labeling for natural-language traces.

The labeler is regex-first: an explicit rule head wins outright, a final
"#### <number>" marker forces the conclusion, an equation maps to its
operator's compute rule, and any remaining numeral-bearing line becomes a
number extraction. Lines that match nothing stay UNKNOWN and are simply
excluded from the graph (which costs coverage, not correctness).

An optional external labeler can be consulted for UNKNOWN lines. Its output
is advisory: the schema name is validated, arguments are always re-extracted
locally, and the stabilization overrides run last, so a confused or
adversarial fallback can never smuggle in arguments we did not read from the
line ourselves.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Protocol

from .rule_schemas import ARITH_RULES, NUMERAL_RE, RuleName
from .type_system import ArithOp, UNIT_NONE, UNIT_USD, format_rational

# Classification grammar. Unicode multiplication/minus/division signs are
# normalized to ASCII before any pattern runs.
RULE_HEAD_RE = re.compile(
    r"^(Extract-Number|Compute-(Add|Sub|Mul|Div)|Assume|Therefore)\s*:"
)
EQUATION_RE = re.compile(
    r"(-?\d[\d,]*\.?\d*)\s*([+\-*/×−])\s*(-?\d[\d,]*\.?\d*)\s*=\s*(-?\d[\d,]*\.?\d*)"
)
FINAL_MARKER_RE = re.compile(r"####\s*(\$)?\s*(-?\d[\d,]*\.?\d*)")

_NORMALIZE = str.maketrans({"×": "*", "−": "-", "÷": "/", "✕": "*", "∗": "*"})

_HEAD_TO_RULE = {
    "Extract-Number": RuleName.EXTRACT_NUMBER,
    "Compute-Add": RuleName.COMPUTE_ADD,
    "Compute-Sub": RuleName.COMPUTE_SUB,
    "Compute-Mul": RuleName.COMPUTE_MUL,
    "Compute-Div": RuleName.COMPUTE_DIV,
    "Assume": RuleName.ASSUME,
    "Therefore": RuleName.THEREFORE,
}

_OPERATOR_TO_RULE = {
    "+": RuleName.COMPUTE_ADD,
    "-": RuleName.COMPUTE_SUB,
    "*": RuleName.COMPUTE_MUL,
    "/": RuleName.COMPUTE_DIV,
}


@dataclass(frozen=True)
class LabeledStep:
    """One segmented line with its classification.

    ``args`` holds (value, unit) pairs extracted from the line itself;
    UNKNOWN steps never carry arguments.
    """

    raw_text: str
    schema: RuleName
    args: tuple[tuple[Fraction, str], ...] = ()
    claimed_result: Fraction | None = None
    line_index: int = 0

    def to_json_dict(self) -> dict:
        return {
            "raw_text": self.raw_text,
            "schema": self.schema.name,
            "args": [
                {"value": format_rational(v), "unit": u} for v, u in self.args
            ],
            "claimed_result": None
            if self.claimed_result is None
            else format_rational(self.claimed_result),
            "line_index": self.line_index,
        }


def segment(text: str) -> list[str]:
    """Split into trimmed, non-empty lines; CRLF and CR count as newlines."""
    normalized = text.replace("\r\n", "\n").replace("\r", "\n")
    return [line.strip() for line in normalized.split("\n") if line.strip()]


def normalize_line(line: str) -> str:
    return line.translate(_NORMALIZE)


def _parse_numeral_text(text: str) -> Fraction | None:
    cleaned = text.replace(",", "").rstrip(".")
    if not cleaned or cleaned == "-":
        return None
    try:
        return Fraction(cleaned)
    except ValueError:
        return None


def extract_numerals(line: str) -> tuple[tuple[Fraction, str], ...]:
    """All numerals in the line, each with usd unit when $-prefixed."""
    found = []
    for match in NUMERAL_RE.finditer(line):
        value = _parse_numeral_text(match.group(2))
        if value is not None:
            found.append((value, UNIT_USD if match.group(1) else UNIT_NONE))
    return tuple(found)


def _extract_equation(line: str):
    match = EQUATION_RE.search(line)
    if not match:
        return None
    a = _parse_numeral_text(match.group(1))
    b = _parse_numeral_text(match.group(3))
    c = _parse_numeral_text(match.group(4))
    if a is None or b is None or c is None:
        return None
    return _OPERATOR_TO_RULE[normalize_line(match.group(2))], a, b, c


def _therefore_claim(line: str) -> Fraction | None:
    marker = FINAL_MARKER_RE.search(line)
    if marker:
        claim = _parse_numeral_text(marker.group(2))
        if claim is not None:
            return claim
    numerals = extract_numerals(line)
    return numerals[-1][0] if numerals else None


def classify_step(line: str, line_index: int = 0) -> LabeledStep:
    """Classify one non-empty line. Pure: equal lines, equal labels.

    Priority: explicit rule head, then a "#### n" final marker, then an
    equation, then an Assume prefix, then any bare numeral (extraction).
    """
    raw = line
    line = normalize_line(line.strip())

    head = RULE_HEAD_RE.match(line)
    if head:
        rule = _HEAD_TO_RULE[head.group(1)]
        rest = line[head.end():].strip()
        return _with_arguments(raw, rule, rest, line_index)

    if FINAL_MARKER_RE.search(line) and _therefore_claim(line) is not None:
        return LabeledStep(
            raw, RuleName.THEREFORE, (), _therefore_claim(line), line_index
        )

    equation = _extract_equation(line)
    if equation:
        rule, a, b, c = equation
        return LabeledStep(
            raw, rule, ((a, UNIT_NONE), (b, UNIT_NONE)), c, line_index
        )

    if re.match(r"^Assume\b", line):
        return LabeledStep(raw, RuleName.ASSUME, (), None, line_index)

    numerals = extract_numerals(line)
    if numerals:
        return LabeledStep(raw, RuleName.EXTRACT_NUMBER, numerals, None, line_index)

    return LabeledStep(raw, RuleName.UNKNOWN, (), None, line_index)


def _with_arguments(
    raw: str, rule: RuleName, rest: str, line_index: int
) -> LabeledStep:
    """Re-derive arguments for a known schema from the line body."""
    if rule is RuleName.THEREFORE:
        return LabeledStep(raw, rule, (), _therefore_claim(rest), line_index)
    if rule is RuleName.ASSUME:
        return LabeledStep(raw, rule, (), None, line_index)
    if rule is RuleName.EXTRACT_NUMBER:
        numerals = extract_numerals(rest)
        return LabeledStep(raw, rule, numerals, None, line_index)
    # Compute heads: prefer the equation; fall back to bare numerals.
    equation = _extract_equation(rest)
    if equation:
        _, a, b, c = equation
        return LabeledStep(raw, rule, ((a, UNIT_NONE), (b, UNIT_NONE)), c, line_index)
    numerals = extract_numerals(rest)
    claimed = numerals[-1][0] if len(numerals) >= 3 else None
    args = numerals[:2]
    return LabeledStep(raw, rule, args, claimed, line_index)


class ExternalLabeler(Protocol):
    """Anything that proposes a schema name for a line (e.g. an LLM)."""

    def __call__(self, line: str) -> str: ...


class FallbackUnavailable(RuntimeError):
    """Raised by fallback labelers that cannot answer; never fatal here."""


def classify_with_fallback(
    line: str, fallback: ExternalLabeler, line_index: int = 0
) -> LabeledStep:
    """Classify, consulting ``fallback`` only when regexes say UNKNOWN.

    The fallback proposes a schema *name*; arguments are re-extracted from
    the line locally. Two stabilization overrides apply last regardless of
    what the fallback said: a line containing "therefore" is forced to the
    conclusion rule, and a line containing an equation is forced to the
    matching compute rule.
    """
    step = classify_step(line, line_index)
    if step.schema is RuleName.UNKNOWN:
        try:
            proposed = fallback(line)
        except FallbackUnavailable:
            proposed = None
        except Exception:
            proposed = None
        rule = _lookup_rule_name(proposed) if proposed else None
        if rule is not None and rule is not RuleName.UNKNOWN:
            step = _with_arguments(line, rule, normalize_line(line), line_index)
    return _stabilize(step, line_index)


def _stabilize(step: LabeledStep, line_index: int) -> LabeledStep:
    line = normalize_line(step.raw_text)
    if "therefore" in line.lower():
        if step.schema is not RuleName.THEREFORE:
            return LabeledStep(
                step.raw_text,
                RuleName.THEREFORE,
                (),
                _therefore_claim(line),
                line_index,
            )
        return step
    equation = _extract_equation(line)
    if equation and step.schema is not equation[0]:
        rule, a, b, c = equation
        return LabeledStep(
            step.raw_text, rule, ((a, UNIT_NONE), (b, UNIT_NONE)), c, line_index
        )
    return step


def _lookup_rule_name(name: str) -> RuleName | None:
    cleaned = name.strip().lower().replace("_", "-")
    for rule in RuleName:
        if rule.value.lower() == cleaned or rule.name.lower().replace("_", "-") == cleaned:
            return rule
    return None


def label_text(
    text: str, fallback: ExternalLabeler | None = None
) -> list[LabeledStep]:
    """Segment and classify a whole trace."""
    lines = segment(text)
    if fallback is None:
        return [classify_step(line, i) for i, line in enumerate(lines)]
    return [classify_with_fallback(line, fallback, i) for i, line in enumerate(lines)]


def steps_to_jsonl(steps: list[LabeledStep]) -> str:
    return "\n".join(json.dumps(s.to_json_dict(), ensure_ascii=False) for s in steps)
