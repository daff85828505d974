"""Numeric kinds, unit tags, and exact typed values.

The value model is deliberately small. Every quantity is an exact rational
(`fractions.Fraction`) annotated with a numeric kind (natural, integer, or
rational, totally ordered by subtyping) and an atomic unit tag. Unit tags
form an open string-keyed vocabulary: a few built-ins plus whatever a corpus
declares. The propagation table for the four arithmetic operators lives here
so that every checker in the package shares one source of truth.

No floating point is used anywhere in this module: certification requires
exact equality, and binary floats cannot represent decimal inputs exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from fractions import Fraction
from pathlib import Path


class NumericKind(IntEnum):
    """Numeric kinds under total subtyping NAT <= INT <= RAT."""

    NAT = 0
    INT = 1
    RAT = 2

    @classmethod
    def narrowest(cls, value: Fraction) -> "NumericKind":
        """The smallest kind containing ``value``."""
        if value.denominator != 1:
            return cls.RAT
        return cls.NAT if value >= 0 else cls.INT


class ArithOp(Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"


def join_kind(a: NumericKind, b: NumericKind) -> NumericKind:
    """Least upper bound of two kinds (the wider of the two)."""
    return NumericKind(max(a, b))


def arith_result_kind(op: ArithOp, a: NumericKind, b: NumericKind) -> NumericKind:
    """Kind of an arithmetic result, accounting for closure.

    Naturals are not closed under subtraction, and only the rationals are
    closed under division, so those operators widen unconditionally.
    """
    joined = join_kind(a, b)
    if op is ArithOp.SUB:
        return join_kind(joined, NumericKind.INT)
    if op is ArithOp.DIV:
        return NumericKind.RAT
    return joined


# Unit tags are plain lowercase strings so they serialize trivially. NONE is
# the absent annotation and unifies with everything.
UNIT_NONE = "none"
UNIT_COUNT = "count"
UNIT_USD = "usd"
UNIT_METER = "meter"

BUILTIN_UNITS: tuple[str, ...] = (UNIT_NONE, UNIT_COUNT, UNIT_USD, UNIT_METER)


class UnitRegistry:
    """Extensible set of known unit tags.

    Built-ins are always present. Unknown tags encountered in input are
    legal everywhere (they are preserved verbatim); the registry only
    records which tags a deployment has declared, for reporting.
    """

    def __init__(self, extra: tuple[str, ...] = ()) -> None:
        self._known: set[str] = set(BUILTIN_UNITS)
        for tag in extra:
            self.register(tag)

    def register(self, tag: str) -> str:
        tag = normalize_unit(tag)
        self._known.add(tag)
        return tag

    def __contains__(self, tag: str) -> bool:
        return normalize_unit(tag) in self._known

    def known(self) -> tuple[str, ...]:
        return tuple(sorted(self._known))


def load_registry(path: str | Path) -> UnitRegistry:
    """Load a registry from a newline-delimited file of tag names."""
    registry = UnitRegistry()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            registry.register(line)
    return registry


def normalize_unit(tag: str | None) -> str:
    """Map missing/blank annotations to NONE; otherwise strip whitespace."""
    if tag is None:
        return UNIT_NONE
    tag = tag.strip()
    return tag if tag else UNIT_NONE


class UnitErrorKind(Enum):
    MISMATCHED_ADD = "mismatched_add"
    DIMENSIONAL_PRODUCT = "dimensional_product"
    INVALID_DIVISOR = "invalid_divisor"


@dataclass(frozen=True)
class UnitError:
    """A dimensional violation. Returned, never raised: an ill-typed step is
    a fact to record, not a crash."""

    kind: UnitErrorKind
    op: ArithOp
    left: str
    right: str

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.left} {self.op.value} {self.right}"


def propagate_unit(op: ArithOp, a: str, b: str) -> str | UnitError:
    """Result unit of ``a op b``, or a UnitError when the pairing is invalid.

    Rules: addition and subtraction demand identical units (NONE unifies with
    anything); COUNT is the multiplicative identity, so a product may carry
    at most one dimensioned tag; division is only defined by COUNT or NONE —
    dividing by a dimensioned quantity (e.g. usd) has no atomic result unit.
    """
    a = normalize_unit(a)
    b = normalize_unit(b)
    if op in (ArithOp.ADD, ArithOp.SUB):
        if a == b:
            return a
        if a == UNIT_NONE:
            return b
        if b == UNIT_NONE:
            return a
        return UnitError(UnitErrorKind.MISMATCHED_ADD, op, a, b)
    if op is ArithOp.MUL:
        dimensioned = [t for t in (a, b) if t not in (UNIT_NONE, UNIT_COUNT)]
        if len(dimensioned) == 2:
            return UnitError(UnitErrorKind.DIMENSIONAL_PRODUCT, op, a, b)
        if dimensioned:
            return dimensioned[0]
        return UNIT_COUNT if UNIT_COUNT in (a, b) else UNIT_NONE
    if op is ArithOp.DIV:
        if b in (UNIT_NONE, UNIT_COUNT):
            return a
        return UnitError(UnitErrorKind.INVALID_DIVISOR, op, a, b)
    raise ValueError(f"unknown arithmetic operator: {op!r}")


@dataclass(frozen=True)
class UnitOutcome:
    """Unit result of one checked operation, with taint tracking.

    An operation downstream of a unit failure sees a NONE tag (so it can
    still be checked) but inherits ``tainted`` so reports can flag that its
    unit is no longer trustworthy.
    """

    unit: str
    ok: bool
    tainted: bool
    error: UnitError | None = None


def propagate_unit_tainted(
    op: ArithOp, a: tuple[str, bool], b: tuple[str, bool]
) -> UnitOutcome:
    """Taint-aware propagation over (unit, tainted) operand pairs."""
    result = propagate_unit(op, a[0], b[0])
    taint_in = a[1] or b[1]
    if isinstance(result, UnitError):
        return UnitOutcome(UNIT_NONE, False, True, result)
    return UnitOutcome(result, True, taint_in)


def as_fraction(value) -> Fraction:
    """Coerce an exact representation to Fraction.

    Accepts int, Fraction, and strings ("6", "0.5", "2501/2"). Floats are
    rejected: they silently corrupt exactness (0.8 is not 4/5).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numeric values")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        raise TypeError(
            f"refusing float {value!r}: pass an int, Fraction, or decimal string"
        )
    raise TypeError(f"not an exact numeric value: {value!r}")


def format_rational(value: Fraction) -> str:
    """Canonical text form: integer when possible, else num/den."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class TypedValue:
    """An exact rational with its numeric kind and unit tag.

    The kind defaults to the narrowest kind containing the value; a wider
    kind may be requested explicitly (e.g. a subtraction result is INT even
    when it happens to be positive), but a narrower one is rejected.
    """

    value: Fraction
    kind: NumericKind = None  # type: ignore[assignment]  # filled in __post_init__
    unit: str = UNIT_NONE

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", as_fraction(self.value))
        narrow = NumericKind.narrowest(self.value)
        kind = self.kind if self.kind is not None else narrow
        if kind < narrow:
            raise ValueError(
                f"kind {kind.name} cannot hold {format_rational(self.value)}"
            )
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "unit", normalize_unit(self.unit))

    def widened(self, kind: NumericKind) -> "TypedValue":
        return TypedValue(self.value, join_kind(self.kind, kind), self.unit)

    def __str__(self) -> str:
        return f"{format_rational(self.value)} : {self.kind.name} [{self.unit}]"


@dataclass(frozen=True)
class TupleType:
    """Finite product of (kind, unit) element types, arity >= 1.

    Present for completeness of the type algebra; emitted programs are
    scalar-only, so nothing in the pipeline constructs tuples today.
    """

    elements: tuple[tuple[NumericKind, str], ...]

    def __post_init__(self) -> None:
        if len(self.elements) < 1:
            raise ValueError("tuple types need at least one element")
        norm = tuple((kind, normalize_unit(unit)) for kind, unit in self.elements)
        object.__setattr__(self, "elements", norm)

    @property
    def arity(self) -> int:
        return len(self.elements)
