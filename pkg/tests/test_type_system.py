from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cotcert.type_system import (
    ArithOp,
    NumericKind,
    TupleType,
    TypedValue,
    UNIT_COUNT,
    UNIT_METER,
    UNIT_NONE,
    UNIT_USD,
    UnitError,
    UnitErrorKind,
    UnitRegistry,
    arith_result_kind,
    as_fraction,
    format_rational,
    join_kind,
    load_registry,
    propagate_unit,
    propagate_unit_tainted,
)

TAGS = [UNIT_NONE, UNIT_COUNT, UNIT_USD, UNIT_METER]
KINDS = [NumericKind.NAT, NumericKind.INT, NumericKind.RAT]


def test_join_kind_examples():
    assert join_kind(NumericKind.NAT, NumericKind.NAT) is NumericKind.NAT
    assert join_kind(NumericKind.NAT, NumericKind.INT) is NumericKind.INT
    assert join_kind(NumericKind.INT, NumericKind.RAT) is NumericKind.RAT


@given(st.sampled_from(KINDS), st.sampled_from(KINDS))
def test_join_kind_commutative_idempotent(a, b):
    assert join_kind(a, b) is join_kind(b, a)
    assert join_kind(a, a) is a


def test_arith_result_kind():
    assert arith_result_kind(ArithOp.ADD, NumericKind.INT, NumericKind.INT) is NumericKind.INT
    assert arith_result_kind(ArithOp.SUB, NumericKind.NAT, NumericKind.NAT) is NumericKind.INT
    assert arith_result_kind(ArithOp.DIV, NumericKind.NAT, NumericKind.NAT) is NumericKind.RAT
    assert arith_result_kind(ArithOp.MUL, NumericKind.NAT, NumericKind.RAT) is NumericKind.RAT


def test_propagate_unit_golden_cells():
    assert propagate_unit(ArithOp.MUL, UNIT_COUNT, UNIT_COUNT) == UNIT_COUNT
    sub = propagate_unit(ArithOp.SUB, UNIT_USD, UNIT_COUNT)
    assert isinstance(sub, UnitError) and sub.kind is UnitErrorKind.MISMATCHED_ADD
    assert propagate_unit(ArithOp.MUL, UNIT_COUNT, UNIT_USD) == UNIT_USD
    div = propagate_unit(ArithOp.DIV, UNIT_USD, UNIT_USD)
    assert isinstance(div, UnitError) and div.kind is UnitErrorKind.INVALID_DIVISOR


@given(st.sampled_from(TAGS))
def test_add_same_unit_is_identity(tag):
    assert propagate_unit(ArithOp.ADD, tag, tag) == tag


@given(st.sampled_from(list(ArithOp)), st.sampled_from(TAGS), st.sampled_from(TAGS))
def test_propagate_unit_total(op, a, b):
    result = propagate_unit(op, a, b)
    assert isinstance(result, (str, UnitError))


def test_none_unifies_with_everything():
    for tag in TAGS:
        assert propagate_unit(ArithOp.ADD, UNIT_NONE, tag) == tag
        assert propagate_unit(ArithOp.ADD, tag, UNIT_NONE) == tag


def test_taint_propagation():
    outcome = propagate_unit_tainted(ArithOp.SUB, (UNIT_USD, False), (UNIT_COUNT, False))
    assert not outcome.ok and outcome.tainted and outcome.unit == UNIT_NONE
    downstream = propagate_unit_tainted(
        ArithOp.ADD, (UNIT_USD, False), (outcome.unit, outcome.tainted)
    )
    assert downstream.ok and downstream.tainted and downstream.unit == UNIT_USD


def test_typed_value_normalization():
    v = TypedValue(Fraction(6, 4))
    assert v.value == Fraction(3, 2)
    assert (v.value.numerator, v.value.denominator) == (3, 2)
    assert v.kind is NumericKind.RAT


def test_typed_value_narrowest_and_widening():
    assert TypedValue(Fraction(6)).kind is NumericKind.NAT
    assert TypedValue(Fraction(-6)).kind is NumericKind.INT
    widened = TypedValue(Fraction(6), NumericKind.RAT)
    assert widened.kind is NumericKind.RAT
    with pytest.raises(ValueError):
        TypedValue(Fraction(-6), NumericKind.NAT)


@given(st.integers(-10**6, 10**6), st.integers(1, 10**4))
def test_typed_value_lowest_terms(num, den):
    v = TypedValue(Fraction(num, den))
    from math import gcd

    assert gcd(v.value.numerator, v.value.denominator) in (0, 1)
    assert v.value.denominator > 0


def test_as_fraction_rejects_floats():
    with pytest.raises(TypeError):
        as_fraction(0.8)
    assert as_fraction("0.8") == Fraction(4, 5)
    assert as_fraction("2501/2") == Fraction(2501, 2)
    assert as_fraction(7) == Fraction(7)


def test_format_rational():
    assert format_rational(Fraction(187)) == "187"
    assert format_rational(Fraction(2501, 2)) == "2501/2"
    assert format_rational(Fraction(-1, 3)) == "-1/3"


def test_registry_builtin_and_file(tmp_path):
    registry = UnitRegistry()
    for tag in TAGS:
        assert tag in registry
    assert "furlong" not in registry
    config = tmp_path / "units.txt"
    config.write_text("furlong\n# comment\n\nliter\n", encoding="utf-8")
    loaded = load_registry(config)
    assert "furlong" in loaded and "liter" in loaded
    assert UNIT_COUNT in loaded  # built-ins survive


def test_unknown_tags_flow_through_propagation():
    assert propagate_unit(ArithOp.ADD, "furlong", "furlong") == "furlong"
    err = propagate_unit(ArithOp.DIV, UNIT_COUNT, "furlong")
    assert isinstance(err, UnitError)
    assert propagate_unit(ArithOp.MUL, "furlong", UNIT_COUNT) == "furlong"


def test_tuple_type_arity():
    t = TupleType(((NumericKind.NAT, UNIT_COUNT), (NumericKind.RAT, UNIT_USD)))
    assert t.arity == 2
    with pytest.raises(ValueError):
        TupleType(())
