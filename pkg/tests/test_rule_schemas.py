from decimal import Decimal
from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from cotcert.rule_schemas import (
    Hypothesis,
    RuleApplication,
    RuleName,
    SCHEMAS,
    StepInvalid,
    apply_rule,
    check_claimed_output,
    check_preconditions,
    parse_numeral,
)
from cotcert.type_system import NumericKind, TypedValue, UNIT_COUNT, UNIT_NONE, UNIT_USD


def tv(value, unit=UNIT_NONE, kind=None):
    return TypedValue(Fraction(value), kind, unit)


def test_schema_table_shapes():
    assert SCHEMAS[RuleName.SUMLIST].arity is None
    assert SCHEMAS[RuleName.THEREFORE].arity == 1
    assert SCHEMAS[RuleName.THEREFORE].output_type == "answer"
    for name, schema in SCHEMAS.items():
        assert schema.name is name


def test_preconditions_add_ints():
    report = check_preconditions(
        RuleApplication(
            RuleName.COMPUTE_ADD,
            (tv(6, kind=NumericKind.INT), tv(7, kind=NumericKind.INT)),
        )
    )
    assert report.satisfied
    assert report.result_kind is NumericKind.INT
    assert report.unit_ok is True


def test_preconditions_zero_divisor():
    report = check_preconditions(
        RuleApplication(RuleName.COMPUTE_DIV, (tv(5), tv(0)))
    )
    assert not report.satisfied
    assert "zero" in report.reasons[0]


def test_preconditions_unit_failure_is_not_structural():
    report = check_preconditions(
        RuleApplication(RuleName.COMPUTE_SUB, (tv(500, UNIT_USD), tv(60, UNIT_COUNT)))
    )
    assert report.satisfied  # structurally fine
    assert report.unit_ok is False
    assert report.unit_error is not None


def test_preconditions_arity_and_non_numeric():
    bad_arity = check_preconditions(
        RuleApplication(RuleName.COMPUTE_ADD, (tv(1),))
    )
    assert not bad_arity.satisfied
    bad_input = check_preconditions(
        RuleApplication(RuleName.COMPUTE_ADD, (tv(1), "two"))
    )
    assert not bad_input.satisfied


def test_apply_rule_golden_steps():
    out = apply_rule(
        RuleApplication(RuleName.COMPUTE_MUL, (tv(6, UNIT_COUNT), tv(20, UNIT_COUNT)))
    )
    assert isinstance(out, TypedValue)
    assert out.value == 120 and out.unit == UNIT_COUNT
    out2 = apply_rule(
        RuleApplication(RuleName.COMPUTE_ADD, (tv(120, UNIT_COUNT), tv(67, UNIT_COUNT)))
    )
    assert out2.value == 187 and out2.unit == UNIT_COUNT


def test_apply_rule_failures_are_exclusive():
    invalid = apply_rule(RuleApplication(RuleName.COMPUTE_DIV, (tv(5), tv(0))))
    assert isinstance(invalid, StepInvalid)
    unit_bad = apply_rule(
        RuleApplication(RuleName.COMPUTE_SUB, (tv(500, UNIT_USD), tv(60, UNIT_COUNT)))
    )
    assert isinstance(unit_bad, StepInvalid)
    assert unit_bad.unit_error is not None


def test_apply_rule_extract_number():
    out = apply_rule(RuleApplication(RuleName.EXTRACT_NUMBER, ("$1,250.50",)))
    assert isinstance(out, TypedValue)
    assert out.value == Fraction(2501, 2)
    assert out.kind is NumericKind.RAT
    assert out.unit == UNIT_USD


def test_apply_rule_assume_and_therefore():
    hyp = apply_rule(RuleApplication(RuleName.ASSUME, ("prices are constant",)))
    assert isinstance(hyp, Hypothesis)
    value = tv(187, UNIT_COUNT)
    assert apply_rule(RuleApplication(RuleName.THEREFORE, (value,))) == value


def test_sumlist_singleton_and_fold():
    single = apply_rule(RuleApplication(RuleName.SUMLIST, (tv(5, UNIT_COUNT),)))
    assert single.value == 5 and single.unit == UNIT_COUNT
    items = [tv(1, UNIT_COUNT), tv(2, UNIT_COUNT), tv(3, UNIT_COUNT)]
    total = apply_rule(RuleApplication(RuleName.SUMLIST, tuple(items)))
    fold = items[0]
    for item in items[1:]:
        fold = apply_rule(RuleApplication(RuleName.COMPUTE_ADD, (fold, item)))
    assert total.value == fold.value == 6
    assert total.unit == fold.unit == UNIT_COUNT


@given(
    st.integers(-1000, 1000),
    st.integers(-1000, 1000),
    st.sampled_from([UNIT_NONE, UNIT_COUNT, UNIT_USD]),
)
def test_add_commutative(a, b, unit):
    left = apply_rule(RuleApplication(RuleName.COMPUTE_ADD, (tv(a, unit), tv(b, unit))))
    right = apply_rule(RuleApplication(RuleName.COMPUTE_ADD, (tv(b, unit), tv(a, unit))))
    assert left == right


@given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6))
def test_failing_preconditions_never_yield_values(a, b):
    app = RuleApplication(RuleName.COMPUTE_DIV, (tv(a), tv(b)))
    result = apply_rule(app)
    if b == 0:
        assert isinstance(result, StepInvalid)
    else:
        assert isinstance(result, TypedValue)
        assert result.value == Fraction(a, b)
        assert result.kind is NumericKind.RAT


def test_check_claimed_output():
    app_ok = RuleApplication(RuleName.COMPUTE_ADD, (tv(120), tv(67)), tv(187))
    assert check_claimed_output(app_ok, tv(187))
    app_bad = RuleApplication(RuleName.COMPUTE_ADD, (tv(6), tv(7)), tv(13))
    assert not check_claimed_output(app_bad, tv(12))
    half = RuleApplication(RuleName.COMPUTE_DIV, (tv(1), tv(2)), tv("0.5"))
    assert check_claimed_output(half, tv(Fraction(1, 2)))


# 50-case numeral table, checked against an independent decimal parser.
NUMERAL_CASES = [
    "6", "20", "67", "187", "0", "1", "12", "-3", "-40", "999",
    "1,000", "2,500", "12,345", "1,250", "10,000,000", "-1,234",
    "0.5", "0.25", "3.5", "12.50", "2.75", "100.125", "-0.5", "-12.25",
    "1,250.50", "9,999.99", "-1,000.01", "123,456.789",
    "$5", "$60", "$500", "$1,250.50", "$0.99", "$12.50", "$-40",
    "$7,000", "$3.333", "$250,000",
    "6.", "42 apples", "7 days a week", "$19.99 per unit",
    "003", "1,2", "0.0", "-0", "$0", "5.000", "808", "2501",
]


def _oracle(text: str) -> Fraction:
    cleaned = text.replace("$", "").replace(",", "").strip()
    cleaned = cleaned.split()[0].rstrip(".")
    return Fraction(Decimal(cleaned))


def test_numeral_table_against_decimal_oracle():
    assert len(NUMERAL_CASES) == 50
    for text in NUMERAL_CASES:
        parsed = parse_numeral(text)
        assert parsed is not None, text
        assert parsed.value == _oracle(text), text
        assert parsed.unit == (UNIT_USD if "$" in text else UNIT_NONE), text


def test_numeral_absent():
    assert parse_numeral("no digits here") is None
    report = check_preconditions(
        RuleApplication(RuleName.EXTRACT_NUMBER, ("no digits here",))
    )
    assert not report.satisfied
