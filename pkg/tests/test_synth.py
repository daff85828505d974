import json
import random
from fractions import Fraction

import pytest

from cotcert.harness import certify_records, read_runs_jsonl
from cotcert.program_model import execute_program, parse_program, serialize_program
from cotcert.metrics import compute_metrics
from cotcert.synth import (
    FaultKind,
    FaultSpec,
    corpus_to_jsonl,
    generate_program,
    inject_answer_mismatch,
    inject_arith_corrupt,
    inject_dangling_input,
    inject_unit_swap,
    make_corpus,
    render_cot,
)
from cotcert.step_labeler import label_text
from cotcert.trg import build_from_program, build_from_steps


def test_generated_programs_are_clean():
    for seed in range(50):
        program = generate_program(random.Random(seed))
        execution = execute_program(program)
        assert execution.consistent
        assert all(r.structurally_valid for r in execution.records)
        assert all(r.unit and r.unit.ok for r in execution.records)
        assert all(r.value.denominator == 1 for r in execution.records if r.value)
        assert 1 <= len(program.ops) <= 5
        m = compute_metrics(build_from_program(program))
        assert (m.coverage, m.evr, m.uvr, m.pe) == (1, 1, 1, True)


def test_clean_corpus_every_run_strict_certified_and_correct():
    records = make_corpus(40, 3, [], seed=11)
    parsed, errors = read_runs_jsonl(corpus_to_jsonl(records))
    assert not errors
    processed, report = certify_records(parsed)
    assert all(p.result.decisions["strict"].accepted for p in processed)
    assert all(p.result.correct for p in processed)
    assert report.summaries["strict"].question_coverage == 1


def test_unit_swap_always_breaks_uvr():
    records = make_corpus(60, 2, [FaultSpec(FaultKind.UNIT_SWAP, 1.0)], seed=7)
    assert all(r["fault"] == "unit_swap" for r in records)
    parsed, _ = read_runs_jsonl(corpus_to_jsonl(records))
    processed, _ = certify_records(parsed)
    for p in processed:
        assert p.result.metrics.uvr < 1, p.result.run_id
        # Numbers are untouched: the answer is still the gold one.
        assert p.result.correct
        assert p.result.consistent


def test_unit_swap_signature_is_uvr_only():
    program = generate_program(random.Random(3))
    swapped = inject_unit_swap(program, random.Random(0))
    assert swapped is not None
    m = compute_metrics(build_from_program(swapped))
    assert m.uvr < 1
    assert m.coverage == 1 and m.evr == 1 and m.pe


def test_arith_corrupt_breaks_consistency_and_answer():
    for seed in range(25):
        rng = random.Random(seed)
        program = generate_program(rng)
        gold = program.answer.value
        text = inject_arith_corrupt(program, gold, rng)
        steps = label_text(text)
        g = build_from_steps(steps)
        assert not g.consistent
        claims = [
            s.claimed_result for s in steps if s.schema.name == "THEREFORE"
        ]
        assert claims and claims[-1] != gold
        # Exactly one equation disagrees with its own arithmetic.
        bad = [
            r for r in g.rule_nodes.values() if r.claim_consistent is False
        ]
        assert len(bad) == 1


def test_clean_cot_rendering_certifies():
    program = generate_program(random.Random(9))
    steps = label_text(render_cot(program))
    g = build_from_steps(steps)
    m = compute_metrics(g)
    assert (m.coverage, m.evr, m.pe) == (1, 1, True)
    assert g.consistent


def test_answer_mismatch_breaks_consistency_only():
    program = generate_program(random.Random(4))
    broken = inject_answer_mismatch(program, random.Random(0))
    assert broken.answer.value != program.answer.value
    execution = execute_program(broken)
    assert not execution.consistent
    m = compute_metrics(build_from_program(broken))
    assert m.evr == 1 and m.uvr == 1 and m.pe  # structure intact


def test_dangling_input_is_unparseable():
    program = generate_program(random.Random(5))
    broken = inject_dangling_input(program, random.Random(0))
    from cotcert.program_model import ProgramParseError

    with pytest.raises(ProgramParseError):
        parse_program(serialize_program(broken))


def test_corpus_rate_validation():
    with pytest.raises(ValueError):
        FaultSpec(FaultKind.UNIT_SWAP, 1.5)
    with pytest.raises(ValueError):
        make_corpus(
            2,
            1,
            [FaultSpec(FaultKind.UNIT_SWAP, 0.6), FaultSpec(FaultKind.ARITH_CORRUPT, 0.6)],
            seed=1,
        )
    with pytest.raises(ValueError):
        make_corpus(0, 1, [], seed=1)


def test_corpus_determinism_and_shape():
    faults = [FaultSpec(FaultKind.ANSWER_MISMATCH, 0.3)]
    a = corpus_to_jsonl(make_corpus(20, 3, faults, seed=123))
    b = corpus_to_jsonl(make_corpus(20, 3, faults, seed=123))
    assert a.encode() == b.encode()
    c = corpus_to_jsonl(make_corpus(20, 3, faults, seed=124))
    assert a != c
    rows = [json.loads(line) for line in a.splitlines()]
    assert len(rows) == 60
    assert all(set(row) >= {"question_id", "run_id", "gold_answer"} for row in rows)
    # Runs of one question share its base program unless faulted.
    clean = [r for r in rows if r["fault"] is None and r["question_id"] == rows[0]["question_id"]]
    if len(clean) > 1:
        assert all(r["program"] == clean[0]["program"] for r in clean)


def test_fault_rates_roughly_respected():
    faults = [
        FaultSpec(FaultKind.UNIT_SWAP, 0.2),
        FaultSpec(FaultKind.ANSWER_MISMATCH, 0.2),
    ]
    records = make_corpus(150, 2, faults, seed=77)
    n = len(records)
    swaps = sum(1 for r in records if r["fault"] == "unit_swap")
    mismatches = sum(1 for r in records if r["fault"] == "answer_mismatch")
    assert 0.12 < swaps / n < 0.28
    assert 0.12 < mismatches / n < 0.28
