"""Seeded synthetic corpora with targeted fault injection.

Clean generation produces small straight-line arithmetic programs (integer
valued by construction, dimensionally valid, answer equal to the computed
final value) so that every clean run is certifiable and correct. Each fault
then breaks exactly one certification signal:

* UNIT_SWAP   — flips premise units until some operation fails dimensional
                checking; the numbers (and the answer) stay correct.
* ARITH_CORRUPT — re-renders the run as a rule-headed trace and corrupts one
                claimed intermediate result, carrying the error through to a
                wrong final answer; structure stays intact.
* DANGLING_INPUT — rewires an operation input to an undeclared id, making
                the run unparseable.
* ANSWER_MISMATCH — declares a final answer the operations do not compute.

Faults are mutually exclusive per run (one categorical draw), so their
rates are the expected fractions of affected runs. Everything is driven by
`random.Random(seed-string)`, which is process-independent: the same seed
yields byte-identical corpora anywhere.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

from .metrics import compute_metrics
from .program_model import (
    Answer,
    Premise,
    Program,
    ProgramOp,
    execute_program,
    serialize_program,
)
from .trg import build_from_program
from .type_system import (
    ArithOp,
    UNIT_COUNT,
    UNIT_USD,
    UnitError,
    format_rational,
    propagate_unit,
)


class FaultKind(Enum):
    UNIT_SWAP = "unit_swap"
    ARITH_CORRUPT = "arith_corrupt"
    DANGLING_INPUT = "dangling_input"
    ANSWER_MISMATCH = "answer_mismatch"


@dataclass(frozen=True)
class FaultSpec:
    fault: FaultKind
    rate: float

    def __post_init__(self) -> None:
        if not 0 <= self.rate <= 1:
            raise ValueError(f"fault rate out of [0,1]: {self.rate}")


def _draw_fault(rng: random.Random, faults: list[FaultSpec]) -> FaultKind | None:
    total = sum(spec.rate for spec in faults)
    if total > 1 + 1e-12:
        raise ValueError(f"fault rates sum to {total} > 1")
    u = rng.random()
    acc = 0.0
    for spec in faults:
        acc += spec.rate
        if u < acc:
            return spec.fault
    return None


_OP_WEIGHTS = (("add", 35), ("sub", 25), ("mul", 30), ("div", 10))


def _weighted_op(rng: random.Random) -> str:
    total = sum(w for _, w in _OP_WEIGHTS)
    pick = rng.randrange(total)
    acc = 0
    for name, weight in _OP_WEIGHTS:
        acc += weight
        if pick < acc:
            return name
    return "add"


def generate_program(
    rng: random.Random, min_ops: int = 1, max_ops: int = 5
) -> Program:
    """One clean program: integer-valued, unit-valid, self-consistent."""
    n_premises = rng.randint(2, 4)
    premises = []
    for i in range(n_premises):
        # First two share a unit so an addition partner always exists.
        unit = UNIT_COUNT if i < 2 or rng.random() < 0.7 else UNIT_USD
        premises.append(Premise(f"v{i + 1}", Fraction(rng.randint(2, 12)), unit))

    nodes: list[tuple[str, Fraction, str]] = [
        (p.id, p.value, p.unit) for p in premises
    ]
    ops: list[ProgramOp] = []
    n_ops = rng.randint(min_ops, max_ops)
    for i in range(n_ops):
        if i == 0:
            # Combine the two distinct same-unit premises first: this keeps a
            # seam a single unit flip is guaranteed to break.
            name = rng.choice(("add", "sub"))
            a, b = nodes[0], nodes[1]
            value = a[1] + b[1] if name == "add" else a[1] - b[1]
            if value == 0:
                name, value = "add", a[1] + b[1]
            ops.append(ProgramOp("t1", name, (a[0], b[0]), "t1"))
            nodes.append(("t1", value, a[2]))
            continue
        op = _pick_op(rng, nodes, i)
        ops.append(op[0])
        nodes.append(op[1])
    final_id, final_value, final_unit = nodes[-1]
    answer = Answer(final_value, final_unit)
    return Program(tuple(premises), tuple(ops), answer)


def _pick_op(
    rng: random.Random, nodes: list[tuple[str, Fraction, str]], index: int
) -> tuple[ProgramOp, tuple[str, Fraction, str]]:
    out_id = f"t{index + 1}"
    for _ in range(40):
        name = _weighted_op(rng)
        # Chain off the most recent node often enough to keep paths deep.
        if index > 0 and rng.random() < 0.6:
            a = nodes[-1]
        else:
            a = rng.choice(nodes)
        b = rng.choice(nodes)
        candidate = _try_op(name, a, b)
        if candidate is not None:
            value, unit = candidate
            op = ProgramOp(out_id, name, (a[0], b[0]), out_id)
            return op, (out_id, value, unit)
    # Guaranteed fallback: add the first two premises (same unit).
    a, b = nodes[0], nodes[1]
    op = ProgramOp(out_id, "add", (a[0], b[0]), out_id)
    return op, (out_id, a[1] + b[1], a[2])


def _try_op(
    name: str, a: tuple[str, Fraction, str], b: tuple[str, Fraction, str]
) -> tuple[Fraction, str] | None:
    unit = propagate_unit(ArithOp(name), a[2], b[2])
    if isinstance(unit, UnitError):
        return None
    if name == "div":
        if b[1] == 0 or a[1] % b[1] != 0:
            return None
        value = a[1] / b[1]
    elif name == "add":
        value = a[1] + b[1]
    elif name == "sub":
        value = a[1] - b[1]
    else:
        value = a[1] * b[1]
    if value == 0:  # zero values absorb corruptions downstream
        return None
    return value, unit


# -- fault injectors --------------------------------------------------------------


def _flip(unit: str) -> str:
    return UNIT_USD if unit == UNIT_COUNT else UNIT_COUNT


def _uvr(program: Program) -> Fraction:
    return compute_metrics(build_from_program(program)).uvr


def inject_unit_swap(program: Program, rng: random.Random) -> Program | None:
    """Flip premise units (one, then two) until UVR drops below 1."""
    indices = list(range(len(program.premises)))
    singles = [(i,) for i in indices]
    pairs = [(i, j) for i in indices for j in indices if i < j]
    for combo in singles + pairs:
        premises = list(program.premises)
        for i in combo:
            premises[i] = replace(premises[i], unit=_flip(premises[i].unit))
        candidate = replace(program, premises=tuple(premises))
        if _uvr(candidate) < 1:
            return candidate
    return None


def render_cot(program: Program) -> str:
    """Rule-headed trace equivalent to the program (claims all consistent)."""
    lines, _ = _cot_lines(program, corrupt_at=None, delta=0)
    return "\n".join(lines)


def _cot_lines(
    program: Program, corrupt_at: int | None, delta: int
) -> tuple[list[str], Fraction]:
    symbol = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
    chain: dict[str, Fraction] = {}
    lines = []
    for p in program.premises:
        prefix = "$" if p.unit == UNIT_USD else ""
        lines.append(f"Extract-Number: {prefix}{format_rational(p.value)}")
        chain[p.id] = p.value
    head = {
        "add": "Compute-Add",
        "sub": "Compute-Sub",
        "mul": "Compute-Mul",
        "div": "Compute-Div",
    }
    final = Fraction(0)
    for i, op in enumerate(program.ops):
        a, b = (chain[ref] for ref in op.inputs)
        if op.op == "div":
            if b == 0:
                raise _NonRenderable()
            value = a / b
        elif op.op == "add":
            value = a + b
        elif op.op == "sub":
            value = a - b
        else:
            value = a * b
        if corrupt_at is not None and i == corrupt_at:
            value = value + delta
        if value.denominator != 1:
            raise _NonRenderable()
        chain[op.out] = value
        lines.append(
            f"{head[op.op]}: {format_rational(a)} {symbol[op.op]} "
            f"{format_rational(b)} = {format_rational(value)}"
        )
        final = value
    lines.append(f"Therefore: #### {format_rational(final)}")
    return lines, final


class _NonRenderable(Exception):
    pass


def inject_arith_corrupt(
    program: Program, gold: Fraction, rng: random.Random
) -> str:
    """Trace with one corrupted claimed result carried through to the end."""
    n = len(program.ops)
    delta = rng.randint(1, 9)
    attempts = [rng.randrange(n), n - 1]
    for j in attempts:
        try:
            lines, final = _cot_lines(program, corrupt_at=j, delta=delta)
        except _NonRenderable:
            continue
        if final != gold:
            return "\n".join(lines)
    # Unreachable in practice: corrupting the last op always changes the
    # final value by a nonzero integer delta.
    lines, _ = _cot_lines(program, corrupt_at=n - 1, delta=delta)
    return "\n".join(lines)


def inject_answer_mismatch(program: Program, rng: random.Random) -> Program:
    """Declare an answer no statement in the program supports."""
    execution = execute_program(program)
    taken = {p.value for p in program.premises}
    taken |= {r.value for r in execution.records if r.value is not None}
    base = execution.final_value
    assert base is not None
    delta = rng.randint(1, 9)
    while base + delta in taken:
        delta += 1
    return replace(program, answer=replace(program.answer, value=base + delta))


def inject_dangling_input(program: Program, rng: random.Random) -> Program:
    op_index = rng.randrange(len(program.ops))
    op = program.ops[op_index]
    slot = rng.randrange(len(op.inputs))
    inputs = list(op.inputs)
    inputs[slot] = f"z{inputs[slot]}"
    ops = list(program.ops)
    ops[op_index] = replace(op, inputs=tuple(inputs))
    return replace(program, ops=tuple(ops))


# -- corpus assembly ---------------------------------------------------------------


def make_corpus(
    n_questions: int,
    k: int,
    faults: list[FaultSpec],
    seed: int,
    min_ops: int = 1,
    max_ops: int = 5,
) -> list[dict]:
    """Run records for ``n_questions`` questions with ``k`` runs each.

    Every run of a question shares the clean base program; injected faults
    are what make runs differ. Records carry the construction's own gold
    answer.
    """
    if n_questions < 1 or k < 1:
        raise ValueError("need at least one question and one run")
    records = []
    for q in range(n_questions):
        qid = f"q{q:04d}"
        base = generate_program(random.Random(f"{seed}:{qid}"), min_ops, max_ops)
        gold = base.answer.value
        for r in range(k):
            rid = f"{qid}:r{r}"
            rng = random.Random(f"{seed}:{qid}:{r}")
            fault = _draw_fault(rng, faults)
            record = {"question_id": qid, "run_id": rid}
            payload_program: Program | None = base
            if fault is FaultKind.UNIT_SWAP:
                swapped = inject_unit_swap(base, rng)
                payload_program = swapped if swapped is not None else base
            elif fault is FaultKind.ARITH_CORRUPT:
                record["cot_text"] = inject_arith_corrupt(base, gold, rng)
                payload_program = None
            elif fault is FaultKind.ANSWER_MISMATCH:
                payload_program = inject_answer_mismatch(base, rng)
            elif fault is FaultKind.DANGLING_INPUT:
                payload_program = inject_dangling_input(base, rng)
            if payload_program is not None:
                record["program"] = json.loads(serialize_program(payload_program))[
                    "program"
                ]
            record["gold_answer"] = (
                gold.numerator if gold.denominator == 1 else format_rational(gold)
            )
            record["fault"] = fault.value if fault else None
            records.append(record)
    return records


def corpus_to_jsonl(records: list[dict]) -> str:
    return "\n".join(json.dumps(r, ensure_ascii=False) for r in records)
