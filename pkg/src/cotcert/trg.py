"""Typed Reasoning Graphs: bipartite dataflow between statements and rules.

Statement nodes hold typed values (premises, derived results, hypotheses,
and the conclusion); rule nodes are instantiated operations. Edges run only
statement -> rule (inputs) and rule -> statement (output), and construction
is incremental in declaration order, so the graph is bipartite and acyclic
by shape.

Validity bookkeeping is deliberately split three ways per rule node:

* ``precond_ok`` — structural preconditions (arity, numeric inputs, nonzero
  divisor) held, so an output value could be computed;
* ``valid`` — the node produced a real output (equals ``precond_ok`` here);
* ``unit_valid`` — dimensional propagation succeeded, recorded independently
  because a unit violation must not sever the dataflow path: the numeric
  value still propagates, only flagged as unit-tainted downstream.

A structurally failed rule instead emits a value-less placeholder statement
so later references resolve while any path through them is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .program_model import Program
from .rule_schemas import ARITH_RULES, RuleName
from .step_labeler import LabeledStep
from .type_system import (
    ArithOp,
    NumericKind,
    TypedValue,
    UNIT_NONE,
    UnitOutcome,
    arith_result_kind,
    propagate_unit_tainted,
)


class Origin(Enum):
    PREMISE = "premise"
    DERIVED = "derived"
    HYPOTHESIS = "hypothesis"
    CONCLUSION = "conclusion"


@dataclass(frozen=True)
class StmtNode:
    id: str
    value: TypedValue | None
    origin: Origin
    tainted: bool = False


@dataclass(frozen=True)
class RuleNode:
    id: str
    schema: RuleName
    valid: bool
    unit_valid: bool | None
    precond_ok: bool
    inputs: tuple[str, ...]
    output: str | None
    claimed: Fraction | None = None
    claim_consistent: bool | None = None
    note: str = ""


PROGRAM_OP_RULES = {
    "add": RuleName.COMPUTE_ADD,
    "sub": RuleName.COMPUTE_SUB,
    "mul": RuleName.COMPUTE_MUL,
    "div": RuleName.COMPUTE_DIV,
    "sumlist": RuleName.SUMLIST,
}


@dataclass
class TypedReasoningGraph:
    """Immutable-after-build dataflow graph plus the counters the
    certification metrics read off it."""

    stmt_nodes: dict[str, StmtNode] = field(default_factory=dict)
    rule_nodes: dict[str, RuleNode] = field(default_factory=dict)
    input_edges: list[tuple[str, str]] = field(default_factory=list)
    output_edges: list[tuple[str, str]] = field(default_factory=list)
    step_count: int = 0
    unit_op_count: int = 0
    unit_valid_count: int = 0
    integrated_count: int = 0
    satisfied_count: int = 0
    therefore_rule_id: str | None = None
    conclusion_id: str | None = None
    declared_answer: TypedValue | None = None
    consistent: bool = False

    _producer: dict[str, str] = field(default_factory=dict)
    _order: dict[str, int] = field(default_factory=dict)

    # -- construction helpers -------------------------------------------------

    def _add_stmt(self, node: StmtNode) -> StmtNode:
        if node.id in self.stmt_nodes:
            raise ValueError(f"duplicate statement node {node.id}")
        self.stmt_nodes[node.id] = node
        self._order[f"s:{node.id}"] = len(self._order)
        return node

    def _add_rule(self, node: RuleNode) -> RuleNode:
        if node.id in self.rule_nodes:
            raise ValueError(f"duplicate rule node {node.id}")
        self.rule_nodes[node.id] = node
        self._order[f"r:{node.id}"] = len(self._order)
        for sid in node.inputs:
            self.input_edges.append((sid, node.id))
        if node.output is not None:
            self.output_edges.append((node.id, node.output))
            self._producer[node.output] = node.id
        return node

    def producer_of(self, stmt_id: str) -> RuleNode | None:
        rid = self._producer.get(stmt_id)
        return self.rule_nodes[rid] if rid is not None else None

    # -- structural checks ----------------------------------------------------

    def validate_structure(self) -> None:
        """Assert bipartiteness and acyclicity (construction order is a
        topological order, so every edge must point forward)."""
        for sid, rid in self.input_edges:
            if sid not in self.stmt_nodes or rid not in self.rule_nodes:
                raise AssertionError(f"non-bipartite input edge {sid}->{rid}")
            if self._order[f"s:{sid}"] >= self._order[f"r:{rid}"]:
                raise AssertionError(f"backward input edge {sid}->{rid}")
        for rid, sid in self.output_edges:
            if sid not in self.stmt_nodes or rid not in self.rule_nodes:
                raise AssertionError(f"non-bipartite output edge {rid}->{sid}")
            if self._order[f"r:{rid}"] >= self._order[f"s:{sid}"]:
                raise AssertionError(f"backward output edge {rid}->{sid}")
        for rule in self.rule_nodes.values():
            if rule.valid and rule.output is None:
                raise AssertionError(f"valid rule {rule.id} lacks an output")

    # -- exports ---------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "stmt_nodes": [
                {
                    "id": n.id,
                    "origin": n.origin.value,
                    "value": None if n.value is None else str(n.value.value),
                    "kind": None if n.value is None else n.value.kind.name,
                    "unit": None if n.value is None else n.value.unit,
                    "tainted": n.tainted,
                }
                for n in self.stmt_nodes.values()
            ],
            "rule_nodes": [
                {
                    "id": n.id,
                    "schema": n.schema.name,
                    "valid": n.valid,
                    "unit_valid": n.unit_valid,
                    "precond_ok": n.precond_ok,
                }
                for n in self.rule_nodes.values()
            ],
            "input_edges": [list(e) for e in self.input_edges],
            "output_edges": [list(e) for e in self.output_edges],
            "step_count": self.step_count,
            "unit_op_count": self.unit_op_count,
        }

    def to_dot(self) -> str:
        lines = ["digraph trg {", "  rankdir=LR;"]
        for n in self.stmt_nodes.values():
            label = n.id if n.value is None else f"{n.id}\\n{n.value.value}"
            shape = "doublecircle" if n.origin is Origin.CONCLUSION else "ellipse"
            lines.append(f'  "s:{n.id}" [label="{label}", shape={shape}];')
        for n in self.rule_nodes.values():
            color = "black" if n.valid else "red"
            style = "" if n.unit_valid in (True, None) else ", style=dashed"
            lines.append(
                f'  "r:{n.id}" [label="{n.schema.value}", shape=box, color={color}{style}];'
            )
        for sid, rid in self.input_edges:
            lines.append(f'  "s:{sid}" -> "r:{rid}";')
        for rid, sid in self.output_edges:
            lines.append(f'  "r:{rid}" -> "s:{sid}";')
        lines.append("}")
        return "\n".join(lines)


# -- shared evaluation ---------------------------------------------------------


def _eval_arith(
    schema: RuleName, operands: list[StmtNode]
) -> tuple[bool, str, Fraction | None, NumericKind | None, UnitOutcome | None]:
    """Structural check + exact evaluation + unit propagation over operand
    statement nodes. Returns (precond_ok, note, value, kind, unit_outcome)."""
    if any(node.value is None for node in operands):
        return False, "missing input value", None, None, None
    if schema is RuleName.SUMLIST:
        if not operands:
            return False, "sumlist needs inputs", None, None, None
        value = Fraction(0)
        kind = NumericKind.NAT
        unit = (operands[0].value.unit, operands[0].tainted)
        outcome = UnitOutcome(unit[0], True, unit[1])
        for node in operands:
            value += node.value.value
            kind = arith_result_kind(ArithOp.ADD, kind, node.value.kind)
        for node in operands[1:]:
            outcome = propagate_unit_tainted(
                ArithOp.ADD, unit, (node.value.unit, node.tainted)
            )
            if not outcome.ok:
                break
            unit = (outcome.unit, outcome.tainted)
        return True, "", value, kind, outcome
    if len(operands) != 2:
        return False, f"{schema.value} takes 2 inputs", None, None, None
    op = ARITH_RULES[schema]
    a, b = operands
    if op is ArithOp.DIV and b.value.value == 0:
        return False, "division by zero", None, None, None
    value = {
        ArithOp.ADD: a.value.value + b.value.value,
        ArithOp.SUB: a.value.value - b.value.value,
        ArithOp.MUL: a.value.value * b.value.value,
        ArithOp.DIV: a.value.value / b.value.value if b.value.value else None,
    }[op]
    kind = arith_result_kind(op, a.value.kind, b.value.kind)
    outcome = propagate_unit_tainted(
        op, (a.value.unit, a.tainted), (b.value.unit, b.tainted)
    )
    return True, "", value, kind, outcome


def _attach_arith_rule(
    g: TypedReasoningGraph,
    rule_id: str,
    schema: RuleName,
    operands: list[StmtNode],
    out_id: str,
    claimed: Fraction | None,
    assume_valid: bool,
) -> RuleNode:
    precond_ok, note, value, kind, outcome = _eval_arith(schema, operands)
    valid = precond_ok
    unit_valid: bool | None = None
    if precond_ok:
        g.unit_op_count += 1
        unit_valid = outcome.ok
        if outcome.ok:
            g.unit_valid_count += 1
    if assume_valid:
        valid = precond_ok = True
        if unit_valid is not None and not unit_valid:
            g.unit_valid_count += 1
        unit_valid = True if unit_valid is not None else None

    if valid and value is not None:
        out_value = TypedValue(value, kind, outcome.unit)
        out = StmtNode(out_id, out_value, Origin.DERIVED, outcome.tainted)
    else:
        out = StmtNode(out_id, None, Origin.DERIVED)

    claim_ok: bool | None = None
    if claimed is not None:
        claim_ok = value is not None and claimed == value
    rule = RuleNode(
        rule_id,
        schema,
        valid,
        unit_valid,
        precond_ok,
        tuple(node.id for node in operands),
        out_id,
        claimed,
        claim_ok,
        note,
    )
    g._add_rule(rule)
    g._add_stmt(out)
    g.integrated_count += 1 if valid else 0
    g.satisfied_count += 1 if precond_ok else 0
    return rule


def _attach_therefore(
    g: TypedReasoningGraph,
    rule_id: str,
    conclusion_id: str,
    bound: StmtNode | None,
    answer: TypedValue,
    assume_valid: bool,
) -> None:
    ok = bound is not None and bound.value is not None
    if assume_valid:
        ok = True
    conclusion = StmtNode(
        conclusion_id, answer, Origin.CONCLUSION, bound.tainted if bound else False
    )
    inputs = (bound.id,) if bound is not None else ()
    g._add_rule(
        RuleNode(rule_id, RuleName.THEREFORE, ok, None, ok, inputs, conclusion_id)
    )
    g._add_stmt(conclusion)
    g.integrated_count += 1 if ok else 0
    g.satisfied_count += 1 if ok else 0
    g.therefore_rule_id = rule_id
    g.conclusion_id = conclusion_id
    g.declared_answer = answer


def _latest_value_match(g: TypedReasoningGraph, value: Fraction) -> StmtNode | None:
    """Most recent premise/derived node holding exactly ``value``."""
    best = None
    for node in g.stmt_nodes.values():
        if node.origin not in (Origin.PREMISE, Origin.DERIVED):
            continue
        if node.value is not None and node.value.value == value:
            best = node
    return best


# -- builders -------------------------------------------------------------------


def build_from_program(p: Program, assume_valid: bool = False) -> TypedReasoningGraph:
    """Build the graph for a parsed program.

    Premises become premise statement nodes; every op becomes a rule node
    checked at creation; the declared answer attaches through a final
    Therefore rule bound to the last op's output (or, for op-less programs,
    to a premise restating the answer). The step count is ops plus the
    Therefore step.
    """
    g = TypedReasoningGraph()
    for premise in p.premises:
        g._add_stmt(
            StmtNode(
                premise.id,
                TypedValue(premise.value, unit=premise.unit),
                Origin.PREMISE,
            )
        )
    last_out: StmtNode | None = None
    for op in p.ops:
        operands = [g.stmt_nodes[ref] for ref in op.inputs]
        rule = _attach_arith_rule(
            g,
            f"rule:{op.id}",
            PROGRAM_OP_RULES[op.op],
            operands,
            op.out,
            None,
            assume_valid,
        )
        last_out = g.stmt_nodes[op.out]

    answer = TypedValue(p.answer.value, unit=p.answer.unit)
    if p.ops:
        bound = last_out
    else:
        bound = _latest_value_match(g, p.answer.value)
    _attach_therefore(
        g, "rule:therefore", p.answer.therefore_id, bound, answer, assume_valid
    )
    g.step_count = len(p.ops) + 1

    if p.ops:
        final = last_out.value.value if last_out.value is not None else None
        g.consistent = final is not None and final == p.answer.value
    else:
        g.consistent = any(pr.value == p.answer.value for pr in p.premises)
    g.validate_structure()
    return g


def build_from_steps(
    steps: list[LabeledStep], assume_valid: bool = False
) -> TypedReasoningGraph:
    """Build the graph for a labeled natural-language trace.

    Extraction steps introduce premise nodes. Compute steps bind each
    operand to the most recent node holding an equal value, falling back to
    a fresh literal premise, so dataflow is recovered even when the trace
    never extracted a number explicitly. Unknown steps contribute nothing
    (they still count toward the step total). The last Therefore step binds
    the conclusion to the most recent node matching its claim.
    """
    g = TypedReasoningGraph()
    g.step_count = len(steps)
    literal_counter = 0
    claims_consistent = True
    last_therefore: tuple[int, Fraction] | None = None

    def bind(value: Fraction, unit: str) -> StmtNode:
        nonlocal literal_counter
        node = _latest_value_match(g, value)
        if node is not None:
            return node
        literal_counter += 1
        return g._add_stmt(
            StmtNode(
                f"lit{literal_counter}",
                TypedValue(value, unit=unit),
                Origin.PREMISE,
            )
        )

    for step in steps:
        idx = step.line_index
        if step.schema is RuleName.UNKNOWN:
            continue
        if step.schema is RuleName.EXTRACT_NUMBER:
            if step.args:
                for k, (value, unit) in enumerate(step.args):
                    g._add_stmt(
                        StmtNode(
                            f"s{idx}" if k == 0 else f"s{idx}_{k}",
                            TypedValue(value, unit=unit),
                            Origin.PREMISE,
                        )
                    )
                g.integrated_count += 1
                g.satisfied_count += 1
            continue
        if step.schema is RuleName.ASSUME:
            g._add_rule(
                RuleNode(
                    f"rule:assume{idx}", RuleName.ASSUME, True, None, True, (), f"h{idx}"
                )
            )
            g._add_stmt(StmtNode(f"h{idx}", None, Origin.HYPOTHESIS))
            g.integrated_count += 1
            g.satisfied_count += 1
            continue
        if step.schema is RuleName.THEREFORE:
            if step.claimed_result is not None:
                last_therefore = (idx, step.claimed_result)
                bound = _latest_value_match(g, step.claimed_result)
                answer = TypedValue(step.claimed_result)
                _attach_therefore(
                    g, f"rule:therefore{idx}", f"conclusion{idx}", bound, answer,
                    assume_valid,
                )
            continue
        if step.schema in ARITH_RULES:
            if len(step.args) < 2:
                # Unbindable compute step: record it as an invalid rule with
                # a placeholder output so the failure is visible in exports.
                g._add_rule(
                    RuleNode(
                        f"rule:c{idx}",
                        step.schema,
                        assume_valid,
                        None,
                        assume_valid,
                        (),
                        f"o{idx}",
                        step.claimed_result,
                        None,
                        "missing operands",
                    )
                )
                g._add_stmt(StmtNode(f"o{idx}", None, Origin.DERIVED))
                if assume_valid:
                    g.integrated_count += 1
                    g.satisfied_count += 1
                if step.claimed_result is not None:
                    claims_consistent = False
                continue
            operands = [bind(value, unit) for value, unit in step.args[:2]]
            rule = _attach_arith_rule(
                g,
                f"rule:c{idx}",
                step.schema,
                operands,
                f"o{idx}",
                step.claimed_result,
                assume_valid,
            )
            if step.claimed_result is not None and rule.claim_consistent is not True:
                claims_consistent = False

    if last_therefore is None:
        g.consistent = False
    else:
        therefore_rule = g.rule_nodes.get(g.therefore_rule_id or "")
        bound_ok = therefore_rule is not None and bool(therefore_rule.inputs)
        g.consistent = claims_consistent and bound_ok
    g.validate_structure()
    return g


# -- path queries ----------------------------------------------------------------


def _closure_rules(g: TypedReasoningGraph) -> list[RuleNode] | None:
    """Backward closure of valid rules from the conclusion, or None when the
    closure escapes the typed premise-founded fragment."""
    if g.therefore_rule_id is None:
        return None
    start = g.rule_nodes.get(g.therefore_rule_id)
    if start is None or not start.valid or not start.inputs:
        return None
    seen: dict[str, RuleNode] = {}
    stack = [start]
    while stack:
        rule = stack.pop()
        if rule.id in seen:
            continue
        seen[rule.id] = rule
        if not rule.valid:
            return None
        for sid in rule.inputs:
            node = g.stmt_nodes[sid]
            if node.origin is Origin.PREMISE:
                continue
            if node.origin is Origin.HYPOTHESIS:
                return None
            producer = g.producer_of(sid)
            if producer is None:
                return None
            stack.append(producer)
    return list(seen.values())


def path_exists(g: TypedReasoningGraph) -> bool:
    """True iff the conclusion's backward closure uses only valid rules and
    bottoms out exclusively in premise nodes."""
    return _closure_rules(g) is not None


def minimal_path_size(g: TypedReasoningGraph) -> int:
    """Rule applications in the smallest complete derivation of the
    conclusion (the Therefore step itself is not counted); -1 when no typed
    path exists.

    Every derived statement has exactly one producing rule, so the backward
    closure *is* the unique minimal sub-derivation.
    """
    closure = _closure_rules(g)
    if closure is None:
        return -1
    return len([r for r in closure if r.schema is not RuleName.THEREFORE])
