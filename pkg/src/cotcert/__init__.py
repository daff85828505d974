"""cotcert: certify arithmetic chain-of-thought traces as typed programs.

The pipeline: obtain a candidate program or trace (`emitter_client`), parse
or label it (`program_model`, `step_labeler`), build a Typed Reasoning
Graph (`trg`), compute the certification metrics (`metrics`), apply gates
(`gates`), and aggregate certified answers per question (`csc`). `synth`
generates seeded fault-injected corpora for selectivity experiments and
`harness`/`cli` tie batches together.
"""

from .alignment import AlignmentLevel, AlignmentReport, align
from .csc import (
    BatchReport,
    CSCResult,
    RunResult,
    aggregate,
    batch_aggregate,
    majority_vote,
)
from .emitter_client import EmissionResult, EmitterConfig, EmitterMode, emit, emit_k
from .gates import GateConfig, GateDecision, builtin_presets, evaluate_gate, preset
from .metrics import CertMetrics, compute_metrics, metrics_report
from .program_model import (
    Answer,
    ExecutionResult,
    Premise,
    Program,
    ProgramOp,
    ProgramParseError,
    execute_program,
    parse_program,
    render_typed,
    serialize_program,
)
from .rule_schemas import (
    Hypothesis,
    PrecondReport,
    RuleApplication,
    RuleName,
    StepInvalid,
    apply_rule,
    check_claimed_output,
    check_preconditions,
)
from .step_labeler import (
    LabeledStep,
    classify_step,
    classify_with_fallback,
    label_text,
    segment,
)
from .synth import FaultKind, FaultSpec, generate_program, make_corpus
from .trg import (
    Origin,
    RuleNode,
    StmtNode,
    TypedReasoningGraph,
    build_from_program,
    build_from_steps,
    minimal_path_size,
    path_exists,
)
from .type_system import (
    ArithOp,
    NumericKind,
    TupleType,
    TypedValue,
    UnitError,
    UnitRegistry,
    arith_result_kind,
    join_kind,
    propagate_unit,
)

__version__ = "0.1.0"
