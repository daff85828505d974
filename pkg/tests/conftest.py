from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

from cotcert.harness import certify_records, read_runs_jsonl
from cotcert.synth import FaultKind, FaultSpec, corpus_to_jsonl, make_corpus

FIXTURES = Path(__file__).parent / "fixtures"

# Seeded selectivity corpus: 200 questions x 3 runs, 40% total fault rate
# skewed toward answer-corrupting faults.
CORPUS_SEED = 20250809
CORPUS_FAULTS = [
    FaultSpec(FaultKind.UNIT_SWAP, 0.04),
    FaultSpec(FaultKind.ARITH_CORRUPT, 0.16),
    FaultSpec(FaultKind.DANGLING_INPUT, 0.04),
    FaultSpec(FaultKind.ANSWER_MISMATCH, 0.16),
]


def golden_text(name: str) -> str:
    return resources.files("cotcert.fixtures").joinpath(name).read_text(
        encoding="utf-8"
    )


@pytest.fixture(scope="session")
def raspberry_json() -> str:
    return golden_text("raspberry.json")


@pytest.fixture(scope="session")
def unit_failure_json() -> str:
    return golden_text("unit_failure.json")


@pytest.fixture(scope="session")
def labeled_corpus() -> list[dict]:
    lines = (FIXTURES / "labeled_corpus.jsonl").read_text(encoding="utf-8")
    return [json.loads(line) for line in lines.splitlines() if line.strip()]


@pytest.fixture(scope="session")
def fault_corpus():
    records = make_corpus(200, 3, CORPUS_FAULTS, seed=CORPUS_SEED)
    parsed, errors = read_runs_jsonl(corpus_to_jsonl(records))
    assert not errors
    return parsed


@pytest.fixture(scope="session")
def fault_corpus_certified(fault_corpus):
    processed, report = certify_records(fault_corpus)
    return processed, report
