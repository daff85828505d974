"""Candidate-program acquisition: deterministic mock or HTTP chat endpoint.

All outbound network traffic in the package is confined to this module, and
only the HTTP mode performs any. The default mock mode is fully offline and
bit-deterministic: a question either hits a fixture file (keyed by the
question's content hash) or gets a synthetic program derived from
(question, seed, sample index).

The HTTP mode speaks the common chat-completions JSON shape. Requests and
responses are persisted verbatim before any parsing, truncated or
unparseable completions retry with an escalated token budget, and no
temperature field is sent (some endpoints reject explicit zero).
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable

from .program_model import Program, ProgramParseError, parse_program, serialize_program
from .synth import generate_program


class EmitterMode(Enum):
    MOCK = "mock"
    HTTP = "http"


class EmitterErrorKind(Enum):
    NETWORK = "network"
    AUTH = "auth"
    EXHAUSTED = "exhausted"


class EmitterError(RuntimeError):
    def __init__(self, kind: EmitterErrorKind, message: str) -> None:
        super().__init__(f"{kind.value}: {message}")
        self.kind = kind


@dataclass(frozen=True)
class EmitterConfig:
    mode: EmitterMode = EmitterMode.MOCK
    endpoint: str = ""
    model: str = ""
    auth_env: str = "EMITTER_API_KEY"
    max_completion_tokens: int = 1200
    retry_escalation: int = 1000
    max_retries: int = 2
    timeout: float = 60.0
    seed: int = 0
    fixtures_dir: str | None = None
    transcript_dir: str | None = None
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.mode is EmitterMode.HTTP and not self.endpoint:
            raise ValueError("HTTP mode requires an endpoint")
        if self.max_retries < 0 or self.retry_escalation < 0:
            raise ValueError("retries and escalation must be non-negative")


@dataclass(frozen=True)
class EmissionResult:
    raw_text: str
    parsed_program: Program | None
    truncated: bool
    attempts: int
    error: str | None = None


# transport(url, headers, json_payload, timeout) -> (status_code, body_text)
Transport = Callable[[str, dict, dict, float], tuple[int, str]]


def _requests_transport(
    url: str, headers: dict, payload: dict, timeout: float
) -> tuple[int, str]:
    import requests

    try:
        response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise EmitterError(EmitterErrorKind.NETWORK, str(exc)) from None
    return response.status_code, response.text


def question_key(question: str) -> str:
    return hashlib.sha256(question.encode("utf-8")).hexdigest()[:16]


def schema_prompt() -> str:
    """The versioned system prompt embedding the program JSON schema and the
    trace-format constraints."""
    return (
        resources.files("cotcert.fixtures")
        .joinpath("prompt_schema_v1.txt")
        .read_text(encoding="utf-8")
    )


def extract_json_block(text: str) -> str | None:
    """First balanced JSON object in ``text`` (fences and prose tolerated)."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escape = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
        start = text.find("{", start + 1)
    return None


def _mock_emit(question: str, cfg: EmitterConfig, sample_index: int) -> EmissionResult:
    if cfg.fixtures_dir:
        fixture = Path(cfg.fixtures_dir) / f"{question_key(question)}.json"
        if fixture.exists():
            raw = fixture.read_text(encoding="utf-8")
            try:
                program = parse_program(raw)
            except ProgramParseError as exc:
                return EmissionResult(raw, None, False, 1, str(exc))
            return EmissionResult(raw, program, False, 1)
    rng = random.Random(f"{cfg.seed}:{question_key(question)}:{sample_index}")
    program = generate_program(rng)
    raw = serialize_program(program)
    return EmissionResult(raw, program, False, 1)


def _persist_transcript(
    cfg: EmitterConfig, question: str, attempt: int, request: dict, status: int,
    body: str,
) -> None:
    if not cfg.transcript_dir:
        return
    directory = Path(cfg.transcript_dir) / question_key(question)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"attempt{attempt}.json"
    path.write_text(
        json.dumps(
            {"request": request, "status": status, "response": body},
            indent=2,
            ensure_ascii=False,
        ),
        encoding="utf-8",
    )


def _http_emit(
    question: str, cfg: EmitterConfig, transport: Transport
) -> EmissionResult:
    import os

    token = os.environ.get(cfg.auth_env, "")
    headers = {"Content-Type": "application/json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    system = schema_prompt()
    budget = cfg.max_completion_tokens
    raw = ""
    truncated = False
    attempts = 0
    network_failures = 0
    while attempts <= cfg.max_retries:
        attempts += 1
        request = {
            "model": cfg.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": question},
            ],
            "max_completion_tokens": budget,
        }
        try:
            status, body = transport(cfg.endpoint, headers, request, cfg.timeout)
        except EmitterError:
            network_failures += 1
            if network_failures > cfg.max_retries:
                raise
            continue
        _persist_transcript(cfg, question, attempts, request, status, body)
        if status in (401, 403):
            raise EmitterError(EmitterErrorKind.AUTH, f"HTTP {status}")
        if status != 200:
            network_failures += 1
            if network_failures > cfg.max_retries:
                raise EmitterError(EmitterErrorKind.NETWORK, f"HTTP {status}")
            continue
        raw, truncated = _read_completion(body)
        if not truncated:
            block = extract_json_block(raw)
            if block is not None:
                try:
                    return EmissionResult(raw, parse_program(block), False, attempts)
                except ProgramParseError:
                    pass
        budget += cfg.retry_escalation
    return EmissionResult(
        raw, None, truncated, attempts, EmitterErrorKind.EXHAUSTED.value
    )


def _read_completion(body: str) -> tuple[str, bool]:
    try:
        doc = json.loads(body)
        choice = doc["choices"][0]
        content = choice["message"]["content"] or ""
        return content, choice.get("finish_reason") == "length"
    except (json.JSONDecodeError, KeyError, IndexError, TypeError):
        return body, False


def emit(
    question: str,
    cfg: EmitterConfig,
    transport: Transport | None = None,
    sample_index: int = 0,
) -> EmissionResult:
    """One emission. Mock mode never raises; HTTP mode raises EmitterError
    for auth and (post-retry) network failures, but returns the raw text of
    exhausted parse attempts for forensics."""
    if cfg.mode is EmitterMode.MOCK:
        return _mock_emit(question, cfg, sample_index)
    return _http_emit(question, cfg, transport or _requests_transport)


def emit_k(
    question: str,
    k: int,
    cfg: EmitterConfig,
    transport: Transport | None = None,
) -> list[EmissionResult]:
    """k independent emissions, ordered by sample index. Per-sample failures
    become error-bearing results; the batch never aborts."""
    if k < 1:
        raise ValueError("k must be at least 1")

    def one(index: int) -> EmissionResult:
        try:
            return emit(question, cfg, transport, sample_index=index)
        except EmitterError as exc:
            return EmissionResult("", None, False, cfg.max_retries + 1, str(exc))

    if cfg.parallelism > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            return list(pool.map(one, range(k)))
    return [one(index) for index in range(k)]
