"""Certification gates: conjunctions of metric thresholds.

Three presets ship. "criterion" is the baseline acceptance condition
(coverage >= 0.50, EVR >= 0.60, path required). "relaxed" (EVR >= 0.30,
path required) trades precision for coverage; "strict" (EVR >= 0.80,
UVR >= 0.80, path required, numeric consistency required) is for settings
where dimensional validity and exact claim/recompute agreement matter more
than answering often.

Thresholds are exact rationals. This is load-bearing: a run with UVR
exactly 4/5 must pass a 0.80 threshold, and the binary float 0.8 is
slightly *greater* than 4/5, so float thresholds would silently reject it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .metrics import CertMetrics
from .type_system import as_fraction


class GateConfigError(ValueError):
    """A gate name or config file could not be resolved."""


@dataclass(frozen=True)
class GateConfig:
    name: str
    evr_min: Fraction = Fraction(0)
    coverage_min: Fraction | None = None
    uvr_min: Fraction | None = None
    require_pe: bool = True
    require_consistency: bool = False

    def __post_init__(self) -> None:
        for field_name in ("evr_min", "coverage_min", "uvr_min"):
            value = getattr(self, field_name)
            if value is None:
                continue
            value = as_fraction(value) if not isinstance(value, Fraction) else value
            if not 0 <= value <= 1:
                raise GateConfigError(f"{field_name} out of [0,1]: {value}")
            object.__setattr__(self, field_name, value)


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    failed_conditions: tuple[str, ...]


def evaluate_gate(m: CertMetrics, consistent: bool, cfg: GateConfig) -> GateDecision:
    """Apply every configured condition; name each one that failed."""
    failed = []
    if cfg.coverage_min is not None and m.coverage < cfg.coverage_min:
        failed.append("coverage_min")
    if m.evr < cfg.evr_min:
        failed.append("evr_min")
    if cfg.uvr_min is not None and m.uvr < cfg.uvr_min:
        failed.append("uvr_min")
    if cfg.require_pe and not m.pe:
        failed.append("pe")
    if cfg.require_consistency and not consistent:
        failed.append("consistency")
    return GateDecision(not failed, tuple(failed))


def builtin_presets() -> list[GateConfig]:
    return [
        GateConfig(
            "criterion",
            evr_min=Fraction(3, 5),
            coverage_min=Fraction(1, 2),
            require_pe=True,
        ),
        GateConfig("relaxed", evr_min=Fraction(3, 10), require_pe=True),
        GateConfig(
            "strict",
            evr_min=Fraction(4, 5),
            uvr_min=Fraction(4, 5),
            require_pe=True,
            require_consistency=True,
        ),
    ]


def preset(name: str) -> GateConfig:
    for cfg in builtin_presets():
        if cfg.name == name:
            return cfg
    raise GateConfigError(f"no preset named {name!r}")


def load_gate_config(path: str | Path) -> GateConfig:
    """Load one gate from a JSON file.

    Keys: name, evr_min, coverage_min, uvr_min, require_pe,
    require_consistency. Thresholds may be numbers (decimals parse exactly)
    or strings like "0.8".
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"), parse_float=Fraction)
    except (OSError, json.JSONDecodeError) as exc:
        raise GateConfigError(f"cannot load gate config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise GateConfigError(f"gate config {path} is not an object")
    known = {"name", "evr_min", "coverage_min", "uvr_min", "require_pe",
             "require_consistency"}
    unknown = set(doc) - known
    if unknown:
        raise GateConfigError(f"unknown gate config keys: {sorted(unknown)}")
    kwargs = {}
    for key in ("evr_min", "coverage_min", "uvr_min"):
        if key in doc and doc[key] is not None:
            kwargs[key] = as_fraction(doc[key])
    for key in ("require_pe", "require_consistency"):
        if key in doc:
            kwargs[key] = bool(doc[key])
    return GateConfig(str(doc.get("name", Path(path).stem)), **kwargs)


def resolve_gate(spec: str) -> GateConfig:
    """Interpret a CLI gate argument: a preset name or a config file path."""
    try:
        return preset(spec)
    except GateConfigError:
        if Path(spec).exists():
            return load_gate_config(spec)
        raise GateConfigError(
            f"{spec!r} is neither a preset (criterion/relaxed/strict) nor a file"
        ) from None
