"""The five certification metrics computed over a built reasoning graph.

* coverage — fraction of generated steps successfully typed and integrated;
* evr — fraction of steps whose structural rule preconditions held
  (Evidence Validity Rate; unit failures do not count against it);
* uvr — fraction of checked arithmetic operations that were dimensionally
  valid (Unit Validity Ratio; vacuously 1 when nothing was checkable);
* pe — whether a typed path connects premises to the conclusion;
* mps — rule applications in the minimal complete derivation, or -1.

All ratios are exact rationals. A run with no steps has zero coverage and
EVR and is thereby ineligible for every gate.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .trg import TypedReasoningGraph, minimal_path_size, path_exists

CSV_HEADER = "run_id,coverage,evr,uvr,pe,mps"


@dataclass(frozen=True)
class CertMetrics:
    coverage: Fraction
    evr: Fraction
    uvr: Fraction
    pe: bool
    mps: int
    n_steps: int = 0
    unit_ops: int = 0

    def __post_init__(self) -> None:
        for name in ("coverage", "evr", "uvr"):
            ratio = getattr(self, name)
            if not isinstance(ratio, Fraction):
                object.__setattr__(self, name, Fraction(ratio))
                ratio = getattr(self, name)
            if not 0 <= ratio <= 1:
                raise ValueError(f"{name} out of range: {ratio}")
        if (self.mps == -1) != (not self.pe):
            raise ValueError("mps must be -1 exactly when no path exists")

    @property
    def uvr_vacuous(self) -> bool:
        return self.unit_ops == 0


def compute_metrics(g: TypedReasoningGraph) -> CertMetrics:
    n = g.step_count
    m = g.unit_op_count
    coverage = Fraction(g.integrated_count, n) if n else Fraction(0)
    evr = Fraction(g.satisfied_count, n) if n else Fraction(0)
    uvr = Fraction(g.unit_valid_count, m) if m else Fraction(1)
    pe = path_exists(g)
    return CertMetrics(coverage, evr, uvr, pe, minimal_path_size(g), n, m)


def _ratio(value: Fraction) -> str:
    # Display only: certification never compares floats.
    return f"{float(value):.3f}"


def metrics_report(m: CertMetrics) -> str:
    """Stable one-line rendering for logs and the CLI."""
    uvr = f"uvr={_ratio(m.uvr)}"
    if m.uvr_vacuous:
        uvr += " (vacuous)"
    return (
        f"coverage={_ratio(m.coverage)} evr={_ratio(m.evr)} {uvr} "
        f"pe={1 if m.pe else 0} mps={m.mps}"
    )


def metrics_csv_row(run_id: str, m: CertMetrics) -> str:
    return ",".join(
        [
            run_id,
            _ratio(m.coverage),
            _ratio(m.evr),
            _ratio(m.uvr),
            "1" if m.pe else "0",
            str(m.mps),
        ]
    )
