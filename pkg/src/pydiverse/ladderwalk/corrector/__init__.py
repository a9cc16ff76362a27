from __future__ import annotations

from .diagnostics import GrowthDiagnostic, corrector_growth_diagnostic
from .potentials import (
    KappaEstimate,
    PotentialTable,
    build_potentials,
    cocycle_check,
    estimate_kappa,
    eta_increments,
    write_potentials_csv,
)

__all__ = [
    "GrowthDiagnostic",
    "KappaEstimate",
    "PotentialTable",
    "build_potentials",
    "cocycle_check",
    "corrector_growth_diagnostic",
    "estimate_kappa",
    "eta_increments",
    "write_potentials_csv",
]
