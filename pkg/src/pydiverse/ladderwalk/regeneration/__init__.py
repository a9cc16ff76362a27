from __future__ import annotations

from .regen import (
    RegenRecord,
    TailDiagnostic,
    detect_regenerations,
    first_regeneration_moment,
    gaps_frame,
    lambda_prereg_points,
    regen_tail_diagnostic,
    replay_check,
    speed_regen,
    write_gaps_csv,
)

__all__ = [
    "RegenRecord",
    "TailDiagnostic",
    "detect_regenerations",
    "first_regeneration_moment",
    "gaps_frame",
    "lambda_prereg_points",
    "regen_tail_diagnostic",
    "replay_check",
    "speed_regen",
    "write_gaps_csv",
]
