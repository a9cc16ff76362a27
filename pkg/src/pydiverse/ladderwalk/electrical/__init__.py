from __future__ import annotations

from .hitting import (
    EscapeProbability,
    HittingBracket,
    escape_lower_bound,
    escape_probability_exact,
    hitting_probability_bounds,
    hitting_probability_exact,
    hitting_probability_to_infinity,
    lazy_hitting_probability,
)
from .network import (
    ResistorGraph,
    effective_conductance,
    effective_resistance,
    effective_resistance_pinv,
    nash_williams_bound,
    voltage,
)
from .ruin import (
    expected_excursion_length,
    expected_excursion_length_oracle,
    first_visit_probability,
    reflected_kernel,
    ruin_probability_oracle,
    ruin_probability_r,
    visit_count_pmf,
)

__all__ = [
    "ResistorGraph",
    "effective_resistance",
    "effective_conductance",
    "effective_resistance_pinv",
    "voltage",
    "nash_williams_bound",
    "hitting_probability_exact",
    "hitting_probability_to_infinity",
    "hitting_probability_bounds",
    "HittingBracket",
    "lazy_hitting_probability",
    "escape_probability_exact",
    "escape_lower_bound",
    "EscapeProbability",
    "ruin_probability_r",
    "ruin_probability_oracle",
    "visit_count_pmf",
    "expected_excursion_length",
    "expected_excursion_length_oracle",
    "first_visit_probability",
    "reflected_kernel",
]
