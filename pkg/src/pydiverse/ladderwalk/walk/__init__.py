from __future__ import annotations

from .enumeration import (
    mean_displacement,
    path_distribution,
    weighted_endpoint_distribution,
)
from .kernel import (
    KernelTable,
    finite_difference_nu,
    finite_difference_second_ratio,
    log_p_second_derivative_ratio,
    martingale_checks,
    nu,
    partition_function,
    transition_matrix,
    transition_row,
)
from .trajectory import (
    ReplicaSummary,
    Trajectory,
    girsanov_components,
    simulate,
    write_trajectory_csv,
)

__all__ = [
    "KernelTable",
    "partition_function",
    "transition_row",
    "transition_matrix",
    "nu",
    "log_p_second_derivative_ratio",
    "finite_difference_nu",
    "finite_difference_second_ratio",
    "martingale_checks",
    "Trajectory",
    "ReplicaSummary",
    "simulate",
    "girsanov_components",
    "write_trajectory_csv",
    "path_distribution",
    "weighted_endpoint_distribution",
    "mean_displacement",
]
