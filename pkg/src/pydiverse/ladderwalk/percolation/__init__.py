from __future__ import annotations

from .cluster import (
    backwards_mask,
    component_labels,
    crossing_cluster_mask,
    crossing_exists,
    find_preregeneration_points,
    forwards_mask,
)
from .cycles import (
    Cycle,
    CyclePool,
    CycleSampler,
    CycleSource,
    build_cycle_stationary_env,
    concatenate_cycles,
    extract_cycles,
    harvest_cycles,
)
from .decomposition import ClusterDecomposition, classify_communication
from .sampling import (
    ConditionedSampler,
    ExactDistribution,
    crossing_probability,
    enumerate_conditioned_distribution,
    sample_segment,
    sample_window_conditioned,
    sample_window_rejection,
    sample_window_unconditioned,
    window_code,
)
from .window import WindowConfig, loads, read

__all__ = [
    "WindowConfig",
    "loads",
    "read",
    "sample_window_unconditioned",
    "sample_window_conditioned",
    "sample_window_rejection",
    "sample_segment",
    "ConditionedSampler",
    "ExactDistribution",
    "enumerate_conditioned_distribution",
    "crossing_probability",
    "window_code",
    "crossing_exists",
    "crossing_cluster_mask",
    "component_labels",
    "find_preregeneration_points",
    "forwards_mask",
    "backwards_mask",
    "Cycle",
    "CycleSource",
    "CyclePool",
    "CycleSampler",
    "extract_cycles",
    "concatenate_cycles",
    "harvest_cycles",
    "build_cycle_stationary_env",
    "ClusterDecomposition",
    "classify_communication",
]
