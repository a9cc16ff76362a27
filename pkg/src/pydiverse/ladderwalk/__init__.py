from __future__ import annotations

from .core import ExperimentConfig, LadderwalkConfig
from .corrector import KappaEstimate, PotentialTable, build_potentials, estimate_kappa
from .electrical import ResistorGraph, effective_resistance
from .estimators import EinsteinReport, EstimateCI, SigmaMatrix
from .percolation import WindowConfig, sample_window_conditioned
from .regeneration import RegenRecord, detect_regenerations
from .walk import KernelTable, ReplicaSummary, Trajectory, simulate

__all__ = [
    "ExperimentConfig",
    "LadderwalkConfig",
    "WindowConfig",
    "sample_window_conditioned",
    "ResistorGraph",
    "effective_resistance",
    "KappaEstimate",
    "PotentialTable",
    "build_potentials",
    "estimate_kappa",
    "KernelTable",
    "Trajectory",
    "ReplicaSummary",
    "simulate",
    "RegenRecord",
    "detect_regenerations",
    "EstimateCI",
    "SigmaMatrix",
    "EinsteinReport",
]
