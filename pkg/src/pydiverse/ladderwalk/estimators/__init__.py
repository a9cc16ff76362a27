from __future__ import annotations

from .einstein import EinsteinReport, LambdaRow, Verdict, einstein_report
from .results import EstimateCI, SigmaMatrix, ci_overlap
from .sigma import (
    GaussianityResult,
    VarianceScaling,
    gaussianity_test,
    second_order_concentration,
    sigma_path_variance,
    sigma_psi_moments,
    variance_scaling,
)
from .speed import effective_sample_size, speed_direct, speed_girsanov

__all__ = [
    "EstimateCI",
    "SigmaMatrix",
    "ci_overlap",
    "speed_direct",
    "speed_girsanov",
    "effective_sample_size",
    "sigma_path_variance",
    "sigma_psi_moments",
    "gaussianity_test",
    "GaussianityResult",
    "variance_scaling",
    "VarianceScaling",
    "second_order_concentration",
    "einstein_report",
    "EinsteinReport",
    "LambdaRow",
    "Verdict",
]
