"""Portfolio selection under multiple generalized spectral risk constraints.

Core pieces: risk measures and their smoothed surrogates, an exact-penalty
continuation solver with a proximal-gradient inner loop, an LP exporter for
cross-checking against external solvers, scenario generators, and a small
HTTP service plus CLI on top.
"""

from .risk_measures import (
    LossMatrix,
    SpectralMeasure,
    SpectrumWeights,
    convert_spectrum,
    expected_shortfall,
    expected_shortfall_dual,
    generalized_spectral_risk,
    spectral_risk,
    tail_count,
)
from .smoothing import (
    RiskConstraint,
    RiskConstraintSet,
    SmoothingParams,
    exact_g_max,
    smoothed_es,
    smoothed_g,
    smoothed_max,
    smoothed_spectral_risk,
)
from .solver import (
    Box,
    NumericalFailure,
    ProblemSpec,
    SimplexBox,
    SolveReport,
    SolverConfig,
    eta_star,
    lambda_star,
    recover_feasible,
    solve,
    spec_risk_allocate,
)

__all__ = [
    "Box",
    "LossMatrix",
    "NumericalFailure",
    "ProblemSpec",
    "RiskConstraint",
    "RiskConstraintSet",
    "SimplexBox",
    "SmoothingParams",
    "SolveReport",
    "SolverConfig",
    "SpectralMeasure",
    "SpectrumWeights",
    "convert_spectrum",
    "eta_star",
    "exact_g_max",
    "expected_shortfall",
    "expected_shortfall_dual",
    "generalized_spectral_risk",
    "lambda_star",
    "recover_feasible",
    "smoothed_es",
    "smoothed_g",
    "smoothed_max",
    "smoothed_spectral_risk",
    "solve",
    "spec_risk_allocate",
    "spectral_risk",
    "tail_count",
]

__version__ = "0.1.0"
