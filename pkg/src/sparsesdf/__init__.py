"""Sparse versus dense interpolating stochastic discount factors in random
Fourier feature spaces."""

__version__ = "0.1.0"

from .errors import (DivergedError, DomainError, InfeasibleError, ParseError,  # noqa: E402
                     SdfError, ValidationError)
from .features import FeatureDraw, FeatureSpec, draw_features, expand  # noqa: E402
from .metrics import MetricsReport, metrics_report  # noqa: E402
from .panel import (CharacteristicPanel, MonthSlice, PlantedKernelSpec,  # noqa: E402
                    load_panel, save_panel, synth_panel)
from .solvers import SdfSolution, basis_pursuit, l1_path, ridge, ridgeless  # noqa: E402

__all__ = [
    "CharacteristicPanel", "DivergedError", "DomainError", "FeatureDraw", "FeatureSpec",
    "InfeasibleError", "MetricsReport", "MonthSlice", "ParseError", "PlantedKernelSpec",
    "SdfError", "SdfSolution", "ValidationError", "basis_pursuit", "draw_features", "expand",
    "l1_path", "load_panel", "metrics_report", "ridge", "ridgeless", "save_panel",
    "synth_panel",
]
