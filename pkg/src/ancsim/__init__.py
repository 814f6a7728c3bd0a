"""Output-constrained active noise control simulation and analysis."""

from .acoustics import (FirPath, NoiseSource, SaturationModel, StreamingFir,
                        convolve_stream, saturate)
from .analysis import (CorrelationModel, StabilityReport, band_power,
                       build_correlation_model, stability_bounds,
                       time_constant, welch_psd, wiener_optimal,
                       wiener_suboptimal)
from .controllers import (ALGORITHMS, AlgorithmConfig, Controller,
                          FilteredReferenceState, FxlmsController,
                          MomentumTwoGradientController, RescalingController,
                          TwoGradientController, estimate_output_power,
                          lagrangian_factor, make_controller)
from .errors import (ConfigError, DataError, DivergedError,
                     SingularMatrixError)
from .harness import (PathChange, RunResult, ScenarioConfig, TrajectoryRecord,
                      persist, run_scenario, run_varying_environment)
from .presets import PRESETS, build_preset

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "AlgorithmConfig", "ConfigError", "Controller",
    "CorrelationModel", "DataError", "DivergedError", "FilteredReferenceState",
    "FirPath", "FxlmsController", "MomentumTwoGradientController", "NoiseSource",
    "PathChange", "PRESETS", "RescalingController", "RunResult",
    "SaturationModel", "ScenarioConfig", "SingularMatrixError",
    "StabilityReport", "StreamingFir", "TrajectoryRecord",
    "TwoGradientController", "band_power", "build_correlation_model",
    "build_preset", "convolve_stream", "estimate_output_power",
    "lagrangian_factor", "make_controller", "persist", "run_scenario",
    "run_varying_environment", "saturate", "stability_bounds",
    "time_constant", "welch_psd", "wiener_optimal", "wiener_suboptimal",
]
