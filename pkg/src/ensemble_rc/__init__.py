"""Ensemble reservoir computing.

Identical dynamical systems share one input; an observation function is
averaged over the ensemble and a linear readout is trained on the averages.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .capacity import CapacityReport, MemoryCurve, ipc, memory_capacity, memory_function, tipc
from .dynamics import CopyMapSpec, DriveSequence, EsnSpec, OdeSpec, simulate_trajectory
from .ensemble import (
    EnsembleConfig,
    EnsembleResult,
    FeatureMatrix,
    FeatureSpec,
    ObservationFn,
    ensemble_features,
)
from .errors import (
    DegenerateMatrixError,
    DegeneratePerturbationError,
    DivergenceError,
    InstabilityError,
    InvalidArgumentError,
    SingularityError,
)
from .lyapunov import LyapunovConfig, bifurcation_scan, max_lyapunov
from .readout import ReadoutModel, fit, fit_and_score, nmse
from .tasks import TaskSpec, crc_target, hamming_decode_target, hamming_encode_target, narma10_target

__all__ = [
    "BACKEND",
    "CapacityReport",
    "CopyMapSpec",
    "DegenerateMatrixError",
    "DegeneratePerturbationError",
    "DivergenceError",
    "DriveSequence",
    "EnsembleConfig",
    "EnsembleResult",
    "EsnSpec",
    "FeatureMatrix",
    "FeatureSpec",
    "InstabilityError",
    "InvalidArgumentError",
    "LyapunovConfig",
    "MemoryCurve",
    "ObservationFn",
    "OdeSpec",
    "ReadoutModel",
    "SingularityError",
    "TaskSpec",
    "bifurcation_scan",
    "crc_target",
    "ensemble_features",
    "fit",
    "fit_and_score",
    "hamming_decode_target",
    "hamming_encode_target",
    "ipc",
    "max_lyapunov",
    "memory_capacity",
    "memory_function",
    "narma10_target",
    "nmse",
    "simulate_trajectory",
    "tipc",
]
