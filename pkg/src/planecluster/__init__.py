"""Plane-based clustering.

Each cluster is represented by a hyperplane ``w.x + b = 0``.  Clustering
alternates between fitting every plane to its cluster (and away from the
other clusters) and reassigning every sample to its best plane.  Seven loss
presets are available: ``kpc``, ``ppc``, ``twsvc``, ``rtwsvc``, ``frtwsvc``,
``ramptwsvc`` and ``rfdpc``.
"""
from .core import (
    Dataset,
    DeviationKind,
    DimensionMismatchError,
    PlaneClusteringError,
    PlaneSet,
    TooFewSamplesError,
    ZeroWeightError,
    deviation,
    deviation_matrix,
    deviation_vector,
)
from .datasets import SynthSpec, generate_synthetic, load_csv, load_iris, save_csv, scale_features
from .engine import ClusteringState, EngineConfig, RunTrace, assign, initialize, run, update_planes, verify_weak_local_optimality
from .estimator import PlaneClustering
from .kernels import KernelSpec, empirical_map, kernel_value
from .losses import ClusterStats, LossSpec, Preset, between_loss, objective, sample_loss, total_loss, within_loss
from .metrics import EvalReport, accuracy, best_match_accuracy, evaluate, mutual_information
from .solvers import SolveConfig, solve_kpc_plane, solve_plane, solve_ppc_plane

__version__ = "0.1.0"

__all__ = [
    "ClusterStats",
    "ClusteringState",
    "Dataset",
    "DeviationKind",
    "DimensionMismatchError",
    "EngineConfig",
    "EvalReport",
    "KernelSpec",
    "LossSpec",
    "PlaneClustering",
    "PlaneClusteringError",
    "PlaneSet",
    "Preset",
    "RunTrace",
    "SolveConfig",
    "SynthSpec",
    "TooFewSamplesError",
    "ZeroWeightError",
    "accuracy",
    "assign",
    "best_match_accuracy",
    "between_loss",
    "deviation",
    "deviation_matrix",
    "deviation_vector",
    "empirical_map",
    "evaluate",
    "generate_synthetic",
    "initialize",
    "kernel_value",
    "load_csv",
    "load_iris",
    "mutual_information",
    "objective",
    "run",
    "sample_loss",
    "save_csv",
    "scale_features",
    "solve_kpc_plane",
    "solve_plane",
    "solve_ppc_plane",
    "total_loss",
    "update_planes",
    "verify_weak_local_optimality",
    "within_loss",
]
