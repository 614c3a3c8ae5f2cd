"""Joint estimation and hierarchical testing of Hawkes process networks across experiments."""
from .core import (EventStream, ExperimentData, ExponentialKernel, Link, MultiExperimentData,
                   MultiModel, NonConvergenceError, StabilityError, TabulatedKernel, UnitParams)
from .crosscov import cross_covariance, similarity_weights, threshold_covariance
from .estimate import SolverConfig, joint_fit, precompute_design, threshold_edges, tune
from .infer import TestConfig, bonferroni_test, hierarchical_test, score_statistics
from .simulate import make_benchmark_networks, simulate_hawkes, simulate_multi
from .tree import SimilarityTree, build_tree, oracle_tree

__version__ = "0.1.0"

__all__ = [
    "EventStream", "ExperimentData", "MultiExperimentData", "ExponentialKernel",
    "TabulatedKernel", "Link", "UnitParams", "MultiModel", "StabilityError",
    "NonConvergenceError", "simulate_hawkes", "simulate_multi", "make_benchmark_networks",
    "cross_covariance", "threshold_covariance", "similarity_weights", "precompute_design",
    "joint_fit", "tune", "threshold_edges", "SolverConfig", "SimilarityTree", "build_tree",
    "oracle_tree", "score_statistics", "hierarchical_test", "bonferroni_test", "TestConfig",
]
