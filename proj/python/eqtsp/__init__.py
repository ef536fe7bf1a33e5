"""Equivariant neural TSP solver: instances, local search, policy and benchmarks."""

from ._eqtsp import (
    ConfigError,
    DegenerateInstance,
    InvalidState,
    ModelMismatch,
    OracleSizeExceeded,
    ParseError,
    Policy,
    UnsupportedFormat,
    TsplibInstance,
    bench,
    brute_force_optimal,
    combined_local_search,
    curriculum_dist,
    insertion_heuristic,
    load_tsplib,
    methods,
    random_instance,
    tour_length,
    train,
    two_opt_baseline,
)

__all__ = [
    "ConfigError",
    "DegenerateInstance",
    "InvalidState",
    "ModelMismatch",
    "OracleSizeExceeded",
    "ParseError",
    "Policy",
    "TsplibInstance",
    "UnsupportedFormat",
    "bench",
    "brute_force_optimal",
    "combined_local_search",
    "curriculum_dist",
    "insertion_heuristic",
    "load_tsplib",
    "methods",
    "random_instance",
    "tour_length",
    "train",
    "two_opt_baseline",
]
