"""Critical Ising models on circle patterns: Kac-Ward matrices and brute-force checks."""

__version__ = "0.1.0"

from .graph import EmbeddedGraph, turning_angle
from .kacward import (KacWardSystem, block_operator_norm, build_system, critical_eigenvector,
                      global_norm_bound, partition_function, solve, vertex_block)
from .pattern import (CirclePattern, generate_acute_triangulation, generate_isoradial_square,
                      generate_stretched_square, half_edge_extension, load_pattern, validate)
from .weights import (WeightVector, beta_deformed_weights, critical_couplings,
                      critical_directed_weights, decay_constant, defect_curve)

__all__ = [
    "EmbeddedGraph", "turning_angle", "CirclePattern", "load_pattern", "validate",
    "generate_isoradial_square", "generate_stretched_square", "generate_acute_triangulation",
    "half_edge_extension", "WeightVector", "critical_couplings", "critical_directed_weights",
    "beta_deformed_weights", "decay_constant", "defect_curve", "KacWardSystem",
    "build_system", "partition_function", "solve", "vertex_block", "block_operator_norm",
    "global_norm_bound", "critical_eigenvector",
]
