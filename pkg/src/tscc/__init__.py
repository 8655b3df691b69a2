"""Spectral curvature clustering of points near affine flats, with the
quantities needed to check its theory numerically."""

__version__ = "0.1.0"

from .affinity import TensorSpec, WeightMatrix, perfect_weight_matrix, unfold, weight_matrix
from .curvature import DegenerateTupleError, polar_curvature, polar_curvature_linear, polar_sine, simplex_volume
from .diagnostics import (
    bound_constants,
    misclassification_rate,
    perfect_spectrum,
    principal_angles,
    separation_factor,
    subspace_distance,
    total_variation,
)
from .incidence import alpha_constant, analytic_bound, mc_curvature_moment, mc_incidence_constant
from .modelgen import Flat, MixtureModel, builtin_sampler, random_lines_model, sample_mixture
from .spectral import kmeans_cluster, run_tscc, spectral_embedding

__all__ = [
    "TensorSpec", "WeightMatrix", "perfect_weight_matrix", "unfold", "weight_matrix",
    "DegenerateTupleError", "polar_curvature", "polar_curvature_linear", "polar_sine", "simplex_volume",
    "bound_constants", "misclassification_rate", "perfect_spectrum", "principal_angles",
    "separation_factor", "subspace_distance", "total_variation",
    "alpha_constant", "analytic_bound", "mc_curvature_moment", "mc_incidence_constant",
    "Flat", "MixtureModel", "builtin_sampler", "random_lines_model", "sample_mixture",
    "kmeans_cluster", "run_tscc", "spectral_embedding",
]
