"""Crossing probabilities of critical site percolation on planar domains, tori and branched covers."""

__version__ = "0.1.0"

from .rng import RandomSource, derive_stream
from .conformal import (ShearMatrix, cardy, cardy_diagonal, cardy_rect, diagonal_crossratio,
                        parallelogram_to_rect, side_ratio, theta_for_ratio)
from .lattice import (Annulus, BranchedParallelogram, Constant, CylinderRect, DiscreteDomain, Parallelogram,
                      Rectangle, Striated, build_branched_double_cover, build_cylinder, build_domain,
                      build_glued_exterior, build_torus, sample_configuration)
from .cluster import crossing_battery, image_subgroup, label_clusters, wrapping_vectors
from .estimate import EstimateResult, ExperimentSpec, HomologyTally, estimate_events
from .fit import FitResult, StriatedDataset, fit_annulus_exponent, fit_shear, predict_parallelogram

__all__ = [
    "RandomSource", "derive_stream",
    "ShearMatrix", "cardy", "cardy_diagonal", "cardy_rect", "diagonal_crossratio", "parallelogram_to_rect",
    "side_ratio", "theta_for_ratio",
    "Annulus", "BranchedParallelogram", "Constant", "CylinderRect", "DiscreteDomain", "Parallelogram",
    "Rectangle", "Striated", "build_branched_double_cover", "build_cylinder", "build_domain",
    "build_glued_exterior", "build_torus", "sample_configuration",
    "crossing_battery", "image_subgroup", "label_clusters", "wrapping_vectors",
    "EstimateResult", "ExperimentSpec", "HomologyTally", "estimate_events",
    "FitResult", "StriatedDataset", "fit_annulus_exponent", "fit_shear", "predict_parallelogram",
]
