"""Covariance, impoverishment and error metrics over rendered images."""
from .covariance import (
    DEFAULT_RADII, CovarianceReport, ImageEnsemble, box_avg_covariance, covariance_matrix,
    decay_inversions, radial_covariance, sample_covariance,
)
from .error import mse, relative_change, z_scores
from .impoverishment import DEFAULT_WINDOW, duplicate_heatmap, heatmap_image, heatmap_rows, mean_duplicates

__all__ = [
    "DEFAULT_RADII", "CovarianceReport", "ImageEnsemble", "box_avg_covariance",
    "covariance_matrix", "decay_inversions", "radial_covariance", "sample_covariance",
    "mse", "relative_change", "z_scores",
    "DEFAULT_WINDOW", "duplicate_heatmap", "heatmap_image", "heatmap_rows", "mean_duplicates",
]
