"""Image error against a reference."""
import numpy as np

from restirmcmc.errors import DimensionMismatchError


def _check_shapes(image: np.ndarray, reference: np.ndarray):
    if image.shape != reference.shape:
        raise DimensionMismatchError(reference.shape, image.shape)


def mse(image, reference) -> float:
    """Mean squared difference over pixels and channels."""
    image = np.asarray(image, dtype=float)
    reference = np.asarray(reference, dtype=float)
    _check_shapes(image, reference)
    return float(np.mean((image - reference) ** 2))


def z_scores(mean, reference, mean_stderr, reference_stderr=None) -> np.ndarray:
    """
    Per-pixel (mean - reference) / combined standard error.

    Pixels where both standard errors vanish get z = 0 if the values agree and +-inf if not.
    """
    mean = np.asarray(mean, dtype=float)
    reference = np.asarray(reference, dtype=float)
    _check_shapes(mean, reference)
    var = np.asarray(mean_stderr, dtype=float) ** 2
    if reference_stderr is not None:
        var = var + np.asarray(reference_stderr, dtype=float) ** 2
    se = np.sqrt(var)
    diff = mean - reference
    exact = np.where(np.isclose(diff, 0.0), 0.0, np.copysign(np.inf, diff))
    return np.where(se > 0, diff / np.where(se > 0, se, 1.0), exact)


def relative_change(value: float, baseline: float) -> float:
    """(value - baseline) / baseline; 0 when both are 0."""
    if baseline == 0:
        return 0.0 if value == 0 else float("inf")
    return (value - baseline) / baseline
