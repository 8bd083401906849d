"""
Pixel covariance over ensembles of independently rendered images.

Covariances are computed per colour channel and reduced to one scalar with the Rec. 709
luma weights. Box averages use clipped boxes at the image border.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from restirmcmc.errors import DimensionMismatchError, FileNotReadableError, InvalidValueError, RejectedInputError
from restirmcmc.render.image_io import LUMA, read_pfm

logger = logging.getLogger(__name__)

DEFAULT_RADII = (1, 2, 4, 8, 16)

Pixel = Union[int, Tuple[int, int]]


@dataclass
class ImageEnsemble:
    """K images of one view, stacked as a (K, h, w, 3) array."""
    images: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        if self.images.ndim == 3:
            self.images = np.repeat(self.images[..., None], 3, axis=-1)
        if self.images.ndim != 4 or self.images.shape[-1] != 3:
            raise DimensionMismatchError(("K", "h", "w", 3), self.images.shape)
        if self.K < 2:
            raise InvalidValueError("metrics.K", self.K, "at least 2 images")
        if not np.all(np.isfinite(self.images)):
            raise RejectedInputError("Ensemble images must be finite",
                                     f"{int(np.count_nonzero(~np.isfinite(self.images)))} non-finite values")

    @property
    def K(self) -> int:
        return int(self.images.shape[0])

    @property
    def height(self) -> int:
        return int(self.images.shape[1])

    @property
    def width(self) -> int:
        return int(self.images.shape[2])

    @property
    def mean(self) -> np.ndarray:
        return self.images.mean(axis=0)

    def deviations(self) -> np.ndarray:
        return self.images - self.mean[None]

    @classmethod
    def from_directory(cls, path) -> "ImageEnsemble":
        """Load every *.pfm file of a directory, in file-name order."""
        path = Path(path)
        files = sorted(path.glob("*.pfm"))
        if not files:
            raise FileNotReadableError(str(path), "no .pfm images found")
        images = [read_pfm(f) for f in files]
        for f, image in zip(files, images):
            if image.shape != images[0].shape:
                raise DimensionMismatchError(images[0].shape, image.shape)
        logger.info("loaded %d images of %dx%d from %s", len(images), images[0].shape[1],
                    images[0].shape[0], path)
        return cls(np.stack(images))


@dataclass
class CovarianceReport:
    """Box-averaged covariance maps and their image means, one entry per radius."""
    radii: List[int]
    maps: Dict[int, np.ndarray] = field(default_factory=dict)
    image_average: Dict[int, float] = field(default_factory=dict)
    include_self: bool = False

    def merge(self, other: "CovarianceReport") -> "CovarianceReport":
        return CovarianceReport(self.radii + [r for r in other.radii if r not in self.radii],
                                {**self.maps, **other.maps},
                                {**self.image_average, **other.image_average},
                                self.include_self)

    def rows(self) -> List[Dict]:
        return [{"radius": r, "include_self": self.include_self,
                 "image_avg_covariance": self.image_average[r]} for r in self.radii]


def _flat(ens: ImageEnsemble, pixel: Pixel) -> int:
    if isinstance(pixel, tuple):
        x, y = pixel
        return int(y) * ens.width + int(x)
    return int(pixel)


def sample_covariance(ens: ImageEnsemble, i: Pixel, j: Pixel) -> float:
    """
    Unbiased sample covariance between two pixels, reduced to luminance.

    Args:
        ens: Image ensemble (K >= 2)
        i: Pixel as flat index or (x, y)
        j: Pixel as flat index or (x, y)

    Returns:
        sum_c LUMA_c * (1/(K-1)) sum_k (I_kic - mean_ic)(I_kjc - mean_jc)
    """
    flat = ens.deviations().reshape(ens.K, -1, 3)
    di = flat[:, _flat(ens, i)]
    dj = flat[:, _flat(ens, j)]
    per_channel = (di * dj).sum(axis=0) / (ens.K - 1)
    return float(per_channel @ LUMA)


def covariance_matrix(ens: ImageEnsemble, pixels: Sequence[Pixel]) -> np.ndarray:
    """Luminance covariance matrix of a handful of pixels."""
    idx = [_flat(ens, p) for p in pixels]
    d = ens.deviations().reshape(ens.K, -1, 3)[:, idx]
    per_channel = np.einsum("kac,kbc->abc", d, d) / (ens.K - 1)
    return per_channel @ LUMA


def _box_sums(values: np.ndarray, radius: int) -> Tuple[np.ndarray, np.ndarray]:
    """Sums of values over clipped L-inf boxes on axes 1 and 2, plus the box sizes."""
    _, h, w = values.shape[:3]
    integral = np.zeros((values.shape[0], h + 1, w + 1) + values.shape[3:])
    integral[:, 1:, 1:] = values.cumsum(axis=1).cumsum(axis=2)
    y = np.arange(h)
    x = np.arange(w)
    y0 = np.maximum(y - radius, 0)[:, None]
    y1 = np.minimum(y + radius, h - 1)[:, None] + 1
    x0 = np.maximum(x - radius, 0)[None, :]
    x1 = np.minimum(x + radius, w - 1)[None, :] + 1
    sums = integral[:, y1, x1] - integral[:, y0, x1] - integral[:, y1, x0] + integral[:, y0, x0]
    counts = (y1 - y0) * (x1 - x0)
    return sums, counts


def box_avg_covariance(ens: ImageEnsemble, radius: int, include_self: bool = False) -> CovarianceReport:
    """
    Per-pixel mean of c_ij over the L-inf box of the given radius around i.

    Args:
        ens: Image ensemble
        radius: Box radius in pixels, >= 0
        include_self: Whether j == i takes part in the average

    Returns:
        CovarianceReport for this radius. Without the self term a radius-0 box is empty
        and its map is 0.
    """
    if radius < 0:
        raise InvalidValueError("metrics.radii", radius, "a radius >= 0")
    d = ens.deviations()
    sums, counts = _box_sums(d, radius)
    cross = (d * sums).sum(axis=0) / (ens.K - 1)
    if not include_self:
        cross = cross - (d * d).sum(axis=0) / (ens.K - 1)
        counts = counts - 1
    per_channel = np.divide(cross, counts[..., None], out=np.zeros_like(cross),
                            where=counts[..., None] > 0)
    cov_map = per_channel @ LUMA
    avg = float(cov_map.mean())
    logger.debug("radius %d: image-average covariance %.6g", radius, avg)
    return CovarianceReport([radius], {radius: cov_map}, {radius: avg}, include_self)


def radial_covariance(ens: ImageEnsemble, radii: Sequence[int] = DEFAULT_RADII,
                      include_self: bool = False) -> CovarianceReport:
    """box_avg_covariance over several radii in one report."""
    report = CovarianceReport([], {}, {}, include_self)
    for r in radii:
        report = report.merge(box_avg_covariance(ens, int(r), include_self))
    return report


def decay_inversions(report: CovarianceReport, from_radius: float = 0) -> int:
    """Number of radii (beyond from_radius) at which the image average increases."""
    values = [report.image_average[r] for r in sorted(report.radii) if r >= from_radius]
    return int(sum(1 for a, b in zip(values, values[1:]) if b > a))
