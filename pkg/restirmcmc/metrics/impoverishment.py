"""
Duplicate-sample heatmaps from per-pixel sample id maps.

Pixels without a sample carry id -1 and are neither counted nor counted against.
"""
import numpy as np

DEFAULT_WINDOW = 20


def window_offsets(window: int) -> np.ndarray:
    """Offsets covered by a window x window neighborhood: -window//2 .. window - window//2 - 1."""
    lo = -(window // 2)
    return np.arange(lo, lo + window)


def duplicate_heatmap(ids: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """
    Count, for every pixel, the other pixels in its neighborhood holding the same sample id.

    Args:
        ids: (h, w) integer sample ids, -1 where a pixel holds no sample
        window: Neighborhood edge length; boxes are clipped at the image border

    Returns:
        (h, w) int64 counts; 0 means no duplicates
    """
    ids = np.asarray(ids, dtype=np.int64)
    h, w = ids.shape
    offsets = window_offsets(window)
    pad_lo = int(-offsets[0])
    pad_hi = int(max(offsets[-1], 0))
    padded = np.pad(ids, ((pad_lo, pad_hi), (pad_lo, pad_hi)), constant_values=-1)
    counts = np.zeros((h, w), dtype=np.int64)
    for dy in offsets:
        for dx in offsets:
            if dy == 0 and dx == 0:
                continue
            other = padded[pad_lo + dy:pad_lo + dy + h, pad_lo + dx:pad_lo + dx + w]
            counts += (other == ids) & (ids >= 0)
    return counts


def mean_duplicates(heatmap: np.ndarray) -> float:
    return float(np.mean(heatmap))


def heatmap_image(heatmap: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Grey (h, w, 3) image: black for no duplicates, white for a window full of them."""
    scale = max(window * window - 1, 1)
    grey = np.clip(np.asarray(heatmap, dtype=float) / scale, 0.0, 1.0)
    return np.repeat(grey[..., None], 3, axis=-1)


def heatmap_rows(heatmap: np.ndarray):
    """(pixel_x, pixel_y, duplicates) rows for CSV output."""
    h, w = heatmap.shape
    y, x = np.mgrid[0:h, 0:w]
    return {"pixel_x": x.ravel(), "pixel_y": y.ravel(), "duplicates": np.asarray(heatmap).ravel()}
