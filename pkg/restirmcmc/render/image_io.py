"""
Image files: 8-bit PPM (P6, gamma 2.2) for viewing and little-endian PFM for linear data.
"""
from pathlib import Path

import numpy as np

from restirmcmc.errors import ErrorHandler, ImageFormatError

# Rec. 709 luma weights
LUMA = np.array([0.2126, 0.7152, 0.0722])
GAMMA = 2.2


def luminance(rgb: np.ndarray) -> np.ndarray:
    return np.asarray(rgb, dtype=float) @ LUMA


def to_display(image: np.ndarray) -> np.ndarray:
    """Linear RGB in [0, inf) to gamma-encoded uint8."""
    clipped = np.clip(np.nan_to_num(image, nan=0.0, posinf=1.0, neginf=0.0), 0.0, 1.0)
    return np.round(255.0 * clipped ** (1.0 / GAMMA)).astype(np.uint8)


def write_ppm(path, image: np.ndarray) -> Path:
    """Write an (h, w, 3) linear image as binary PPM."""
    path = Path(path)
    h, w = image.shape[:2]
    data = b"P6\n%d %d\n255\n" % (w, h) + to_display(image.reshape(h, w, 3)).tobytes()
    ErrorHandler.handle_file_operation(lambda: path.write_bytes(data), str(path), "write")
    return path


def write_pfm(path, image: np.ndarray) -> Path:
    """Write an (h, w, 3) image as little-endian PFM, rows bottom to top."""
    path = Path(path)
    h, w = image.shape[:2]
    body = np.ascontiguousarray(image.reshape(h, w, 3)[::-1], dtype="<f4").tobytes()
    data = b"PF\n%d %d\n-1.0\n" % (w, h) + body
    ErrorHandler.handle_file_operation(lambda: path.write_bytes(data), str(path), "write")
    return path


def read_pfm(path) -> np.ndarray:
    """Read a colour PFM into an (h, w, 3) float64 array, top row first."""
    path = Path(path)
    raw = ErrorHandler.handle_file_operation(path.read_bytes, str(path))
    parts = raw.split(b"\n", 3)
    if len(parts) < 4 or parts[0].strip() != b"PF":
        raise ImageFormatError(str(path), "expected a 'PF' header")
    try:
        w, h = (int(v) for v in parts[1].split())
        scale = float(parts[2])
    except ValueError:
        raise ImageFormatError(str(path), "malformed size or scale line")
    dtype = "<f4" if scale < 0 else ">f4"
    body = parts[3]
    if len(body) != w * h * 3 * 4:
        raise ImageFormatError(str(path), f"expected {w * h * 3 * 4} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=dtype).reshape(h, w, 3)[::-1].astype(np.float64)


def write_ids(path, ids: np.ndarray) -> Path:
    path = Path(path)
    ErrorHandler.handle_file_operation(lambda: np.save(path, ids.astype(np.int64)), str(path), "write")
    return path
