"""
Deterministic quadrature used as the reference value for every statistical gate.
"""
import logging
from typing import Callable

import numpy as np

from restirmcmc.errors import ErrorHandler, OracleFailureError

logger = logging.getLogger(__name__)

MAX_INTERVALS = 1 << 20
RELATIVE_TOLERANCE = 1e-10


def simpson(g: Callable[[np.ndarray], np.ndarray], n: int, lo: float = 0.0, hi: float = 1.0) -> float:
    """Composite Simpson rule with n (even) intervals."""
    x = np.linspace(lo, hi, n + 1)
    y = np.asarray(g(x), dtype=float)
    h = (hi - lo) / n
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def quad_oracle(g: Callable[[np.ndarray], np.ndarray], n: int = 64, lo: float = 0.0, hi: float = 1.0,
                tol: float = RELATIVE_TOLERANCE) -> float:
    """
    Integrate g over [lo, hi], doubling the interval count until two successive
    estimates agree to `tol` relative.

    Args:
        g: Vectorised integrand
        n: Starting interval count, >= 2 (rounded up to even)
        lo: Lower bound
        hi: Upper bound
        tol: Relative tolerance between refinements

    Returns:
        Converged integral

    Raises:
        OracleFailureError: If 2^20 intervals are reached without convergence
    """
    n = ErrorHandler.validate_range("testbed.quadrature_intervals", n, 2, integer=True)
    n += n % 2
    previous = simpson(g, n, lo, hi)
    delta = float("inf")
    while n < MAX_INTERVALS:
        n *= 2
        current = simpson(g, n, lo, hi)
        scale = max(abs(current), abs(previous))
        delta = abs(current - previous) / scale if scale > 0 else 0.0
        if delta < tol:
            logger.debug("quadrature converged with %d intervals", n)
            return current
        previous = current
    raise OracleFailureError(n, delta)
