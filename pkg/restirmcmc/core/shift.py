"""
Shift mappings between pixel domains.

The core package is domain agnostic: the identity shift lives here, the reconnection
shift needs scene geometry and is provided by the reuse context of the renderer.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional, Protocol

import numpy as np

from restirmcmc.core.reservoir import lane_count


class ShiftMode(str, Enum):
    IDENTITY = "identity"
    RECONNECTION = "reconnection"


@dataclass
class ShiftResult:
    """A sample batch re-expressed in another domain, with |dy'/dy| and validity per lane."""
    mapped_sample: Any
    jacobian: np.ndarray
    valid: np.ndarray


class ReconnectingDomain(Protocol):
    def reconnect(self, samples: Any, from_pixels: np.ndarray, to_pixels: np.ndarray) -> ShiftResult:
        ...


def identity_shift(samples: Any) -> ShiftResult:
    n = lane_count(samples)
    return ShiftResult(samples, np.ones(n), np.ones(n, dtype=bool))


def shift_map(samples: Any, from_pixels: np.ndarray, to_pixels: np.ndarray,
              mode: ShiftMode, domain: Optional[ReconnectingDomain] = None) -> ShiftResult:
    """
    Map samples from one pixel's integration domain into another's.

    Args:
        samples: Sample batch
        from_pixels: Pixel index each sample currently belongs to
        to_pixels: Destination pixel index per lane
        mode: Identity (shared light-area domain) or reconnection (path mode)
        domain: Scene-aware object implementing reconnect(); required for reconnection

    Returns:
        ShiftResult; invalid lanes must contribute zero resampling weight
    """
    mode = ShiftMode(mode)
    if mode is ShiftMode.IDENTITY:
        return identity_shift(samples)
    if domain is None:
        raise ValueError("reconnection shift needs a scene domain")
    return domain.reconnect(samples, np.asarray(from_pixels), np.asarray(to_pixels))
