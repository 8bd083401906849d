"""
Primary sample space: vectors of uniforms in [0, 1) and their perturbation.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from restirmcmc.errors import ErrorHandler, InvalidValueError

# (n, d) array of numbers in [0, 1); one row per lane
PssVector = np.ndarray

DEFAULT_S1 = 1.0 / 1024.0
DEFAULT_S2 = 1.0 / 64.0


class MutationStrategy(str, Enum):
    DI_DIRECTION = "di-direction"
    RECONNECTION_VERTEX = "reconnection-vertex"


@dataclass
class MutationConfig:
    """Number of MH steps per frame and the perturbation bounds."""
    iters: int = 1
    s1: float = DEFAULT_S1
    s2: float = DEFAULT_S2
    strategy: MutationStrategy = MutationStrategy.DI_DIRECTION

    def __post_init__(self):
        self.iters = ErrorHandler.validate_range("mutation.iters", self.iters, 0, integer=True)
        self.s1 = ErrorHandler.validate_range("mutation.s1", self.s1, 0.0, 1.0, low_inclusive=False)
        self.s2 = ErrorHandler.validate_range("mutation.s2", self.s2, 0.0, 1.0, low_inclusive=False)
        if self.s1 > self.s2:
            raise InvalidValueError("mutation.s1", self.s1, f"a value <= mutation.s2 ({self.s2})")
        try:
            self.strategy = MutationStrategy(self.strategy)
        except ValueError:
            raise InvalidValueError("mutation.strategy", self.strategy,
                                    f"one of: {', '.join(s.value for s in MutationStrategy)}")


def wrap_unit(v: np.ndarray) -> np.ndarray:
    """Wrap onto the unit torus, mapping values that round up to 1.0 back to 0.0."""
    w = np.mod(v, 1.0)
    return np.where(w >= 1.0, 0.0, w)


def perturbation_scale(s1: float, s2: float, U: np.ndarray) -> np.ndarray:
    """s = s2 * exp(-log(s2 / s1) * U)."""
    return s2 * np.exp(-np.log(s2 / s1) * U)


def pss_perturb(u: PssVector, s1: float, s2: float, rng) -> PssVector:
    """
    Symmetric Gaussian perturbation of every component, wrapped into [0, 1).

    Consumes 2 * d numbers per lane: d uniforms for the scales, then d normals.
    """
    u = np.asarray(u, dtype=float)
    U = rng.random(u.shape)
    step = perturbation_scale(s1, s2, U) * rng.standard_normal(u.shape)
    return wrap_unit(u + step)
