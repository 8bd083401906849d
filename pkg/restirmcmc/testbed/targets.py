"""
Analytic 1D targets and source densities on [0, 1].
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from restirmcmc.errors import InvalidValueError
from restirmcmc.testbed.oracle import quad_oracle

Density = Callable[[np.ndarray], np.ndarray]


def gaussian(mean: float, sigma: float, scale: float = 1.0) -> Density:
    """Unnormalized Gaussian bump scale * exp(-(x - mean)^2 / (2 sigma^2))."""
    def g(x):
        x = np.asarray(x, dtype=float)
        return scale * np.exp(-0.5 * ((x - mean) / sigma) ** 2)
    return g


def mixture(components: Sequence[Tuple[float, float, float]]) -> Density:
    """Sum of gaussian(mean, sigma, weight) bumps."""
    parts = [gaussian(m, s, w) for m, s, w in components]

    def g(x):
        return sum(p(x) for p in parts)
    return g


def exponential(rate: float, scale: float = 1.0) -> Density:
    def g(x):
        return scale * np.exp(rate * np.asarray(x, dtype=float))
    return g


@dataclass
class AnalyticTarget:
    """
    Target p_hat and integrand f on [0, 1] with their reference integrals.

    f defaults to p_hat. Integrals are computed once by quadrature.
    """
    name: str
    p_hat: Density
    f: Optional[Density] = None
    p_hat_integral: float = field(init=False)
    f_integral: float = field(init=False)
    p_hat_max: float = field(init=False)

    def __post_init__(self):
        if self.f is None:
            self.f = self.p_hat
        grid = np.linspace(0.0, 1.0, 4097)
        values = np.asarray(self.p_hat(grid), dtype=float)
        if np.any(~np.isfinite(values)) or np.any(values <= 0):
            raise InvalidValueError(f"testbed.targets.{self.name}", "p_hat",
                                    "a finite density that is positive on all of [0, 1]")
        self.p_hat_max = float(values.max())
        self.p_hat_integral = quad_oracle(self.p_hat)
        self.f_integral = quad_oracle(self.f)

    def normalized(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.p_hat(x), dtype=float) / self.p_hat_integral

    def bin_masses(self, bins: int) -> np.ndarray:
        """Probability of each of `bins` equal cells under p_hat / ||p_hat||."""
        edges = np.linspace(0.0, 1.0, bins + 1)
        return np.array([quad_oracle(self.p_hat, 16, a, b) for a, b in zip(edges[:-1], edges[1:])]) \
            / self.p_hat_integral


@dataclass
class SourceDensity:
    """A normalized candidate density on [0, 1] with its inverse CDF."""
    name: str
    pdf: Density
    inverse_cdf: Callable[[np.ndarray], np.ndarray]


def uniform_source() -> SourceDensity:
    return SourceDensity("uniform", lambda x: np.ones_like(np.asarray(x, dtype=float)),
                         lambda u: np.asarray(u, dtype=float))


def skewed_source() -> SourceDensity:
    """q(x) = 0.2 + 1.6 (1 - x): five times denser at 0 than at 1."""
    def pdf(x):
        return 0.2 + 1.6 * (1.0 - np.asarray(x, dtype=float))

    def inverse_cdf(u):
        # CDF 1.8 x - 0.8 x^2
        u = np.asarray(u, dtype=float)
        return np.clip((1.8 - np.sqrt(3.24 - 3.2 * u)) / 1.6, 0.0, np.nextafter(1.0, 0.0))
    return SourceDensity("skewed", pdf, inverse_cdf)


SOURCES = {"uniform": uniform_source, "skewed": skewed_source}


def sample_exact(target: AnalyticTarget, rng, n: int, rounds: int = 64) -> np.ndarray:
    """
    Draw n samples distributed exactly as p_hat / ||p_hat|| by rejection from a uniform
    envelope.

    Consumes 2 * rounds numbers per lane. Lanes that reject every round (probability
    (1 - acceptance)^rounds) keep their last proposal.
    """
    u = rng.random((n, 2 * rounds)).reshape(n, rounds, 2)
    x = u[..., 0]
    accept = u[..., 1] * target.p_hat_max <= target.p_hat(x)
    first = np.where(accept.any(axis=1), accept.argmax(axis=1), rounds - 1)
    return x[np.arange(n), first]


def bimodal_target() -> AnalyticTarget:
    """Two narrow bumps (weights 0.6 / 0.4) over a small floor that keeps full support."""
    bumps = mixture([(0.3, 0.07, 0.6 / 0.07), (0.7, 0.07, 0.4 / 0.07)])
    return AnalyticTarget("bimodal", lambda x: bumps(x) + 1e-3)


def uniform_target() -> AnalyticTarget:
    return AnalyticTarget("uniform", lambda x: np.ones_like(np.asarray(x, dtype=float)))


def mixture_target() -> AnalyticTarget:
    """Gaussian mixture target with an integrand that differs from it by a linear factor."""
    p_hat = mixture([(0.3, 0.1, 1.0), (0.75, 0.08, 0.5)])
    return AnalyticTarget("mixture", p_hat, lambda x: p_hat(x) * (0.5 + np.asarray(x, dtype=float)))


def exponential_target() -> AnalyticTarget:
    return AnalyticTarget("exponential", exponential(-3.0, 2.0))


def dissimilar_pair() -> Tuple[AnalyticTarget, AnalyticTarget]:
    """Two overlapping bumps centred left and right of 0.5, for the two-pixel experiment."""
    left = gaussian(0.4, 0.15)
    right = gaussian(0.6, 0.15)
    return (AnalyticTarget("left", lambda x: left(x) + 0.05),
            AnalyticTarget("right", lambda x: right(x) + 0.05))


TARGETS = {
    "uniform": uniform_target,
    "bimodal": bimodal_target,
    "mixture": mixture_target,
    "exponential": exponential_target,
}


def named_target(name: str) -> AnalyticTarget:
    if name not in TARGETS:
        raise InvalidValueError("testbed.target", name, f"one of: {', '.join(TARGETS)}")
    return TARGETS[name]()
