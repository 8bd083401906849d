"""
Weighted reservoir sampling with a single selected sample per reservoir.

A Reservoir holds n independent reservoirs side by side (one per pixel or per trial),
so every operation is a vectorised pass over n lanes. n = 1 is the scalar record.
Samples are either NumPy arrays whose leading axis is the lane axis, or dataclasses
whose fields are such arrays (fields set to None are carried through untouched).
"""
from dataclasses import dataclass, fields, is_dataclass, replace
from typing import Any, Iterable, Tuple

import numpy as np

from restirmcmc.errors import RejectedInputError


def select_samples(mask: np.ndarray, a: Any, b: Any) -> Any:
    """Lane-wise choice: a where mask is true, else b."""
    if is_dataclass(a):
        updates = {}
        for f in fields(a):
            va, vb = getattr(a, f.name), getattr(b, f.name)
            if va is None or vb is None:
                continue
            updates[f.name] = select_samples(mask, va, vb)
        return replace(a, **updates)
    a = np.asarray(a)
    b = np.asarray(b)
    m = np.asarray(mask, dtype=bool).reshape(mask.shape + (1,) * (a.ndim - 1))
    return np.where(m, a, b)


def take_samples(samples: Any, index: np.ndarray) -> Any:
    """Gather lanes by index."""
    if is_dataclass(samples):
        updates = {}
        for f in fields(samples):
            v = getattr(samples, f.name)
            if v is not None:
                updates[f.name] = take_samples(v, index)
        return replace(samples, **updates)
    return np.asarray(samples)[index]


def lane_count(samples: Any) -> int:
    if is_dataclass(samples):
        for f in fields(samples):
            v = getattr(samples, f.name)
            if v is not None:
                return lane_count(v)
        raise ValueError("sample dataclass has no array fields")
    return int(np.asarray(samples).shape[0])


def uniform_columns(rng, n: int, cols: int) -> np.ndarray:
    """Draw an (n, cols) block from a Generator-like source."""
    return np.asarray(rng.random((n, cols)), dtype=float).reshape(n, cols)


@dataclass
class Reservoir:
    """
    Reservoir state (x, w_sum, M, W) for n lanes.

    sample is meaningful only where w_sum > 0; elsewhere it is a placeholder.
    M is kept real-valued so that capped and summed confidence weights need no casts.
    """
    sample: Any
    w_sum: np.ndarray
    M: np.ndarray
    W: np.ndarray

    @classmethod
    def empty(cls, sample_like: Any) -> "Reservoir":
        """Empty reservoirs shaped like sample_like (its values are never read)."""
        n = lane_count(sample_like)
        return cls(sample_like, np.zeros(n), np.zeros(n), np.zeros(n))

    def __len__(self) -> int:
        return int(self.w_sum.shape[0])

    @property
    def has_sample(self) -> np.ndarray:
        return self.w_sum > 0

    def take(self, index: np.ndarray) -> "Reservoir":
        return Reservoir(take_samples(self.sample, index), self.w_sum[index],
                         self.M[index], self.W[index])

    def where(self, mask: np.ndarray, other: "Reservoir") -> "Reservoir":
        return Reservoir(
            select_samples(mask, self.sample, other.sample),
            np.where(mask, self.w_sum, other.w_sum),
            np.where(mask, self.M, other.M),
            np.where(mask, self.W, other.W),
        )


def reservoir_update(r: Reservoir, y: Any, w, rng) -> Reservoir:
    """
    Stream one candidate per lane into the reservoirs.

    Args:
        r: Current reservoirs
        y: Candidate samples (one per lane)
        w: Resampling weights, finite and >= 0
        rng: Generator-like source with random(shape)

    Returns:
        New reservoirs: w_sum += w, M += 1, sample replaced with probability w / w_sum

    Raises:
        RejectedInputError: If any weight is negative or not finite
    """
    n = len(r)
    w = np.broadcast_to(np.asarray(w, dtype=float), (n,))
    bad = ~np.isfinite(w) | (w < 0)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        raise RejectedInputError(
            "Resampling weights must be finite and non-negative",
            f"lane {first} has weight {w[first]!r}",
        )
    u = uniform_columns(rng, n, 1)[:, 0]
    w_sum = r.w_sum + w
    chosen = (w > 0) & (u * w_sum < w)
    return Reservoir(select_samples(chosen, y, r.sample), w_sum, r.M + 1.0, r.W.copy())


def finalize_contribution_weight(r: Reservoir, p_hat_at_sample) -> Reservoir:
    """Set W = w_sum / p_hat(x), or 0 where p_hat(x) == 0 or the reservoir is empty."""
    p = np.broadcast_to(np.asarray(p_hat_at_sample, dtype=float), r.w_sum.shape)
    ok = (p > 0) & r.has_sample
    W = np.divide(r.w_sum, p, out=np.zeros_like(r.w_sum), where=ok)
    return Reservoir(r.sample, r.w_sum, r.M, W)


def resampling_weight(m, p_hat, W, jacobian=1.0) -> np.ndarray:
    """Resampling weight w = m * p_hat(y') * W(y) * |dy'/dy|."""
    return np.asarray(m, dtype=float) * np.asarray(p_hat, dtype=float) \
        * np.asarray(W, dtype=float) * np.asarray(jacobian, dtype=float)


@dataclass
class _Tracked:
    sample: Any
    p_hat: np.ndarray


def stream_candidates(candidates: Iterable[Tuple[Any, np.ndarray, np.ndarray]], rng,
                      sample_like: Any) -> Tuple[Reservoir, np.ndarray]:
    """
    Stream (samples, weights, p_hat) triples through fresh reservoirs.

    Returns the reservoirs (W not yet finalized) and p_hat at each selected sample.
    """
    n = lane_count(sample_like)
    r = Reservoir.empty(_Tracked(sample_like, np.zeros(n)))
    for samples, weights, p_hat in candidates:
        r = reservoir_update(r, _Tracked(samples, np.asarray(p_hat, dtype=float)), weights, rng)
    selected_p = np.where(r.has_sample, r.sample.p_hat, 0.0)
    return Reservoir(r.sample.sample, r.w_sum, r.M, r.W), selected_p
