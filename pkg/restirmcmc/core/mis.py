"""
Multiple importance sampling weights: balance heuristic, temporal (two-technique)
weights with shift validity, and pairwise weights for spatial reuse.
"""
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num, den = np.broadcast_arrays(np.asarray(num, dtype=float), np.asarray(den, dtype=float))
    return np.divide(num, den, out=np.zeros(num.shape), where=den > 0)


def mis_balance(q_values, j: int) -> np.ndarray:
    """
    Balance heuristic q_j / sum_k q_k.

    Args:
        q_values: Technique densities, techniques on the last axis
        j: Index of the technique that produced the sample

    Returns:
        Weight in [0, 1]; 0 where every density is 0
    """
    q = np.asarray(q_values, dtype=float)
    return _safe_ratio(q[..., j], q.sum(axis=-1))


@dataclass
class MisContext:
    """
    Inputs of a two-technique temporal MIS weight.

    p_hat_other must already be shift-mapped and Jacobian-adjusted. shift_valid is
    false where the cross shift does not exist.
    """
    p_hat_self: ArrayLike
    p_hat_other: ArrayLike
    M_self: ArrayLike
    M_other: ArrayLike
    shift_valid: ArrayLike = True


def mis_temporal(ctx: MisContext, role: Literal["current", "previous"]) -> np.ndarray:
    """
    Temporal MIS weight M_s p_s / (M_s p_s + M_o p_o).

    When the cross shift is invalid the current technique takes weight 1 and the
    previous technique weight 0.
    """
    if role not in ("current", "previous"):
        raise ValueError(f"role must be 'current' or 'previous', got {role!r}")
    own = np.asarray(ctx.M_self, dtype=float) * np.asarray(ctx.p_hat_self, dtype=float)
    other = np.asarray(ctx.M_other, dtype=float) * np.asarray(ctx.p_hat_other, dtype=float)
    m = _safe_ratio(own, own + other)
    fallback = 1.0 if role == "current" else 0.0
    return np.where(np.asarray(ctx.shift_valid, dtype=bool), m, fallback)


def pairwise_neighbor_factor(p_hat_neighbor: ArrayLike, p_hat_canonical: ArrayLike,
                             M_neighbor: ArrayLike, M_canonical: ArrayLike, k: int) -> np.ndarray:
    """
    b_j = M_j p_j / (M_j p_j + (M_c / k) p_c), evaluated at one candidate.

    p_hat_neighbor is the neighbor's target carried into the canonical domain.
    Returns 0 where both terms vanish.
    """
    nb = np.asarray(M_neighbor, dtype=float) * np.asarray(p_hat_neighbor, dtype=float)
    canon = np.asarray(M_canonical, dtype=float) / k * np.asarray(p_hat_canonical, dtype=float)
    return _safe_ratio(nb, nb + canon)


def mis_pairwise(p_hat_canonical, p_hat_neighbors, M_values, which: int) -> np.ndarray:
    """
    Pairwise MIS weight of technique `which` at one candidate.

    Args:
        p_hat_canonical: Canonical target at the candidate, shape (n,) or scalar
        p_hat_neighbors: Neighbor targets at the candidate, shape (n, k) or (k,)
        M_values: Confidence weights [M_c, M_1, ..., M_k], shape (n, k+1) or (k+1,)
        which: 0 for the canonical technique, j >= 1 for neighbor j

    Returns:
        m_c = (1/k) sum_j (1 - b_j) for the canonical technique, m_j = b_j / k otherwise.
        The k + 1 weights sum to one for every candidate.
    """
    p_n = np.atleast_1d(np.asarray(p_hat_neighbors, dtype=float))
    M = np.atleast_1d(np.asarray(M_values, dtype=float))
    k = p_n.shape[-1]
    if k == 0:
        return np.ones(np.shape(p_hat_canonical))
    p_c = np.asarray(p_hat_canonical, dtype=float)[..., None]
    b = pairwise_neighbor_factor(p_n, p_c, M[..., 1:], M[..., :1], k)
    if which == 0:
        return (1.0 - b).sum(axis=-1) / k
    return b[..., which - 1] / k
