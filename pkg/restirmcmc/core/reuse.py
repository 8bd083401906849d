"""
Temporal and spatial reservoir combination.

Both procedures stream shift-mapped, MIS-weighted candidates through a fresh reservoir
(resampling weight m * p_hat(y') * W(y) * |dy'/dy|), then set the confidence weight to the
sum of the participants' M and finalize W.
"""
from typing import Any, Optional, Protocol, Sequence

import numpy as np

from restirmcmc.core.mis import MisContext, mis_temporal, pairwise_neighbor_factor
from restirmcmc.core.reservoir import (
    Reservoir, finalize_contribution_weight, resampling_weight, stream_candidates,
)
from restirmcmc.core.shift import ShiftResult


class ReuseContext(Protocol):
    """Target functions and shift map of a set of pixels (or testbed lanes)."""

    def target(self, samples: Any, pixels: np.ndarray) -> np.ndarray:
        ...

    def shift(self, samples: Any, from_pixels: np.ndarray, to_pixels: np.ndarray) -> ShiftResult:
        ...


def _target_where(ctx: ReuseContext, samples: Any, pixels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, ctx.target(samples, pixels), 0.0)


def combine_temporal(r_i: Reservoir, r_j: Reservoir, m_cap: float, ctx: ReuseContext, rng,
                     pixels: Optional[np.ndarray] = None,
                     previous_pixels: Optional[np.ndarray] = None,
                     ctx_previous: Optional[ReuseContext] = None) -> Reservoir:
    """
    Combine current reservoirs with last frame's reservoirs.

    Args:
        r_i: Current-frame reservoirs
        r_j: Previous-frame reservoirs of the corresponding pixels
        m_cap: Confidence cap applied to r_j.M; 0 makes temporal reuse inert
        ctx: Reuse context of the current frame
        rng: Generator-like source, two uniforms per lane
        pixels: Pixel index per lane (defaults to lane index)
        previous_pixels: Corresponding previous-frame pixels (defaults to pixels)
        ctx_previous: Reuse context of the previous frame (defaults to ctx)

    Returns:
        Finalized reservoirs with M = r_i.M + min(r_j.M, m_cap)
    """
    n = len(r_i)
    pixels = np.arange(n) if pixels is None else np.asarray(pixels)
    previous_pixels = pixels if previous_pixels is None else np.asarray(previous_pixels)
    ctx_previous = ctx if ctx_previous is None else ctx_previous

    M_i = r_i.M
    M_j = np.minimum(r_j.M, m_cap)
    has_i = r_i.has_sample
    has_j = r_j.has_sample & (M_j > 0)

    # current sample, weighed against the previous technique
    p_i_at_xi = _target_where(ctx, r_i.sample, pixels, has_i)
    back = ctx.shift(r_i.sample, pixels, previous_pixels)
    back_ok = has_i & back.valid
    p_j_at_xi = np.where(back_ok, ctx_previous.target(back.mapped_sample, previous_pixels) * back.jacobian, 0.0)
    m_i = mis_temporal(MisContext(p_i_at_xi, p_j_at_xi, M_i, M_j, back.valid), "current")
    w_i = resampling_weight(m_i, p_i_at_xi, r_i.W)

    # previous sample, carried into the current domain
    fwd = ctx.shift(r_j.sample, previous_pixels, pixels)
    fwd_ok = has_j & fwd.valid
    jac = np.where(fwd_ok, fwd.jacobian, 1.0)
    p_i_at_xj = np.where(fwd_ok, ctx.target(fwd.mapped_sample, pixels), 0.0)
    p_j_at_xj = _target_where(ctx_previous, r_j.sample, previous_pixels, has_j)
    m_j = mis_temporal(MisContext(p_j_at_xj / jac, p_i_at_xj, M_j, M_i, fwd.valid), "previous")
    w_j = np.where(fwd_ok, resampling_weight(m_j, p_i_at_xj, r_j.W, jac), 0.0)

    s, p_selected = stream_candidates(
        [(r_i.sample, w_i, p_i_at_xi), (fwd.mapped_sample, w_j, p_i_at_xj)], rng, r_i.sample)
    s.M = M_i + M_j
    return finalize_contribution_weight(s, p_selected)


def combine_spatial(r: Reservoir, neighbors: Sequence[Reservoir], ctx: ReuseContext, rng,
                    pixels: Optional[np.ndarray] = None,
                    neighbor_pixels: Optional[np.ndarray] = None) -> Reservoir:
    """
    Merge each lane's reservoir with k neighbor reservoirs using pairwise MIS.

    Args:
        r: Canonical reservoirs
        neighbors: k reservoir batches, neighbors[j] aligned lane-by-lane with r
        ctx: Reuse context
        rng: Generator-like source, k + 1 uniforms per lane
        pixels: Canonical pixel index per lane (defaults to lane index)
        neighbor_pixels: Pixel index of each neighbor, shape (n, k)

    Returns:
        Finalized reservoirs with M = r.M + sum_j neighbors[j].M; r itself when k == 0
    """
    k = len(neighbors)
    if k == 0:
        return r
    n = len(r)
    pixels = np.arange(n) if pixels is None else np.asarray(pixels)
    if neighbor_pixels is None:
        neighbor_pixels = np.repeat(pixels[:, None], k, axis=1)
    neighbor_pixels = np.asarray(neighbor_pixels)

    has_c = r.has_sample
    p_c = _target_where(ctx, r.sample, pixels, has_c)

    # canonical sample: m_c = (1/k) sum_j (1 - b_j(x_c))
    one_minus_b = np.zeros(n)
    for j, nb in enumerate(neighbors):
        s = ctx.shift(r.sample, pixels, neighbor_pixels[:, j])
        ok = has_c & s.valid
        p_j = np.where(ok, ctx.target(s.mapped_sample, neighbor_pixels[:, j]) * s.jacobian, 0.0)
        one_minus_b += 1.0 - pairwise_neighbor_factor(p_j, p_c, nb.M, r.M, k)
    candidates = [(r.sample, resampling_weight(one_minus_b / k, p_c, r.W), p_c)]

    # neighbor samples: m_j = b_j(x'_j) / k
    for j, nb in enumerate(neighbors):
        src = neighbor_pixels[:, j]
        s = ctx.shift(nb.sample, src, pixels)
        ok = nb.has_sample & s.valid
        jac = np.where(ok, s.jacobian, 1.0)
        p_c_at = np.where(ok, ctx.target(s.mapped_sample, pixels), 0.0)
        p_j_self = _target_where(ctx, nb.sample, src, nb.has_sample) / jac
        m_j = pairwise_neighbor_factor(p_j_self, p_c_at, nb.M, r.M, k) / k
        w_j = np.where(ok, resampling_weight(m_j, p_c_at, nb.W, jac), 0.0)
        candidates.append((s.mapped_sample, w_j, p_c_at))

    out, p_selected = stream_candidates(candidates, rng, r.sample)
    out.M = r.M + np.sum([nb.M for nb in neighbors], axis=0)
    return finalize_contribution_weight(out, p_selected)
