"""
Scene mutation strategies.

Both strategies recover the primary-sample-space coordinates of a sample's bounce
direction by inverting BSDF sampling at the pixel's primary hit, perturb them, and trace
the perturbed direction. The contribution C(u) is the target divided by the density with
which u generates the sample:

* direction mutation (direct lighting): C = p_hat / (p_rho(w) |cos3| / d^2). The move is
  symmetric in u, so the kernel ratio is 1.
* reconnection mutation (paths): only the reconnection vertex moves, the light point stays.
  C uses the full path density, which includes the probability of the fixed light point
  given the moved vertex; the kernel ratio compensates for that term exactly.
"""
from dataclasses import replace
from typing import Optional, Tuple

import numpy as np

from restirmcmc.mcmc.kernels import MutationProposal
from restirmcmc.mcmc.pss import MutationConfig, pss_perturb
from restirmcmc.render.geometry import dot, normalize, offset_origin
from restirmcmc.render.image_io import luminance
from restirmcmc.render.materials import direction_pdf, face_forward, invert_direction, sample_direction
from restirmcmc.render.targets import (
    LightPathSample, SceneReuseContext, integrand_di, integrand_path, reconnection_material,
)

DIRECTION_NUMBERS = 4


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.zeros(np.broadcast(num, den).shape), where=den > 0)


def transition_kernel_ratio(cos_light: np.ndarray, cos_light_new: np.ndarray,
                            dist2: np.ndarray, dist2_new: np.ndarray,
                            pdf_vertex: np.ndarray, pdf_vertex_new: np.ndarray,
                            pdf_next: Optional[np.ndarray] = None,
                            pdf_next_new: Optional[np.ndarray] = None) -> np.ndarray:
    """
    T(u'->u) / T(u->u') for a move of the reconnection vertex y_i to y_i'.

    (|cos'| / |cos|) * (|y_{i+1} - y_i|^2 / |y_{i+1} - y_i'|^2)
        * (p(w'_{i-1}, w'_i) / p(w_{i-1}, w_i)) * (p(w'_i, w_{i+1}) / p(w_i, w_{i+1}))

    cos is taken at y_{i+1} and p(., .) are the BSDF sampling densities at y_i (and y_{i+1}
    for the last factor, which is omitted when y_{i+1} ends the path). Returns 0 where the
    current state has a vanishing factor.
    """
    ratio = _ratio(np.abs(cos_light_new), np.abs(cos_light)) * _ratio(dist2, dist2_new) \
        * _ratio(pdf_vertex_new, pdf_vertex)
    if pdf_next is not None and pdf_next_new is not None:
        ratio = ratio * _ratio(pdf_next_new, pdf_next)
    return ratio


def trace_to_light(ctx: SceneReuseContext, sh, wi: np.ndarray,
                   current: LightPathSample) -> Tuple[LightPathSample, np.ndarray]:
    """Follow wi from the primary hit; returns the candidate and a mask of emitter hits."""
    hit = ctx.scene.intersect(offset_origin(sh.position, sh.normal, wi), wi)
    mat = np.where(hit.hit, hit.material, 0)
    radiance = ctx.scene.materials.emission[mat]
    on_light = hit.hit & (luminance(radiance) > 0) & (dot(hit.normal, -wi) > 0)
    m = on_light[:, None]
    candidate = replace(
        current,
        light_pos=np.where(m, hit.position, current.light_pos),
        light_normal=np.where(m, hit.normal, current.light_normal),
        light_radiance=np.where(m, radiance, current.light_radiance),
    )
    return candidate, on_light


def di_contribution(ctx: SceneReuseContext, samples: LightPathSample,
                    pixels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(C, p_hat) of direct-lighting samples, C = p_hat / q with q the light point's density in u."""
    sh = ctx.shading.take(pixels)
    p_hat = luminance(integrand_di(ctx.scene, sh, samples))
    d = samples.light_pos - sh.position
    dist2 = dot(d, d)
    wi = normalize(d)
    cos3 = np.abs(dot(samples.light_normal, wi))
    q = direction_pdf(sh.normal, sh.wo, wi, sh.kind, sh.exponent) * _ratio(cos3, dist2)
    return np.where(p_hat > 0, _ratio(p_hat, q), 0.0), p_hat


def di_direction_mutation(samples: LightPathSample, pixels: np.ndarray, ctx: SceneReuseContext,
                          cfg: MutationConfig, rng, contribution: Optional[np.ndarray] = None) -> MutationProposal:
    """
    Perturb the direction towards the light point in primary sample space and re-trace.

    Rays that do not land on the front of an emitter give contribution_ratio 0.
    """
    if contribution is None:
        contribution, _ = di_contribution(ctx, samples, pixels)
    sh = ctx.shading.take(pixels)
    wi = normalize(samples.light_pos - sh.position)
    u = invert_direction(wi, sh.normal, sh.wo, sh.kind, sh.exponent)
    u_new = pss_perturb(u, cfg.s1, cfg.s2, rng)
    wi_new = sample_direction(u_new, sh.normal, sh.wo, sh.kind, sh.exponent)

    candidate, on_light = trace_to_light(ctx, sh, wi_new, samples)
    C_new, p_new = di_contribution(ctx, candidate, pixels)
    C_new = np.where(on_light & sh.valid, C_new, 0.0)
    n = len(pixels)
    return MutationProposal(candidate, np.ones(n), _ratio(C_new, contribution),
                            np.where(C_new > 0, p_new, 0.0), C_new)


def _path_terms(ctx: SceneReuseContext, samples: LightPathSample, pixels: np.ndarray):
    """Per-path quantities shared by the contribution and the kernel ratio."""
    sh = ctx.shading.take(pixels)
    has, kind2, _, exp2 = reconnection_material(ctx.scene, samples)
    w12 = normalize(samples.rc_pos - sh.position)
    pdf1 = direction_pdf(sh.normal, sh.wo, w12, sh.kind, sh.exponent)
    wo2 = -w12
    n2 = face_forward(samples.rc_normal, wo2)
    d23 = samples.light_pos - samples.rc_pos
    dist2 = dot(d23, d23)
    w23 = normalize(d23)
    pdf2 = np.where(has, direction_pdf(n2, wo2, w23, kind2, exp2), 0.0)
    cos3 = np.abs(dot(samples.light_normal, w23))
    return sh, pdf1, pdf2, cos3, dist2


def path_contribution(ctx: SceneReuseContext, samples: LightPathSample,
                      pixels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(C, p_hat) of path samples; C = 0 where the reconnection vertex is not connectable."""
    sh, pdf1, pdf2, cos3, dist2 = _path_terms(ctx, samples, pixels)
    p_hat = luminance(integrand_path(ctx.scene, sh, samples))
    q_full = pdf1 * pdf2 * _ratio(cos3, dist2)
    ok = (p_hat > 0) & ctx.is_connectable(samples, pixels)
    return np.where(ok, _ratio(p_hat, q_full), 0.0), p_hat


def reconnection_mutation(samples: LightPathSample, pixels: np.ndarray, ctx: SceneReuseContext,
                          cfg: MutationConfig, rng, contribution: Optional[np.ndarray] = None,
                          use_kernel_ratio: bool = True) -> MutationProposal:
    """
    Move only the reconnection vertex: perturb the bounce direction's coordinates, trace
    to a new vertex and reconnect to the unchanged light point.

    Args:
        use_kernel_ratio: False forces the kernel ratio to 1 (biased; negative control)
    """
    if contribution is None:
        contribution, _ = path_contribution(ctx, samples, pixels)
    sh, _, pdf2, cos3, dist2 = _path_terms(ctx, samples, pixels)
    w12 = normalize(samples.rc_pos - sh.position)
    u = invert_direction(w12, sh.normal, sh.wo, sh.kind, sh.exponent)
    u_new = pss_perturb(u, cfg.s1, cfg.s2, rng)
    w12_new = sample_direction(u_new, sh.normal, sh.wo, sh.kind, sh.exponent)

    hit = ctx.scene.intersect(offset_origin(sh.position, sh.normal, w12_new), w12_new)
    m = hit.hit[:, None]
    candidate = replace(
        samples,
        rc_pos=np.where(m, hit.position, samples.rc_pos),
        rc_normal=np.where(m, hit.normal, samples.rc_normal),
        rc_material=np.where(hit.hit, hit.material, -1),
        u=None if samples.u is None else np.concatenate([u_new, samples.u[:, 2:]], axis=1),
    )
    C_new, p_new = path_contribution(ctx, candidate, pixels)
    C_new = np.where(hit.hit & sh.valid, C_new, 0.0)

    n = len(pixels)
    if use_kernel_ratio:
        _, _, pdf2_new, cos3_new, dist2_new = _path_terms(ctx, candidate, pixels)
        kernel = transition_kernel_ratio(cos3, cos3_new, dist2, dist2_new, pdf2, pdf2_new)
    else:
        kernel = np.ones(n)
    return MutationProposal(candidate, kernel, _ratio(C_new, contribution),
                            np.where(C_new > 0, p_new, 0.0), C_new)


class DirectionMutation:
    """Chain strategy wrapping di_direction_mutation."""
    numbers_per_step = DIRECTION_NUMBERS

    def __init__(self, ctx: SceneReuseContext, cfg: MutationConfig):
        self.ctx = ctx
        self.cfg = cfg

    def contribution(self, samples, pixels):
        return di_contribution(self.ctx, samples, pixels)

    def propose(self, samples, pixels, contribution, rng) -> MutationProposal:
        return di_direction_mutation(samples, pixels, self.ctx, self.cfg, rng, contribution)


class ReconnectionMutation:
    """Chain strategy wrapping reconnection_mutation."""
    numbers_per_step = DIRECTION_NUMBERS

    def __init__(self, ctx: SceneReuseContext, cfg: MutationConfig, use_kernel_ratio: bool = True):
        self.ctx = ctx
        self.cfg = cfg
        self.use_kernel_ratio = use_kernel_ratio

    def contribution(self, samples, pixels):
        return path_contribution(self.ctx, samples, pixels)

    def propose(self, samples, pixels, contribution, rng) -> MutationProposal:
        return reconnection_mutation(samples, pixels, self.ctx, self.cfg, rng, contribution,
                                     self.use_kernel_ratio)
