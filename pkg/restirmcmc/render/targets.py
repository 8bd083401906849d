"""
Per-pixel shading state, light/path samples, integrands and target functions.

Two sample domains are supported:

* direct lighting: a point on an emitter, in area measure; target p_hat = luminance of
  L_e * rho * |cos| * G * V at the pixel's primary hit.
* one-bounce paths: a bounce direction at the primary hit (solid angle) times a point on
  an emitter (area). The sample stores the reconnection vertex reached by the bounce and
  the light point, so shifting to another pixel keeps both vertices and only changes the
  bounce direction.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

import numpy as np

from restirmcmc.core.reservoir import take_samples
from restirmcmc.core.shift import ShiftMode, ShiftResult, shift_map
from restirmcmc.render.geometry import Hit, dot, normalize
from restirmcmc.render.image_io import luminance
from restirmcmc.render.materials import MaterialKind, bsdf_eval, face_forward
from restirmcmc.render.scene import Scene

GRAZING_COSINE = 1e-3
CONNECT_DISTANCE_FRACTION = 0.01
DEFAULT_EXPONENT_CAP = 100.0


class RenderMode(str, Enum):
    DI = "di"
    PATH = "path"


@dataclass
class ShadingBatch:
    """
    Primary-hit state of a set of pixels.

    normal faces the viewer; valid is false where the camera ray escaped.
    emitted is the radiance the primary hit sends back to the camera.
    """
    valid: np.ndarray
    position: np.ndarray
    normal: np.ndarray
    wo: np.ndarray
    kind: np.ndarray
    albedo: np.ndarray
    exponent: np.ndarray
    emitted: np.ndarray

    def take(self, pixels: np.ndarray) -> "ShadingBatch":
        return take_samples(self, np.asarray(pixels))

    def __len__(self) -> int:
        return int(self.valid.shape[0])


@dataclass
class LightPathSample:
    """
    Batch of samples.

    light_* is the emitter point. rc_* is the reconnection vertex (path mode only,
    None otherwise); rc_material is -1 where the bounce escaped. u holds the five
    uniforms that generated a path at its origin pixel. ids identify samples for the
    duplicate metrics and travel with the sample through resampling.
    """
    light_pos: np.ndarray
    light_normal: np.ndarray
    light_radiance: np.ndarray
    ids: np.ndarray
    rc_pos: Optional[np.ndarray] = None
    rc_normal: Optional[np.ndarray] = None
    rc_material: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None


def shading_from_hits(scene: Scene, hit: Hit, ray_dirs: np.ndarray) -> ShadingBatch:
    """Build shading state from primary hits of rays with directions ray_dirs."""
    wo = -ray_dirs
    mat = np.where(hit.hit, hit.material, 0)
    table = scene.materials
    return ShadingBatch(
        valid=hit.hit.copy(),
        position=hit.position,
        normal=face_forward(hit.normal, wo),
        wo=wo,
        kind=np.where(hit.hit, table.kind[mat], MaterialKind.LAMBERTIAN),
        albedo=np.where(hit.hit[:, None], table.albedo[mat], 0.0),
        exponent=np.where(hit.hit, table.exponent[mat], 0.0),
        emitted=scene.emitted(hit, wo),
    )


def primary_shading(scene: Scene, width: int, height: int) -> ShadingBatch:
    """Shading state of every pixel for the scene's fixed camera."""
    origins, dirs = scene.camera.primary_rays(width, height)
    return shading_from_hits(scene, scene.intersect(origins, dirs), dirs)


def _visible(scene: Scene, mask: np.ndarray, p, n_p, q, n_q) -> np.ndarray:
    vis = np.zeros(mask.shape[0], dtype=bool)
    if np.any(mask):
        vis[mask] = ~scene.occluded(p[mask], n_p[mask], q[mask], n_q[mask])
    return vis


def integrand_di(scene: Scene, sh: ShadingBatch, samples: LightPathSample) -> np.ndarray:
    """RGB integrand L_e * rho * cos1 * cos3 / d^2 * V in area measure at the light point."""
    d = samples.light_pos - sh.position
    dist2 = dot(d, d)
    wi = normalize(d)
    cos1 = dot(sh.normal, wi)
    cos3 = -dot(samples.light_normal, wi)
    rho = bsdf_eval(sh.normal, sh.wo, wi, sh.kind, sh.albedo, sh.exponent)
    geom = np.where((cos1 > 0) & (cos3 > 0) & (dist2 > 0),
                    np.maximum(cos1, 0) * np.maximum(cos3, 0) / np.where(dist2 > 0, dist2, 1.0), 0.0)
    f = samples.light_radiance * rho * geom[:, None]
    live = sh.valid & (luminance(f) > 0)
    vis = _visible(scene, live, sh.position, sh.normal, samples.light_pos, samples.light_normal)
    return f * vis[:, None]


def target_function_di(scene: Scene, sh: ShadingBatch, samples: LightPathSample) -> np.ndarray:
    return luminance(integrand_di(scene, sh, samples))


def reconnection_material(scene: Scene, samples: LightPathSample):
    """Kind, albedo and exponent of each sample's reconnection vertex (zeros where escaped)."""
    has = samples.rc_material >= 0
    mat = np.where(has, samples.rc_material, 0)
    table = scene.materials
    return (has, np.where(has, table.kind[mat], 0),
            np.where(has[:, None], table.albedo[mat], 0.0),
            np.where(has, table.exponent[mat], 0.0))


def integrand_path(scene: Scene, sh: ShadingBatch, samples: LightPathSample) -> np.ndarray:
    """
    RGB integrand of a one-bounce path, in solid angle at the primary hit times area on
    the emitter: L_e * rho2 * cos2 * cos3 / d23^2 * V23 * rho1 * cos1 * V12.
    """
    has, kind2, albedo2, exp2 = reconnection_material(scene, samples)
    w12 = normalize(samples.rc_pos - sh.position)
    rho1 = bsdf_eval(sh.normal, sh.wo, w12, sh.kind, sh.albedo, sh.exponent)
    cos1 = np.maximum(dot(sh.normal, w12), 0.0)

    wo2 = -w12
    n2 = face_forward(samples.rc_normal, wo2)
    d23 = samples.light_pos - samples.rc_pos
    dist2 = dot(d23, d23)
    w23 = normalize(d23)
    rho2 = bsdf_eval(n2, wo2, w23, kind2, albedo2, exp2)
    cos2 = np.maximum(dot(n2, w23), 0.0)
    cos3 = np.maximum(-dot(samples.light_normal, w23), 0.0)
    g23 = cos2 * cos3 / np.where(dist2 > 0, dist2, np.inf)

    f = samples.light_radiance * rho2 * rho1 * (g23 * cos1)[:, None]
    live = sh.valid & has & (luminance(f) > 0)
    vis12 = _visible(scene, live, sh.position, sh.normal, samples.rc_pos, n2)
    live &= vis12
    vis23 = _visible(scene, live, samples.rc_pos, n2, samples.light_pos, samples.light_normal)
    return f * vis23[:, None]


def target_function_path(scene: Scene, sh: ShadingBatch, samples: LightPathSample) -> np.ndarray:
    return luminance(integrand_path(scene, sh, samples))


def connectable(scene_diameter: float, exponent_cap: float, y1: np.ndarray, samples: LightPathSample,
                rc_exponent: np.ndarray) -> np.ndarray:
    """Distance and lobe conditions a reconnection vertex must meet to be reused or moved."""
    d_min = CONNECT_DISTANCE_FRACTION * scene_diameter
    d12 = np.linalg.norm(samples.rc_pos - y1, axis=-1)
    d23 = np.linalg.norm(samples.light_pos - samples.rc_pos, axis=-1)
    return (samples.rc_material >= 0) & (d12 >= d_min) & (d23 >= d_min) & (rc_exponent <= exponent_cap)


def reconnection_jacobian(rc_pos: np.ndarray, rc_normal: np.ndarray, y1_from: np.ndarray,
                          y1_to: np.ndarray) -> np.ndarray:
    """
    |d omega_to / d omega_from| for directions from y1_from and y1_to that meet at the
    same reconnection vertex: |cos_to| d_from^2 / (|cos_from| d_to^2).
    """
    v_from = y1_from - rc_pos
    v_to = y1_to - rc_pos
    d2_from = dot(v_from, v_from)
    d2_to = dot(v_to, v_to)
    cos_from = np.abs(dot(rc_normal, normalize(v_from)))
    cos_to = np.abs(dot(rc_normal, normalize(v_to)))
    den = cos_from * d2_to
    return np.divide(cos_to * d2_from, den, out=np.zeros_like(den), where=den > 0)


class SceneReuseContext:
    """
    Target functions and shift map over the pixels of one frame.

    Implements the reuse-context protocol consumed by combine_temporal / combine_spatial,
    and exposes integrands for shading.
    """

    def __init__(self, scene: Scene, shading: ShadingBatch, mode: RenderMode = RenderMode.DI,
                 exponent_cap: float = DEFAULT_EXPONENT_CAP):
        self.scene = scene
        self.shading = shading
        self.mode = RenderMode(mode)
        self.exponent_cap = exponent_cap
        self.diameter = scene.diameter
        self.shift_mode = ShiftMode.IDENTITY if self.mode is RenderMode.DI else ShiftMode.RECONNECTION

    def integrand(self, samples: LightPathSample, pixels: np.ndarray) -> np.ndarray:
        sh = self.shading.take(pixels)
        if self.mode is RenderMode.DI:
            return integrand_di(self.scene, sh, samples)
        return integrand_path(self.scene, sh, samples)

    def target(self, samples: LightPathSample, pixels: np.ndarray) -> np.ndarray:
        return luminance(self.integrand(samples, pixels))

    def shift(self, samples: Any, from_pixels: np.ndarray, to_pixels: np.ndarray) -> ShiftResult:
        return shift_map(samples, from_pixels, to_pixels, self.shift_mode, self)

    def is_connectable(self, samples: LightPathSample, pixels: np.ndarray) -> np.ndarray:
        _, _, _, exp2 = reconnection_material(self.scene, samples)
        return connectable(self.diameter, self.exponent_cap, self.shading.position[pixels], samples, exp2)

    def reconnect(self, samples: LightPathSample, from_pixels: np.ndarray, to_pixels: np.ndarray) -> ShiftResult:
        """Reconnection shift: keep both vertices, re-anchor the bounce at the new pixel."""
        from_pixels = np.asarray(from_pixels)
        to_pixels = np.asarray(to_pixels)
        y_from = self.shading.position[from_pixels]
        y_to = self.shading.position[to_pixels]
        n2 = samples.rc_normal
        cos_from = dot(n2, normalize(y_from - samples.rc_pos))
        cos_to = dot(n2, normalize(y_to - samples.rc_pos))

        valid = (self.shading.valid[from_pixels] & self.shading.valid[to_pixels]
                 & (np.abs(cos_from) > GRAZING_COSINE) & (np.abs(cos_to) > GRAZING_COSINE)
                 & (np.sign(cos_from) == np.sign(cos_to))
                 & self.is_connectable(samples, from_pixels) & self.is_connectable(samples, to_pixels))
        if np.any(valid):
            shading_to = self.shading.take(to_pixels[valid])
            valid[valid] = ~self.scene.occluded(shading_to.position, shading_to.normal,
                                                samples.rc_pos[valid], n2[valid])
        jac = np.where(valid, reconnection_jacobian(samples.rc_pos, n2, y_from, y_to), 1.0)
        return ShiftResult(samples, jac, valid)
