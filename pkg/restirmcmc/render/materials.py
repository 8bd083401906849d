"""
Materials: Lambertian and normalized Phong BSDFs with exactly invertible sampling.

Directions follow the convention wo = towards the viewer, wi = towards the light, and
normals are expected to face wo (see face_forward). Sampling maps two uniforms to a
direction; invert_direction maps the direction back to the same two uniforms.
"""
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Sequence

import numpy as np

from restirmcmc.errors import SceneError
from restirmcmc.render.geometry import dot, normalize

QUARTER_PI = np.pi / 4.0


class MaterialKind(IntEnum):
    LAMBERTIAN = 0
    PHONG = 1


@dataclass
class Material:
    """A surface material; emission > 0 makes one-sided quads emitters."""
    name: str
    kind: MaterialKind = MaterialKind.LAMBERTIAN
    albedo: np.ndarray = field(default_factory=lambda: np.full(3, 0.5))
    exponent: float = 0.0
    emission: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.kind = MaterialKind(self.kind)
        self.albedo = np.asarray(self.albedo, dtype=float).reshape(3)
        self.emission = np.asarray(self.emission, dtype=float).reshape(3)
        if not np.all(np.isfinite(self.albedo)) or np.any(self.albedo < 0) or np.any(self.albedo > 1):
            raise SceneError(f"Material '{self.name}' has albedo outside [0, 1]", str(self.albedo.tolist()))
        if not np.isfinite(self.exponent) or self.exponent < 0:
            raise SceneError(f"Material '{self.name}' has a negative or non-finite exponent",
                             str(self.exponent))
        if not np.all(np.isfinite(self.emission)) or np.any(self.emission < 0):
            raise SceneError(f"Material '{self.name}' has negative or non-finite emission",
                             str(self.emission.tolist()))

    @property
    def is_emitter(self) -> bool:
        return bool(np.any(self.emission > 0))


class MaterialTable:
    """Materials stored column-wise so per-lane lookups are fancy indexing."""

    def __init__(self, materials: Sequence[Material]):
        self.materials: List[Material] = list(materials)
        self.kind = np.array([int(m.kind) for m in self.materials], dtype=np.int64)
        self.albedo = np.array([m.albedo for m in self.materials], dtype=float).reshape(-1, 3)
        self.exponent = np.array([m.exponent for m in self.materials], dtype=float)
        self.emission = np.array([m.emission for m in self.materials], dtype=float).reshape(-1, 3)

    def __len__(self) -> int:
        return len(self.materials)

    def index(self, name: str) -> int:
        for i, m in enumerate(self.materials):
            if m.name == name:
                return i
        raise SceneError(f"Unknown material '{name}'")


def face_forward(n: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Flip n to the hemisphere of w."""
    return np.where((dot(n, w) < 0)[..., None], -n, n)


def reflect(wo: np.ndarray, n: np.ndarray) -> np.ndarray:
    return 2.0 * dot(wo, n)[..., None] * n - wo


def orthonormal_basis(n: np.ndarray):
    """Tangent frame (t, b) completing unit vectors n (branch-free construction)."""
    nx, ny, nz = n[..., 0], n[..., 1], n[..., 2]
    sign = np.where(nz >= 0, 1.0, -1.0)
    a = -1.0 / (sign + nz)
    b = nx * ny * a
    t = np.stack([1.0 + sign * nx * nx * a, sign * b, -sign * nx], axis=-1)
    s = np.stack([b, sign + ny * ny * a, -ny], axis=-1)
    return t, s


def square_to_disk_concentric(u: np.ndarray) -> np.ndarray:
    """Shirley-Chiu concentric map from [0,1)^2 to the unit disk."""
    a = 2.0 * u[..., 0] - 1.0
    b = 2.0 * u[..., 1] - 1.0
    horizontal = np.abs(a) > np.abs(b)
    safe_a = np.where(a == 0, 1.0, a)
    safe_b = np.where(b == 0, 1.0, b)
    r = np.where(horizontal, a, b)
    theta = np.where(horizontal, QUARTER_PI * b / safe_a, 2 * QUARTER_PI - QUARTER_PI * a / safe_b)
    r = np.where((a == 0) & (b == 0), 0.0, r)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def disk_to_square_concentric(p: np.ndarray) -> np.ndarray:
    """Exact inverse of square_to_disk_concentric."""
    x, y = p[..., 0], p[..., 1]
    r = np.hypot(x, y)
    phi = np.arctan2(y, x)
    phi = np.where(phi < -QUARTER_PI, phi + 2 * np.pi, phi)
    region = np.select(
        [phi < QUARTER_PI, phi < 3 * QUARTER_PI, phi < 5 * QUARTER_PI],
        [0, 1, 2], default=3)
    a = np.select(
        [region == 0, region == 1, region == 2],
        [r, -(phi - 2 * QUARTER_PI) * r / QUARTER_PI, -r],
        default=-(phi - 6 * QUARTER_PI) * -r / QUARTER_PI)
    b = np.select(
        [region == 0, region == 1, region == 2],
        [phi * r / QUARTER_PI, r, (phi - np.pi) * -r / QUARTER_PI],
        default=-r)
    return np.stack([(a + 1.0) * 0.5, (b + 1.0) * 0.5], axis=-1)


def _lobe_axis(kind: np.ndarray, n: np.ndarray, wo: np.ndarray) -> np.ndarray:
    return np.where((kind == MaterialKind.PHONG)[..., None], normalize(reflect(wo, n)), n)


def sample_direction(u: np.ndarray, n: np.ndarray, wo: np.ndarray, kind: np.ndarray,
                     exponent: np.ndarray) -> np.ndarray:
    """
    Map uniforms u (n, 2) to sampled directions wi.

    Lambertian: cosine hemisphere about n via the concentric disk.
    Phong: cos(alpha) = u1^(1/(e+1)), phi = 2 pi u2 about the mirror direction.
    """
    axis = _lobe_axis(kind, n, wo)
    t, s = orthonormal_basis(axis)

    d = square_to_disk_concentric(u)
    z = np.sqrt(np.maximum(0.0, 1.0 - dot(d, d)))
    diffuse = d[..., :1] * t + d[..., 1:] * s + z[..., None] * axis

    cos_a = np.power(u[..., 0], 1.0 / (exponent + 1.0))
    sin_a = np.sqrt(np.maximum(0.0, 1.0 - cos_a * cos_a))
    phi = 2.0 * np.pi * u[..., 1]
    glossy = ((sin_a * np.cos(phi))[..., None] * t + (sin_a * np.sin(phi))[..., None] * s
              + cos_a[..., None] * axis)

    return np.where((kind == MaterialKind.PHONG)[..., None], glossy, diffuse)


def invert_direction(wi: np.ndarray, n: np.ndarray, wo: np.ndarray, kind: np.ndarray,
                     exponent: np.ndarray) -> np.ndarray:
    """Uniforms that sample_direction maps to wi (wi inside the lobe's support)."""
    axis = _lobe_axis(kind, n, wo)
    t, s = orthonormal_basis(axis)
    x, y, z = dot(wi, t), dot(wi, s), dot(wi, axis)

    u_diffuse = disk_to_square_concentric(np.stack([x, y], axis=-1))

    cos_a = np.clip(z, 0.0, 1.0)
    phi = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    u_glossy = np.stack([np.power(cos_a, exponent + 1.0), phi / (2.0 * np.pi)], axis=-1)

    u = np.where((kind == MaterialKind.PHONG)[..., None], u_glossy, u_diffuse)
    return np.where(u >= 1.0, 0.0, np.clip(u, 0.0, None))


def direction_pdf(n: np.ndarray, wo: np.ndarray, wi: np.ndarray, kind: np.ndarray,
                  exponent: np.ndarray) -> np.ndarray:
    """Solid-angle density of sample_direction at wi."""
    cos_n = dot(wi, n)
    diffuse = np.maximum(cos_n, 0.0) / np.pi
    cos_a = np.maximum(dot(wi, normalize(reflect(wo, n))), 0.0)
    glossy = (exponent + 1.0) / (2.0 * np.pi) * np.power(cos_a, exponent)
    return np.where(kind == MaterialKind.PHONG, glossy, diffuse)


def bsdf_eval(n: np.ndarray, wo: np.ndarray, wi: np.ndarray, kind: np.ndarray,
              albedo: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    """RGB BSDF value; zero unless wo and wi both lie above the surface."""
    above = (dot(wi, n) > 0) & (dot(wo, n) > 0)
    cos_a = np.maximum(dot(wi, normalize(reflect(wo, n))), 0.0)
    lobe = np.where(kind == MaterialKind.PHONG,
                    (exponent + 2.0) / (2.0 * np.pi) * np.power(cos_a, exponent),
                    1.0 / np.pi)
    return albedo * np.where(above, lobe, 0.0)[..., None]
