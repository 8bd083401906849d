"""
Ray casting against spheres and parallelogram quads, vectorised over rays.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# origin offset along the surface normal, in scene units
RAY_EPSILON = 1e-5
PARALLEL_EPSILON = 1e-12


@dataclass
class Sphere:
    center: np.ndarray
    radius: float
    material: int


@dataclass
class Quad:
    """Parallelogram corner + s * edge_u + t * edge_v, s, t in [0, 1]."""
    corner: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    material: int

    @property
    def normal(self) -> np.ndarray:
        n = np.cross(self.edge_u, self.edge_v)
        return n / np.linalg.norm(n)

    @property
    def area(self) -> float:
        return float(np.linalg.norm(np.cross(self.edge_u, self.edge_v)))


@dataclass
class Hit:
    """Nearest hits of a ray batch. Fields of missed rays are zero; prim is -1."""
    hit: np.ndarray
    t: np.ndarray
    position: np.ndarray
    normal: np.ndarray
    prim: np.ndarray
    material: np.ndarray


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", a, b)


def normalize(v: np.ndarray) -> np.ndarray:
    length = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, length, out=np.zeros_like(v), where=length > 0)


def offset_origin(p: np.ndarray, n: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Push p off its surface, to the side direction points into."""
    side = np.where(dot(n, direction) >= 0, 1.0, -1.0)[..., None]
    return p + side * RAY_EPSILON * n


def intersect_sphere(origins: np.ndarray, dirs: np.ndarray, sphere: Sphere) -> np.ndarray:
    """Smallest positive t per ray, inf on a miss."""
    oc = origins - sphere.center
    b = dot(oc, dirs)
    c = dot(oc, oc) - sphere.radius ** 2
    disc = b * b - c
    ok = disc >= 0
    root = np.sqrt(np.where(ok, disc, 0.0))
    t_near = -b - root
    t_far = -b + root
    t = np.where(t_near > 0, t_near, t_far)
    return np.where(ok & (t > 0), t, np.inf)


def intersect_quad(origins: np.ndarray, dirs: np.ndarray, quad: Quad) -> np.ndarray:
    """Smallest positive t per ray, inf on a miss (rays parallel to the plane miss)."""
    w = np.cross(quad.edge_u, quad.edge_v)
    ww = float(w @ w)
    denom = dirs @ w
    parallel = np.abs(denom) < PARALLEL_EPSILON * np.sqrt(ww)
    safe = np.where(parallel, 1.0, denom)
    t = ((quad.corner - origins) @ w) / safe
    local = origins + t[:, None] * dirs - quad.corner
    alpha = np.cross(local, quad.edge_v) @ w / ww
    beta = np.cross(quad.edge_u, local) @ w / ww
    inside = (alpha >= 0) & (alpha <= 1) & (beta >= 0) & (beta <= 1)
    return np.where(~parallel & inside & (t > 0), t, np.inf)


def intersect(origins: np.ndarray, dirs: np.ndarray, spheres: Sequence[Sphere],
              quads: Sequence[Quad]) -> Hit:
    """
    Nearest positive-t hit for each ray.

    Args:
        origins: (n, 3) ray origins
        dirs: (n, 3) unit directions
        spheres: Scene spheres, primitive ids 0 .. len(spheres) - 1
        quads: Scene quads, primitive ids continue after the spheres

    Returns:
        Hit with geometric (unflipped) unit normals
    """
    origins = np.asarray(origins, dtype=float).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=float).reshape(-1, 3)
    n = origins.shape[0]
    best_t = np.full(n, np.inf)
    prim = np.full(n, -1, dtype=np.int64)
    for i, s in enumerate(spheres):
        t = intersect_sphere(origins, dirs, s)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        prim = np.where(closer, i, prim)
    for i, q in enumerate(quads):
        t = intersect_quad(origins, dirs, q)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        prim = np.where(closer, len(spheres) + i, prim)

    hit = prim >= 0
    t = np.where(hit, best_t, 0.0)
    position = origins + t[:, None] * dirs
    normal = np.zeros((n, 3))
    material = np.full(n, -1, dtype=np.int64)
    for i, s in enumerate(spheres):
        m = prim == i
        if np.any(m):
            normal[m] = (position[m] - s.center) / s.radius
            material[m] = s.material
    for i, q in enumerate(quads):
        m = prim == len(spheres) + i
        if np.any(m):
            normal[m] = q.normal
            material[m] = q.material
    position = np.where(hit[:, None], position, 0.0)
    return Hit(hit, t, position, normal, prim, material)


def occluded(p: np.ndarray, n_p: np.ndarray, q: np.ndarray, n_q: np.ndarray,
             spheres: Sequence[Sphere], quads: Sequence[Quad]) -> np.ndarray:
    """True where the segment between surface points p and q is blocked."""
    d = q - p
    origin = offset_origin(p, n_p, d)
    target = offset_origin(q, n_q, -d)
    seg = target - origin
    dist = np.linalg.norm(seg, axis=-1)
    dirs = normalize(seg)
    n = origin.shape[0]
    best = np.full(n, np.inf)
    for s in spheres:
        best = np.minimum(best, intersect_sphere(origin, dirs, s))
    for qd in quads:
        best = np.minimum(best, intersect_quad(origin, dirs, qd))
    return best < dist * (1.0 - 1e-9)
