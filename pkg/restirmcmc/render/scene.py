"""
Scene description: spheres, quads, materials, emitters and a pinhole camera.

Scenes are plain dictionaries (the JSON schema in docs/scene_schema.md); the builtin
scenes below are written in the same schema and go through the same loader.
"""
import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from restirmcmc.errors import ErrorHandler, MissingSceneError, SceneError
from restirmcmc.render.geometry import Hit, Quad, Sphere, intersect, normalize, occluded
from restirmcmc.render.materials import Material, MaterialKind, MaterialTable

logger = logging.getLogger(__name__)

SCENE_KEYS = {"name", "camera", "materials", "spheres", "quads"}


@dataclass
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    fov: float = 55.0

    def primary_rays(self, width: int, height: int) -> Tuple[np.ndarray, np.ndarray]:
        """Rays through pixel centers, row-major from the top-left pixel."""
        forward = normalize(self.look_at - self.position)
        right = normalize(np.cross(forward, self.up))
        up = np.cross(right, forward)
        half = np.tan(np.radians(self.fov) / 2.0)
        xs = (2.0 * (np.arange(width) + 0.5) / width - 1.0) * half * width / height
        ys = (1.0 - 2.0 * (np.arange(height) + 0.5) / height) * half
        gx, gy = np.meshgrid(xs, ys)
        dirs = forward + gx.reshape(-1, 1) * right + gy.reshape(-1, 1) * up
        origins = np.broadcast_to(self.position, dirs.shape).copy()
        return origins, normalize(dirs)


@dataclass
class LightSample:
    """Points on emitters with one-sided normals and radiance."""
    position: np.ndarray
    normal: np.ndarray
    radiance: np.ndarray
    pdf_area: np.ndarray


class Scene:
    """Geometry, materials and emitter tables for one scene."""

    def __init__(self, name: str, camera: Camera, materials: MaterialTable,
                 spheres: List[Sphere], quads: List[Quad]):
        self.name = name
        self.camera = camera
        self.materials = materials
        self.spheres = spheres
        self.quads = quads
        self._validate()
        self._build_emitters()
        logger.debug("scene %s: %d spheres, %d quads, %d emitters", name, len(spheres),
                     len(quads), len(self.emitter_quads))

    def _validate(self):
        for s in self.spheres:
            if not np.all(np.isfinite(s.center)) or not np.isfinite(s.radius) or s.radius <= 0:
                raise SceneError(f"Scene '{self.name}' has an invalid sphere", str(s))
            if self.materials.materials[s.material].is_emitter:
                raise SceneError(f"Scene '{self.name}': only quads may emit light")
        for q in self.quads:
            if not all(np.all(np.isfinite(v)) for v in (q.corner, q.edge_u, q.edge_v)):
                raise SceneError(f"Scene '{self.name}' has non-finite quad geometry", str(q))
            if q.area <= 0:
                raise SceneError(f"Scene '{self.name}' has a degenerate quad", str(q))
        if not any(self.materials.materials[q.material].is_emitter for q in self.quads):
            raise SceneError(f"Scene '{self.name}' has no emitter")

    def _build_emitters(self):
        self.emitter_quads = [q for q in self.quads if self.materials.materials[q.material].is_emitter]
        self.emitter_corner = np.array([q.corner for q in self.emitter_quads])
        self.emitter_u = np.array([q.edge_u for q in self.emitter_quads])
        self.emitter_v = np.array([q.edge_v for q in self.emitter_quads])
        self.emitter_normal = np.array([q.normal for q in self.emitter_quads])
        self.emitter_radiance = np.array([self.materials.emission[q.material] for q in self.emitter_quads])
        areas = np.array([q.area for q in self.emitter_quads])
        self.light_area = float(areas.sum())
        self.emitter_cdf = np.cumsum(areas) / self.light_area

    @property
    def diameter(self) -> float:
        """Diagonal of the bounding box of all geometry."""
        pts = [s.center + d * s.radius for s in self.spheres for d in (-1.0, 1.0)]
        for q in self.quads:
            pts += [q.corner, q.corner + q.edge_u, q.corner + q.edge_v, q.corner + q.edge_u + q.edge_v]
        pts = np.array(pts)
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> Hit:
        return intersect(origins, dirs, self.spheres, self.quads)

    def occluded(self, p, n_p, q, n_q) -> np.ndarray:
        return occluded(p, n_p, q, n_q, self.spheres, self.quads)

    def sample_light(self, u: np.ndarray) -> LightSample:
        """
        Area-uniform points over all emitters from three uniforms per lane.

        The first uniform picks an emitter with probability proportional to its area,
        the other two place the point on it; the density is 1 / total emitter area.
        """
        idx = np.minimum(np.searchsorted(self.emitter_cdf, u[:, 0], side="right"),
                         len(self.emitter_quads) - 1)
        pos = (self.emitter_corner[idx] + u[:, 1:2] * self.emitter_u[idx]
               + u[:, 2:3] * self.emitter_v[idx])
        n = u.shape[0]
        return LightSample(pos, self.emitter_normal[idx], self.emitter_radiance[idx],
                           np.full(n, 1.0 / self.light_area))

    def emitted(self, hit: Hit, towards: np.ndarray) -> np.ndarray:
        """Radiance leaving the hit points towards `towards` (unit vectors)."""
        out = np.zeros((hit.hit.shape[0], 3))
        m = hit.hit
        if np.any(m):
            front = np.einsum("ij,ij->i", hit.normal[m], towards[m]) > 0
            out[m] = self.materials.emission[hit.material[m]] * front[:, None]
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> "Scene":
        """Build a scene from the documented JSON schema."""
        unknown = set(data) - SCENE_KEYS
        if unknown:
            raise SceneError(f"Unknown scene keys: {', '.join(sorted(unknown))}")
        try:
            materials = MaterialTable([
                Material(
                    name=m["name"],
                    kind=MaterialKind[m.get("type", "lambertian").upper()],
                    albedo=m.get("albedo", [0.5, 0.5, 0.5]),
                    exponent=float(m.get("exponent", 0.0)),
                    emission=m.get("emission", [0.0, 0.0, 0.0]),
                )
                for m in data["materials"]
            ])
            spheres = [Sphere(np.asarray(s["center"], dtype=float), float(s["radius"]),
                              materials.index(s["material"])) for s in data.get("spheres", [])]
            quads = [Quad(np.asarray(q["corner"], dtype=float), np.asarray(q["edge_u"], dtype=float),
                          np.asarray(q["edge_v"], dtype=float), materials.index(q["material"]))
                     for q in data.get("quads", [])]
            cam = data["camera"]
            camera = Camera(np.asarray(cam["position"], dtype=float),
                            np.asarray(cam["look_at"], dtype=float),
                            np.asarray(cam.get("up", [0.0, 1.0, 0.0]), dtype=float),
                            float(cam.get("fov", 55.0)))
        except KeyError as e:
            raise SceneError(f"Scene is missing required field {e}")
        except (TypeError, ValueError) as e:
            raise SceneError("Scene contains a malformed value", str(e))
        return cls(data.get("name", "scene"), camera, materials, spheres, quads)

    @classmethod
    def load(cls, path: str) -> "Scene":
        """Load a scene from a JSON file."""
        p = Path(path)
        if not p.exists():
            raise MissingSceneError(str(path))
        text = ErrorHandler.handle_file_operation(lambda: p.read_text(encoding="utf-8"), str(path))
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise SceneError(f"Scene file is not valid JSON: {path}", str(e))
        return cls.from_dict(data)


def _box(floor_material: str = "white") -> List[Dict]:
    return [
        {"corner": [-1, 0, -1], "edge_u": [0, 0, 2], "edge_v": [2, 0, 0], "material": floor_material},
        {"corner": [-1, 2, -1], "edge_u": [2, 0, 0], "edge_v": [0, 0, 2], "material": "white"},
        {"corner": [-1, 0, -1], "edge_u": [2, 0, 0], "edge_v": [0, 2, 0], "material": "white"},
        {"corner": [-1, 0, 1], "edge_u": [0, 2, 0], "edge_v": [2, 0, 0], "material": "white"},
        {"corner": [-1, 0, -1], "edge_u": [0, 2, 0], "edge_v": [0, 0, 2], "material": "red"},
        {"corner": [1, 0, -1], "edge_u": [0, 0, 2], "edge_v": [0, 2, 0], "material": "green"},
    ]


_BOX_MATERIALS = [
    {"name": "white", "type": "lambertian", "albedo": [0.7, 0.7, 0.7]},
    {"name": "red", "type": "lambertian", "albedo": [0.63, 0.07, 0.06]},
    {"name": "green", "type": "lambertian", "albedo": [0.12, 0.45, 0.1]},
    {"name": "glossy", "type": "phong", "albedo": [0.8, 0.8, 0.8], "exponent": 40.0},
]

_BOX_CAMERA = {"position": [0.0, 1.0, 0.95], "look_at": [0.0, 0.9, -1.0], "up": [0, 1, 0], "fov": 60.0}

_BOX_SPHERES = [
    {"center": [-0.45, 0.35, -0.4], "radius": 0.35, "material": "white"},
    {"center": [0.45, 0.45, -0.1], "radius": 0.45, "material": "glossy"},
]

BUILTIN_SCENES: Dict[str, Dict] = {
    "glossy_box": {
        "name": "glossy_box",
        "camera": _BOX_CAMERA,
        "materials": _BOX_MATERIALS + [{"name": "light", "emission": [12.0, 12.0, 12.0], "albedo": [0, 0, 0]}],
        "spheres": _BOX_SPHERES,
        "quads": _box() + [
            # faces down, just below the ceiling
            {"corner": [-0.3, 1.98, -0.3], "edge_u": [0.6, 0, 0], "edge_v": [0, 0, 0.6], "material": "light"},
        ],
    },
    "narrow_slot": {
        "name": "narrow_slot",
        "camera": _BOX_CAMERA,
        "materials": _BOX_MATERIALS + [{"name": "light", "emission": [90.0, 90.0, 90.0], "albedo": [0, 0, 0]}],
        "spheres": _BOX_SPHERES,
        "quads": _box() + [
            {"corner": [-0.6, 1.98, -0.02], "edge_u": [1.2, 0, 0], "edge_v": [0, 0, 0.04], "material": "light"},
        ],
    },
    # floor, back wall and a small emitter close to the floor; used by chain tests
    "low_light_slice": {
        "name": "low_light_slice",
        "camera": {"position": [0.0, 1.0, 3.0], "look_at": [0.0, 0.5, 0.0], "fov": 50.0},
        "materials": [
            {"name": "white", "type": "lambertian", "albedo": [0.7, 0.7, 0.7]},
            {"name": "light", "emission": [5.0, 5.0, 5.0], "albedo": [0, 0, 0]},
        ],
        "quads": [
            {"corner": [-1, 0, -1], "edge_u": [0, 0, 2], "edge_v": [2, 0, 0], "material": "white"},
            {"corner": [-1, 0, -1], "edge_u": [2, 0, 0], "edge_v": [0, 2, 0], "material": "white"},
            {"corner": [0.4, 0.15, 0.1], "edge_u": [0.2, 0, 0], "edge_v": [0, 0, 0.2], "material": "light"},
        ],
    },
    # glossy floor under a large emitter; used by direction-mutation chain tests
    "glossy_floor": {
        "name": "glossy_floor",
        "camera": {"position": [0.0, 1.0, 3.0], "look_at": [0.0, 0.5, 0.0], "fov": 50.0},
        "materials": [
            {"name": "glossy", "type": "phong", "albedo": [0.8, 0.8, 0.8], "exponent": 8.0},
            {"name": "light", "emission": [4.0, 4.0, 4.0], "albedo": [0, 0, 0]},
        ],
        "quads": [
            {"corner": [-2, 0, -2], "edge_u": [0, 0, 4], "edge_v": [4, 0, 0], "material": "glossy"},
            {"corner": [-0.8, 1.0, -0.8], "edge_u": [1.6, 0, 0], "edge_v": [0, 0, 1.6], "material": "light"},
        ],
    },
}


def builtin_scene(name: str) -> Scene:
    """Construct one of the builtin scenes by name."""
    ErrorHandler.validate_choice("render.scene", name, BUILTIN_SCENES)
    return Scene.from_dict(copy.deepcopy(BUILTIN_SCENES[name]))


def resolve_scene(name_or_path: str) -> Scene:
    """Builtin scene name, or path to a JSON scene file."""
    if name_or_path in BUILTIN_SCENES:
        return builtin_scene(name_or_path)
    return Scene.load(name_or_path)
