"""Analytic scenes, materials, target functions and image files."""
from .image_io import luminance, read_pfm, write_ids, write_pfm, write_ppm
from .scene import BUILTIN_SCENES, Camera, Scene, builtin_scene, resolve_scene
from .targets import LightPathSample, RenderMode, SceneReuseContext, primary_shading

__all__ = [
    "luminance", "read_pfm", "write_ids", "write_pfm", "write_ppm",
    "BUILTIN_SCENES", "Camera", "Scene", "builtin_scene", "resolve_scene",
    "LightPathSample", "RenderMode", "SceneReuseContext", "primary_shading",
]
