"""
Pytest configuration and fixtures for restirmcmc tests.

Provides small scenes, reuse contexts and random sources shared across test modules.
"""
import copy
import json

import numpy as np
import pytest

from restirmcmc.config import OUTPUT_ROOT_ENV
from restirmcmc.render.scene import BUILTIN_SCENES, Scene, builtin_scene
from restirmcmc.render.targets import RenderMode, SceneReuseContext, primary_shading
from restirmcmc.streams import LaneSource, RandomStreams


# floor at y = 0, a downward-facing 1x1 emitter at y = 1, camera looking straight down
# at the floor's centre from between the two
TINY_SCENE = {
    "name": "tiny",
    "camera": {"position": [0.0, 0.5, 0.0], "look_at": [0.0, 0.0, 0.0], "up": [0.0, 0.0, -1.0], "fov": 10.0},
    "materials": [
        {"name": "grey", "type": "lambertian", "albedo": [0.5, 0.5, 0.5]},
        {"name": "light", "emission": [2.0, 2.0, 2.0], "albedo": [0, 0, 0]},
    ],
    "quads": [
        {"corner": [-1, 0, -1], "edge_u": [0, 0, 2], "edge_v": [2, 0, 0], "material": "grey"},
        {"corner": [-0.5, 1.0, -0.5], "edge_u": [1, 0, 0], "edge_v": [0, 0, 1], "material": "light"},
    ],
}


@pytest.fixture(autouse=True)
def isolated_output_root(tmp_path, monkeypatch):
    """Keep default output directories inside the test's temporary directory."""
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "default_output"))


@pytest.fixture
def tiny_scene_dict():
    return copy.deepcopy(TINY_SCENE)


@pytest.fixture
def tiny_scene(tiny_scene_dict):
    return Scene.from_dict(tiny_scene_dict)


@pytest.fixture
def tiny_ctx(tiny_scene):
    """Direct-lighting context of the single pixel of the tiny scene."""
    return SceneReuseContext(tiny_scene, primary_shading(tiny_scene, 1, 1), RenderMode.DI)


@pytest.fixture
def tiny_scene_file(tmp_path, tiny_scene_dict):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_scene_dict))
    return path


@pytest.fixture(scope="session")
def glossy_box():
    return builtin_scene("glossy_box")


@pytest.fixture(scope="session")
def di_ctx(glossy_box):
    """Direct-lighting context of a 16x16 view of the glossy box."""
    return SceneReuseContext(glossy_box, primary_shading(glossy_box, 16, 16), RenderMode.DI)


@pytest.fixture(scope="session")
def path_ctx(glossy_box):
    """One-bounce path context of a 16x16 view of the glossy box."""
    return SceneReuseContext(glossy_box, primary_shading(glossy_box, 16, 16), RenderMode.PATH)


@pytest.fixture
def lane_source():
    """Factory for counter-based random sources: lane_source(lanes, dims, seed=..., stream=...)."""
    def make(lanes, dims, seed=1234, stream=1, frame=0):
        return LaneSource(RandomStreams(seed), stream, lanes, dims, frame)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def builtin_names():
    return sorted(BUILTIN_SCENES)


# Pytest configuration
def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers",
        "benchmark: mark test as a benchmark"
    )


def pytest_collection_modifyitems(config, items):
    """Modify test collection to handle test markers."""
    for item in items:
        # Add markers based on test name
        if "benchmark" in item.nodeid:
            item.add_marker(pytest.mark.benchmark)
        if "integration" in item.nodeid:
            item.add_marker(pytest.mark.integration)
        if "edge_case" in item.nodeid:
            item.add_marker(pytest.mark.edge_case)
