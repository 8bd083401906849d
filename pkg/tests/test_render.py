"""
Scene-side building blocks: ray casting, materials, scene loading, image files, target
functions and the reconnection shift.
"""
import json

import numpy as np
import pytest
from scipy import integrate

from restirmcmc.errors import (
    FileNotReadableError, ImageFormatError, InvalidValueError, MissingSceneError, SceneError,
)
from restirmcmc.render.geometry import Quad, Sphere, dot, intersect, normalize, occluded
from restirmcmc.render.image_io import luminance, read_pfm, to_display, write_ids, write_pfm, write_ppm
from restirmcmc.render.materials import (
    Material, MaterialKind, bsdf_eval, direction_pdf, disk_to_square_concentric, invert_direction,
    sample_direction, square_to_disk_concentric,
)
from restirmcmc.render.pipeline import trace_one_bounce
from restirmcmc.render.scene import BUILTIN_SCENES, Scene, builtin_scene, resolve_scene
from restirmcmc.render.targets import (
    LightPathSample, integrand_di, primary_shading, reconnection_jacobian, target_function_di,
)


class TestGeometry:
    """Ray casting"""

    def test_sphere_hit(self):
        s = Sphere(np.zeros(3), 1.0, 0)
        hit = intersect(np.array([[0.0, 0.0, -5.0]]), np.array([[0.0, 0.0, 1.0]]), [s], [])
        assert hit.hit[0]
        assert hit.t[0] == pytest.approx(4.0)
        assert np.allclose(hit.normal[0], [0.0, 0.0, -1.0])

    def test_quad_hit_and_miss(self):
        q = Quad(np.array([-1.0, -1.0, 0.0]), np.array([2.0, 0.0, 0.0]), np.array([0.0, 2.0, 0.0]), 3)
        origins = np.array([[0.0, 0.0, -1.0], [2.0, 2.0, -1.0], [0.0, 0.0, -1.0]])
        dirs = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        hit = intersect(origins, dirs, [], [q])
        assert list(hit.hit) == [True, False, False]
        assert hit.t[0] == pytest.approx(1.0)
        assert hit.material[0] == 3 and hit.prim[1] == -1

    def test_nearest_of_several(self):
        s = Sphere(np.array([0.0, 0.0, 3.0]), 0.5, 0)
        q = Quad(np.array([-1.0, -1.0, 5.0]), np.array([2.0, 0.0, 0.0]), np.array([0.0, 2.0, 0.0]), 1)
        hit = intersect(np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]), [s], [q])
        assert hit.prim[0] == 0
        assert hit.t[0] == pytest.approx(2.5)

    def test_occlusion(self):
        q = Quad(np.array([-1.0, -1.0, 0.0]), np.array([2.0, 0.0, 0.0]), np.array([0.0, 2.0, 0.0]), 0)
        p = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, -1.0]])
        target = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -0.5]])
        n = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
        assert list(occluded(p, n, target, -n, [], [q])) == [True, False]


class TestMaterials:
    """Sampling, inversion and evaluation of the two lobes"""

    def test_concentric_map_round_trip(self, rng):
        u = rng.uniform(0.01, 0.99, (2000, 2))
        assert np.allclose(disk_to_square_concentric(square_to_disk_concentric(u)), u, atol=1e-9)

    @pytest.mark.parametrize("kind,exponent", [(MaterialKind.LAMBERTIAN, 0.0), (MaterialKind.PHONG, 20.0)])
    def test_invert_direction(self, rng, kind, exponent):
        n = 2000
        normal = np.tile([0.0, 0.0, 1.0], (n, 1))
        wo = np.tile(normalize(np.array([1.0, 0.0, 1.0])), (n, 1))
        kinds = np.full(n, int(kind))
        exps = np.full(n, exponent)
        u = rng.uniform(0.01, 0.99, (n, 2))
        wi = sample_direction(u, normal, wo, kinds, exps)
        assert np.allclose(np.linalg.norm(wi, axis=-1), 1.0)
        assert np.allclose(invert_direction(wi, normal, wo, kinds, exps), u, atol=1e-7)

    def test_lambertian_pdf_is_cosine(self, rng):
        n = 500
        normal = np.tile([0.0, 1.0, 0.0], (n, 1))
        wo = normal.copy()
        wi = sample_direction(rng.random((n, 2)), normal, wo, np.zeros(n, int), np.zeros(n))
        pdf = direction_pdf(normal, wo, wi, np.zeros(n, int), np.zeros(n))
        assert np.allclose(pdf, wi[:, 1] / np.pi)

    def test_phong_pdf_normalized(self):
        # integrate the lobe density over the sphere about its axis
        e = 10.0
        wo = np.array([[0.0, 0.0, 1.0]])
        normal = np.array([[0.0, 0.0, 1.0]])

        def density(cos_t):
            sin_t = np.sqrt(1.0 - cos_t ** 2)
            wi = np.array([[sin_t, 0.0, cos_t]])
            return 2.0 * np.pi * float(direction_pdf(normal, wo, wi, np.array([1]), np.array([e]))[0])

        total, _ = integrate.quad(density, 0.0, 1.0)
        assert total == pytest.approx(1.0, rel=1e-6)

    def test_bsdf_zero_below_surface(self):
        n = np.array([[0.0, 0.0, 1.0]])
        f = bsdf_eval(n, n, np.array([[0.0, 0.0, -1.0]]), np.array([0]), np.full((1, 3), 0.5), np.zeros(1))
        assert np.all(f == 0.0)

    def test_lambertian_value(self):
        n = np.array([[0.0, 0.0, 1.0]])
        f = bsdf_eval(n, n, n, np.array([0]), np.full((1, 3), 0.5), np.zeros(1))
        assert np.allclose(f, 0.5 / np.pi)

    @pytest.mark.parametrize("kwargs", [
        {"albedo": [1.2, 0.5, 0.5]},
        {"exponent": -1.0},
        {"emission": [-1.0, 0.0, 0.0]},
    ])
    def test_invalid_material(self, kwargs):
        with pytest.raises(SceneError):
            Material("bad", **kwargs)


class TestScene:
    """Scene construction and loading"""

    def test_builtins_load(self, builtin_names):
        assert builtin_names == sorted(["glossy_box", "narrow_slot", "low_light_slice", "glossy_floor"])
        for name in builtin_names:
            scene = builtin_scene(name)
            assert scene.light_area > 0
            assert scene.diameter > 0

    def test_unknown_builtin(self):
        with pytest.raises(InvalidValueError):
            builtin_scene("cornell")

    def test_light_samples_lie_on_emitter(self, glossy_box, rng):
        light = glossy_box.sample_light(rng.random((1000, 3)))
        assert np.allclose(light.position[:, 1], 1.98)
        assert np.all(np.abs(light.position[:, 0]) <= 0.3 + 1e-12)
        assert np.allclose(light.normal, [0.0, -1.0, 0.0])
        assert np.allclose(light.pdf_area, 1.0 / 0.36)

    def test_load_from_file(self, tiny_scene_file):
        scene = Scene.load(str(tiny_scene_file))
        assert scene.name == "tiny"
        assert len(scene.quads) == 2
        assert resolve_scene(str(tiny_scene_file)).name == "tiny"

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingSceneError):
            Scene.load(str(tmp_path / "absent.json"))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{ not json")
        with pytest.raises(SceneError):
            Scene.load(str(path))

    def test_no_emitter(self, tiny_scene_dict):
        tiny_scene_dict["quads"] = tiny_scene_dict["quads"][:1]
        with pytest.raises(SceneError, match="no emitter"):
            Scene.from_dict(tiny_scene_dict)

    def test_emitting_sphere(self, tiny_scene_dict):
        tiny_scene_dict["spheres"] = [{"center": [0, 0.3, 0], "radius": 0.1, "material": "light"}]
        with pytest.raises(SceneError):
            Scene.from_dict(tiny_scene_dict)

    def test_degenerate_quad(self, tiny_scene_dict):
        tiny_scene_dict["quads"][0]["edge_v"] = [0, 0, 4]
        with pytest.raises(SceneError, match="degenerate"):
            Scene.from_dict(tiny_scene_dict)

    def test_unknown_key_and_missing_field(self, tiny_scene_dict):
        with pytest.raises(SceneError, match="Unknown scene keys"):
            Scene.from_dict({**tiny_scene_dict, "lights": []})
        del tiny_scene_dict["camera"]
        with pytest.raises(SceneError, match="missing"):
            Scene.from_dict(tiny_scene_dict)

    def test_unknown_material_reference(self, tiny_scene_dict):
        tiny_scene_dict["quads"][0]["material"] = "chrome"
        with pytest.raises(SceneError):
            Scene.from_dict(tiny_scene_dict)

    def test_builtin_dicts_are_not_mutated(self):
        before = json.dumps(BUILTIN_SCENES["glossy_box"], sort_keys=True)
        builtin_scene("glossy_box")
        assert json.dumps(BUILTIN_SCENES["glossy_box"], sort_keys=True) == before


class TestImageFiles:
    """PPM / PFM / id-map output"""

    def test_pfm_round_trip(self, tmp_path, rng):
        image = rng.random((5, 7, 3)).astype(np.float32)
        write_pfm(tmp_path / "a.pfm", image)
        assert np.array_equal(read_pfm(tmp_path / "a.pfm"), image.astype(np.float64))

    def test_ppm_header(self, tmp_path):
        path = write_ppm(tmp_path / "a.ppm", np.ones((2, 3, 3)))
        data = path.read_bytes()
        assert data.startswith(b"P6\n3 2\n255\n")
        assert len(data) == len(b"P6\n3 2\n255\n") + 2 * 3 * 3

    def test_display_clamps(self):
        out = to_display(np.array([[[-1.0, 0.0, 4.0]]]))
        assert list(out[0, 0]) == [0, 0, 255]

    def test_bad_pfm(self, tmp_path):
        path = tmp_path / "bad.pfm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(ImageFormatError):
            read_pfm(path)
        path.write_bytes(b"PF\n2 2\n-1.0\n" + b"\x00" * 10)
        with pytest.raises(ImageFormatError):
            read_pfm(path)

    def test_missing_pfm(self, tmp_path):
        with pytest.raises(FileNotReadableError):
            read_pfm(tmp_path / "absent.pfm")

    def test_ids(self, tmp_path):
        ids = np.array([[1, -1], [3, 3]])
        path = write_ids(tmp_path / "ids.npy", ids)
        assert np.array_equal(np.load(path), ids)

    def test_luminance_weights_sum_to_one(self):
        assert luminance(np.ones(3)) == pytest.approx(1.0)


def _light_above(n: int = 1, height: float = 1.0, radiance: float = 2.0) -> LightPathSample:
    return LightPathSample(np.tile([0.0, height, 0.0], (n, 1)), np.tile([0.0, -1.0, 0.0], (n, 1)),
                           np.full((n, 3), radiance), np.zeros(n, dtype=np.int64))


class TestTargets:
    """Direct-lighting integrand and reconnection Jacobian"""

    def test_light_straight_above(self, tiny_ctx):
        sh = tiny_ctx.shading
        assert sh.valid[0]
        assert np.allclose(sh.position[0], 0.0, atol=1e-12)
        p_hat = target_function_di(tiny_ctx.scene, sh, _light_above())
        # L * albedo / pi * cos * cos / d^2
        assert p_hat[0] == pytest.approx(2.0 * 0.5 / np.pi)

    def test_occluded_light(self, tiny_scene_dict):
        tiny_scene_dict["spheres"] = [{"center": [0.0, 0.75, 0.0], "radius": 0.1, "material": "grey"}]
        tiny_scene_dict["camera"]["position"] = [0.0, 0.4, 0.0]
        scene = Scene.from_dict(tiny_scene_dict)
        sh = primary_shading(scene, 1, 1)
        f = integrand_di(scene, sh, _light_above())
        assert np.all(f == 0.0)

    def test_back_of_emitter_is_dark(self, tiny_ctx):
        light = _light_above()
        light.light_normal = -light.light_normal
        assert target_function_di(tiny_ctx.scene, tiny_ctx.shading, light)[0] == 0.0

    def test_reconnection_jacobian_matches_solid_angle_ratio(self, rng):
        # a small patch around the reconnection vertex subtends solid angles from y1_from
        # and y1_to; their ratio is the Jacobian
        h = 1e-5
        for _ in range(20):
            rc = rng.uniform(-1, 1, 3)
            n = normalize(rng.normal(size=3))
            t = normalize(np.cross(n, [0.3, 0.5, 0.7]))
            s = np.cross(n, t)
            y_from = rc + normalize(n + 0.5 * rng.normal(size=3)) * rng.uniform(0.5, 2.0)
            y_to = rc + normalize(n + 0.5 * rng.normal(size=3)) * rng.uniform(0.5, 2.0)
            if dot(n, y_from - rc) < 0.2 or dot(n, y_to - rc) < 0.2:
                continue
            corners = np.stack([rc, rc + h * t, rc + h * s])

            def solid_angle(y):
                d = normalize(corners - y)
                return np.linalg.norm(np.cross(d[1] - d[0], d[2] - d[0]))

            expected = solid_angle(y_to) / solid_angle(y_from)
            jac = reconnection_jacobian(rc[None], n[None], y_from[None], y_to[None])[0]
            assert jac == pytest.approx(expected, rel=1e-4)

    def test_reconnection_jacobian_round_trip(self, rng):
        rc = rng.uniform(-1, 1, (100, 3))
        n = normalize(rng.normal(size=(100, 3)))
        a = rc + rng.uniform(-1, 1, (100, 3))
        b = rc + rng.uniform(-1, 1, (100, 3))
        product = reconnection_jacobian(rc, n, a, b) * reconnection_jacobian(rc, n, b, a)
        ok = product > 0
        assert np.allclose(product[ok], 1.0, rtol=1e-12)

    def test_reconnect_to_same_pixel(self, path_ctx, lane_source):
        pixels = np.arange(256)
        samples, _ = trace_one_bounce(path_ctx, pixels, lane_source(256, 5))
        res = path_ctx.reconnect(samples, pixels, pixels)
        assert np.any(res.valid)
        assert np.allclose(res.jacobian[res.valid], 1.0)

    def test_reconnect_between_pixels_is_valid_somewhere(self, path_ctx, lane_source):
        pixels = np.arange(256)
        samples, _ = trace_one_bounce(path_ctx, pixels, lane_source(256, 5))
        res = path_ctx.reconnect(samples, pixels, np.roll(pixels, 1))
        assert np.any(res.valid)
        assert np.all(res.jacobian[res.valid] > 0)


class TestReferenceIntegral:
    """The tiny scene's direct lighting has a closed-form double integral"""

    def test_quadrature_of_light(self, tiny_ctx):
        # L rho / pi * integral over the emitter of 1 / (x^2 + z^2 + 1)^2
        inner, _ = integrate.dblquad(lambda z, x: 1.0 / (x * x + z * z + 1.0) ** 2, -0.5, 0.5, -0.5, 0.5)
        expected = 2.0 * 0.5 / np.pi * inner
        xs = np.linspace(-0.5, 0.5, 401)
        grid = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
        n = len(grid)
        light = LightPathSample(np.column_stack([grid[:, 0], np.ones(n), grid[:, 1]]),
                                np.tile([0.0, -1.0, 0.0], (n, 1)), np.full((n, 3), 2.0),
                                np.zeros(n, dtype=np.int64))
        values = tiny_ctx.target(light, np.zeros(n, dtype=np.int64))
        trapezoid = integrate.trapezoid(integrate.trapezoid(values.reshape(401, 401), xs, axis=1), xs)
        assert trapezoid == pytest.approx(expected, rel=1e-4)
