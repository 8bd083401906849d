"""
Configuration loading, override precedence and validation.
"""
import json

import pytest

from restirmcmc.config import (
    DEFAULT_OUTPUT, OUTPUT_ROOT_ENV, RunConfig, load_config_file, parse_config, validate_config, write_config,
)
from restirmcmc.errors import ConfigError, InvalidValueError, MissingSceneError, UnknownConfigKeyError


def _write(tmp_path, data, name="restirmcmc.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
    return str(path)


class TestDefaults:
    """Defaults and file loading"""

    def test_defaults(self):
        cfg = parse_config()
        assert cfg.mode == "render-di"
        assert cfg.render.M == 32
        assert cfg.render.M_cap == 50.0
        assert cfg.render.warmup == 30
        assert cfg.mutation.strategy == "di-direction"
        assert cfg.metrics.radii == [1, 2, 4, 8, 16]
        assert cfg.testbed.slices == ["low_light_slice", "glossy_floor"]

    def test_empty_file_means_defaults(self, tmp_path):
        assert load_config_file(_write(tmp_path, "  \n")) == {}
        assert parse_config(_write(tmp_path, "")).render.M == 32

    def test_invalid_json(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(_write(tmp_path, "{mode: render"))

    def test_json_must_be_object(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(_write(tmp_path, [1, 2]))

    def test_output_root_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "env_out"))
        assert RunConfig().output == str(tmp_path / "env_out")
        monkeypatch.delenv(OUTPUT_ROOT_ENV)
        assert RunConfig().output == DEFAULT_OUTPUT


class TestValidation:
    """Schema and range checks name the offending key"""

    def test_unknown_top_level_key(self, tmp_path):
        with pytest.raises(UnknownConfigKeyError) as exc:
            parse_config(_write(tmp_path, {"colour": "red"}))
        assert exc.value.config_key == "colour"

    def test_unknown_nested_key(self, tmp_path):
        with pytest.raises(UnknownConfigKeyError) as exc:
            parse_config(_write(tmp_path, {"render": {"samples": 4}}))
        assert exc.value.config_key == "render.samples"

    def test_section_must_be_object(self, tmp_path):
        with pytest.raises(InvalidValueError) as exc:
            parse_config(_write(tmp_path, {"render": 4}))
        assert exc.value.config_key == "render"

    @pytest.mark.parametrize("key,value", [
        ("render.M_cap", -1),
        ("render.M", 0),
        ("render.width", 0),
        ("render.exponent_cap", 0),
        ("mutation.iters", -2),
        ("mutation.s2", 1.5),
        ("spatial.k", 1.5),
        ("metrics.K", 1),
        ("metrics.radii", []),
        ("testbed.trials", 1),
        ("testbed.target", "spiky"),
        ("testbed.two_pixel.inputs", "stratified"),
        ("testbed.two_pixel.min_reduction", 2.0),
        ("mode", "render-volume"),
        ("seed", -1),
    ])
    def test_out_of_range(self, key, value):
        with pytest.raises(InvalidValueError) as exc:
            parse_config(overrides={key: value})
        assert exc.value.config_key == key

    def test_boolean_is_not_a_number(self):
        with pytest.raises(InvalidValueError):
            parse_config(overrides={"render.M": True})

    def test_strategy_must_match_render_mode(self):
        with pytest.raises(InvalidValueError) as exc:
            parse_config(overrides={"mode": "render-path", "mutation.strategy": "di-direction"})
        assert exc.value.config_key == "mutation.strategy"

    def test_strategy_follows_render_mode(self):
        assert parse_config(overrides={"mode": "render-path"}).mutation.strategy == "reconnection-vertex"

    def test_missing_scene(self):
        with pytest.raises(MissingSceneError) as exc:
            parse_config(overrides={"render.scene": "no/such/scene.json"})
        assert exc.value.config_key == "render.scene"

    def test_scene_file(self, tiny_scene_file):
        assert parse_config(overrides={"render.scene": str(tiny_scene_file)}).render.scene == str(tiny_scene_file)

    def test_metrics_needs_ensemble(self):
        with pytest.raises(InvalidValueError) as exc:
            parse_config(family="metrics")
        assert exc.value.config_key == "metrics.ensemble"

    def test_metrics_reference_must_exist(self, tmp_path):
        with pytest.raises(InvalidValueError) as exc:
            parse_config(overrides={"metrics.ensemble": str(tmp_path), "metrics.reference": str(tmp_path / "x.pfm")},
                         family="metrics")
        assert exc.value.config_key == "metrics.reference"

    def test_testbed_mode_skips_scene_check(self):
        cfg = parse_config(overrides={"render.scene": "missing.json"}, family="testbed")
        assert cfg.mode == "testbed-unbiasedness"


class TestPrecedence:
    """flags > file > defaults"""

    def test_file_over_defaults(self, tmp_path):
        cfg = parse_config(_write(tmp_path, {"render": {"M": 8}, "mutation": {"iters": 3}}))
        assert cfg.render.M == 8
        assert cfg.mutation.iters == 3
        assert cfg.render.width == 64

    def test_flags_over_file(self, tmp_path):
        path = _write(tmp_path, {"render": {"M": 8, "width": 16}})
        cfg = parse_config(path, {"render.M": 2, "render.width": None})
        assert cfg.render.M == 2
        assert cfg.render.width == 16

    def test_family_replaces_foreign_mode(self, tmp_path):
        path = _write(tmp_path, {"mode": "render-path"})
        assert parse_config(path, family="testbed").mode == "testbed-unbiasedness"
        assert parse_config(path, family="render").mode == "render-path"

    def test_nested_two_pixel_section(self, tmp_path):
        cfg = parse_config(_write(tmp_path, {"mode": "testbed-two-pixel",
                                             "testbed": {"two_pixel": {"trials": 50, "shared": False}}}))
        assert cfg.testbed.two_pixel.trials == 50
        assert cfg.testbed.two_pixel.shared is False
        assert cfg.testbed.two_pixel.M == 4

    def test_write_and_read_back(self, tmp_path):
        original = parse_config(overrides={"render.M": 7, "spatial.radius": 3.5, "testbed.k_values": [2]})
        path = write_config(original, tmp_path / "saved.json")
        reloaded = parse_config(str(path))
        assert reloaded.to_dict() == original.to_dict()

    def test_validate_normalizes_integers(self):
        cfg = RunConfig()
        cfg.render.M = 8.0
        validate_config(cfg)
        assert isinstance(cfg.render.M, int)
