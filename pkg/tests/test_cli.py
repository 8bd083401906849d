"""
End-to-end runs of the command-line interface.
"""
import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from restirmcmc.cli import EXIT_CONFIG, EXIT_METRICS_GATE, EXIT_OK, EXIT_TESTBED_GATE, main
from restirmcmc.render.image_io import write_ids, write_pfm


@pytest.fixture
def runner():
    return CliRunner()


def _config(tmp_path, data, name="run.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def _ensemble(directory, images, ids=None):
    directory.mkdir(parents=True, exist_ok=True)
    for k, image in enumerate(images):
        write_pfm(directory / f"run_{k:03d}.pfm", image)
        if ids is not None:
            write_ids(directory / f"run_{k:03d}_ids.npy", ids[k])
    return directory


class TestInit:
    """init subcommand"""

    def test_writes_defaults(self, runner, tmp_path):
        result = runner.invoke(main, ["init", str(tmp_path)])
        assert result.exit_code == EXIT_OK
        data = json.loads((tmp_path / "restirmcmc.json").read_text())
        assert data["mode"] == "render-di"
        assert data["render"]["M"] == 32

    def test_keeps_existing_without_force(self, runner, tmp_path):
        path = tmp_path / "restirmcmc.json"
        path.write_text("{}")
        result = runner.invoke(main, ["init", str(tmp_path)])
        assert result.exit_code == EXIT_OK
        assert "already exists" in result.output
        assert path.read_text() == "{}"

        result = runner.invoke(main, ["init", str(tmp_path), "--force"])
        assert result.exit_code == EXIT_OK
        assert "render" in json.loads(path.read_text())


class TestHelp:

    def test_exit_codes_documented(self, runner):
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        assert "Exit codes" in result.output
        assert "render" in result.output and "testbed" in result.output


@pytest.mark.integration
class TestRender:
    """render subcommand"""

    ARGS = ["render", "--width", "8", "--height", "8", "--frames", "1", "-M", "4", "--seed", "3", "-t", "2"]

    def test_frame_artifacts(self, runner, tmp_path):
        out = tmp_path / "out"
        result = runner.invoke(main, self.ARGS + ["--out", str(out)])
        assert result.exit_code == EXIT_OK, result.output
        for name in ("frames/frame_0000.ppm", "frames/frame_0000.pfm", "frames/ids_0000.npy",
                     "acceptance.csv", "timings.csv", "config.json"):
            assert (out / name).is_file(), name
        assert (out / "frames/frame_0000.ppm").read_bytes().startswith(b"P6\n8 8\n255\n")
        assert np.load(out / "frames/ids_0000.npy").shape == (8, 8)
        acceptance = pd.read_csv(out / "acceptance.csv")
        assert list(acceptance["frame"]) == [0]
        assert json.loads((out / "config.json").read_text())["render"]["M"] == 4

    def test_runs_are_reproducible(self, runner, tmp_path):
        for name in ("a", "b"):
            result = runner.invoke(main, self.ARGS + ["--out", str(tmp_path / name)])
            assert result.exit_code == EXIT_OK, result.output
        for name in ("frames/frame_0000.pfm", "frames/ids_0000.npy", "acceptance.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_ensemble(self, runner, tmp_path):
        out = tmp_path / "out"
        result = runner.invoke(main, ["render", "--width", "6", "--height", "6", "--frames", "0", "-M", "2",
                                      "--ensemble", "2", "--warmup", "1", "--out", str(out)])
        assert result.exit_code == EXIT_OK, result.output
        assert sorted(p.name for p in (out / "ensemble").iterdir()) == [
            "run_000.pfm", "run_000_ids.npy", "run_001.pfm", "run_001_ids.npy"]

    def test_invalid_config(self, runner, tmp_path):
        cfg = _config(tmp_path, {"render": {"M_cap": -1}})
        result = runner.invoke(main, ["render", "-c", cfg, "--out", str(tmp_path / "out")])
        assert result.exit_code == EXIT_CONFIG

    def test_unknown_key(self, runner, tmp_path):
        cfg = _config(tmp_path, {"render": {"spp": 4}})
        result = runner.invoke(main, ["render", "-c", cfg])
        assert result.exit_code == EXIT_CONFIG

    def test_missing_scene(self, runner, tmp_path):
        result = runner.invoke(main, ["render", "--scene", str(tmp_path / "nope.json")])
        assert result.exit_code == EXIT_CONFIG


@pytest.mark.integration
class TestMetrics:
    """metrics subcommand"""

    def test_artifacts(self, runner, tmp_path, rng):
        images = rng.random((5, 8, 8, 3)).astype(np.float32)
        ids = rng.integers(0, 6, (5, 8, 8))
        ens = _ensemble(tmp_path / "ens", images, ids)
        write_pfm(tmp_path / "reference.pfm", images.mean(axis=0))
        out = tmp_path / "out"
        result = runner.invoke(main, ["metrics", "--ensemble", str(ens), "--reference",
                                      str(tmp_path / "reference.pfm"), "--out", str(out)])
        assert result.exit_code == EXIT_OK, result.output
        covariance = pd.read_csv(out / "covariance.csv")
        assert len(covariance) == 10
        assert set(covariance["include_self"]) == {True, False}
        for name in ("covariance_r8.pfm", "heatmap.csv", "heatmap.ppm", "error.csv", "summary.csv"):
            assert (out / name).is_file(), name
        assert len(pd.read_csv(out / "heatmap.csv")) == 64
        summary = pd.read_csv(out / "summary.csv").set_index("metric")["value"]
        assert summary["images"] == 5
        assert summary["mean_duplicates"] > 0

    def test_decay_gate(self, runner, tmp_path, rng):
        a = rng.standard_normal(6)
        sign = (-1.0) ** np.arange(16)
        images = a[:, None, None, None] * np.broadcast_to(sign[None, :, None], (16, 16, 3))[None]
        ens = _ensemble(tmp_path / "ens", images.astype(np.float32))
        result = runner.invoke(main, ["metrics", "--ensemble", str(ens), "--check-decay",
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code == EXIT_METRICS_GATE
        assert (tmp_path / "out" / "covariance.csv").is_file()

    def test_needs_ensemble(self, runner, tmp_path):
        result = runner.invoke(main, ["metrics", "--out", str(tmp_path / "out")])
        assert result.exit_code == EXIT_CONFIG


@pytest.mark.integration
@pytest.mark.statistical
class TestTestbed:
    """testbed subcommand"""

    def test_unbiasedness(self, runner, tmp_path):
        cfg = _config(tmp_path, {"mode": "testbed-unbiasedness",
                                 "testbed": {"trials": 2000, "M_values": [1, 4], "k_values": [1]}})
        out = tmp_path / "out"
        result = runner.invoke(main, ["testbed", "-c", cfg, "--out", str(out), "--seed", "5"])
        assert result.exit_code == EXIT_OK, result.output
        rows = pd.read_csv(out / "unbiasedness.csv")
        assert list(rows["M"]) == [1, 4, 1]
        assert list(rows["k_mutations"]) == [0, 0, 1]
        assert rows["passed"].all()

    def test_two_pixel(self, runner, tmp_path):
        cfg = _config(tmp_path, {"testbed": {"two_pixel": {"trials": 4000}}})
        out = tmp_path / "out"
        result = runner.invoke(main, ["testbed", "-x", "two-pixel", "-c", cfg, "--out", str(out)])
        assert result.exit_code == EXIT_OK, result.output
        rows = pd.read_csv(out / "two_pixel.csv").set_index("case")
        assert rows.loc["dissimilar", "reduction"] > 0.3

    def test_two_pixel_gate(self, runner, tmp_path):
        cfg = _config(tmp_path, {"testbed": {"two_pixel": {"trials": 4000, "min_reduction": 1.0}}})
        result = runner.invoke(main, ["testbed", "-x", "two-pixel", "-c", cfg, "--out", str(tmp_path / "out")])
        assert result.exit_code == EXIT_TESTBED_GATE

    def test_chain(self, runner, tmp_path):
        cfg = _config(tmp_path, {"testbed": {"chain_steps": 800_000, "chains": 8000, "chain_bins": 8, "slices": []}})
        out = tmp_path / "out"
        result = runner.invoke(main, ["testbed", "-x", "chain", "-c", cfg, "--out", str(out)])
        assert result.exit_code == EXIT_OK, result.output
        rows = pd.read_csv(out / "chain.csv")
        assert len(rows) == 2
        assert rows["passed"].all()

    def test_chain_scene_slices(self, runner, tmp_path):
        cfg = _config(tmp_path, {"testbed": {"chain_target": "uniform", "chain_steps": 400_000, "chains": 20_000,
                                             "chain_bins": 8, "slices": ["low_light_slice"]}})
        out = tmp_path / "out"
        result = runner.invoke(main, ["testbed", "-x", "chain", "-c", cfg, "--out", str(out)])
        assert result.exit_code == EXIT_OK, result.output
        rows = pd.read_csv(out / "chain.csv").set_index("chain")
        assert list(rows.index) == ["uniform", "low_light_slice", "low_light_slice (no kernel ratio)"]
        assert rows.loc["low_light_slice", "tv_distance"] < 0.02
        assert rows.loc["low_light_slice (no kernel ratio)", "tv_distance"] > 0.2
        assert rows["passed"].all()
