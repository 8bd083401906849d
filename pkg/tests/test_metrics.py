"""
Metrics tests: ensemble covariance, duplicate heatmaps and error against a reference.
"""
import numpy as np
import pytest

from restirmcmc.errors import DimensionMismatchError, FileNotReadableError, InvalidValueError, RejectedInputError
from restirmcmc.metrics import (
    ImageEnsemble, box_avg_covariance, covariance_matrix, decay_inversions, duplicate_heatmap, heatmap_image,
    heatmap_rows, mean_duplicates, mse, radial_covariance, relative_change, sample_covariance, z_scores,
)
from restirmcmc.metrics.impoverishment import window_offsets
from restirmcmc.render.image_io import write_pfm


def _brute_box(ens: ImageEnsemble, radius: int, include_self: bool) -> np.ndarray:
    out = np.zeros((ens.height, ens.width))
    for y in range(ens.height):
        for x in range(ens.width):
            values = []
            for yy in range(max(y - radius, 0), min(y + radius, ens.height - 1) + 1):
                for xx in range(max(x - radius, 0), min(x + radius, ens.width - 1) + 1):
                    if (xx, yy) == (x, y) and not include_self:
                        continue
                    values.append(sample_covariance(ens, (x, y), (xx, yy)))
            out[y, x] = np.mean(values) if values else 0.0
    return out


def _correlated(rng, K=16, h=6, w=7) -> ImageEnsemble:
    a = rng.random(K)
    return ImageEnsemble(a[:, None, None] * np.ones((K, h, w)))


def _stripes(rng, K=24, size=32) -> ImageEnsemble:
    a = rng.standard_normal(K)
    sign = (-1.0) ** np.arange(size)
    return ImageEnsemble(a[:, None, None] * np.broadcast_to(sign, (size, size))[None])


class TestImageEnsemble:
    """Construction and loading"""

    def test_grey_images_repeat_to_three_channels(self, rng):
        ens = ImageEnsemble(rng.random((3, 4, 5)))
        assert ens.images.shape == (3, 4, 5, 3)
        assert (ens.K, ens.height, ens.width) == (3, 4, 5)

    def test_needs_two_images(self, rng):
        with pytest.raises(InvalidValueError):
            ImageEnsemble(rng.random((1, 4, 4, 3)))

    def test_rejects_non_finite(self, rng):
        images = rng.random((3, 2, 2, 3))
        images[1, 0, 0, 2] = np.nan
        with pytest.raises(RejectedInputError):
            ImageEnsemble(images)

    def test_rejects_bad_shape(self, rng):
        with pytest.raises(DimensionMismatchError):
            ImageEnsemble(rng.random((3, 4, 4, 2)))

    def test_from_directory(self, tmp_path, rng):
        for k in range(3):
            write_pfm(tmp_path / f"run_{k:03d}.pfm", rng.random((4, 5, 3)).astype(np.float32))
        ens = ImageEnsemble.from_directory(tmp_path)
        assert ens.images.shape == (3, 4, 5, 3)

    def test_from_empty_directory(self, tmp_path):
        with pytest.raises(FileNotReadableError):
            ImageEnsemble.from_directory(tmp_path)

    def test_from_directory_size_mismatch(self, tmp_path, rng):
        write_pfm(tmp_path / "run_000.pfm", rng.random((4, 5, 3)).astype(np.float32))
        write_pfm(tmp_path / "run_001.pfm", rng.random((5, 4, 3)).astype(np.float32))
        with pytest.raises(DimensionMismatchError):
            ImageEnsemble.from_directory(tmp_path)


class TestCovariance:
    """Pairwise and box-averaged covariance"""

    def test_sample_covariance_matches_numpy(self, rng):
        images = rng.random((10, 3, 3))
        ens = ImageEnsemble(images)
        expected = np.cov(images[:, 0, 1], images[:, 2, 2])[0, 1]
        assert sample_covariance(ens, (1, 0), (2, 2)) == pytest.approx(expected)
        assert sample_covariance(ens, 1, 8) == pytest.approx(expected)

    def test_covariance_matrix_is_symmetric(self, rng):
        ens = ImageEnsemble(rng.random((8, 3, 3, 3)))
        m = covariance_matrix(ens, [0, 4, (2, 2)])
        assert m.shape == (3, 3)
        assert np.allclose(m, m.T)
        assert m[1, 2] == pytest.approx(sample_covariance(ens, 4, 8))

    @pytest.mark.parametrize("radius,include_self", [(0, True), (1, False), (1, True), (2, False)])
    def test_box_average_matches_brute_force(self, rng, radius, include_self):
        ens = ImageEnsemble(rng.random((6, 4, 5, 3)))
        report = box_avg_covariance(ens, radius, include_self)
        assert np.allclose(report.maps[radius], _brute_box(ens, radius, include_self))
        assert report.image_average[radius] == pytest.approx(report.maps[radius].mean())

    def test_radius_zero(self, rng):
        ens = ImageEnsemble(rng.random((6, 3, 3)))
        with_self = box_avg_covariance(ens, 0, include_self=True).maps[0]
        assert np.allclose(with_self, ens.images[..., 0].var(axis=0, ddof=1))
        assert np.all(box_avg_covariance(ens, 0).maps[0] == 0.0)

    def test_negative_radius(self, rng):
        with pytest.raises(InvalidValueError):
            box_avg_covariance(ImageEnsemble(rng.random((2, 2, 2))), -1)

    def test_perfectly_correlated_images(self, rng):
        ens = _correlated(rng)
        var = ens.images[:, 0, 0, 0].var(ddof=1)
        report = radial_covariance(ens, (1, 2, 4, 8))
        for r in report.radii:
            assert np.allclose(report.maps[r], var)
        assert decay_inversions(report) == 0

    def test_independent_pixels(self, rng):
        ens = ImageEnsemble(rng.random((400, 8, 8)))
        report = radial_covariance(ens, (1, 2))
        # var of U(0,1) is 1/12; cross terms vanish on average
        assert abs(report.image_average[1]) < 0.01 / 12 * 10
        assert abs(report.image_average[2]) < 0.01 / 12 * 10

    def test_stripes_give_decay_inversion(self, rng):
        ens = _stripes(rng)
        var = ens.images[:, 0, 0, 0].var(ddof=1)
        report = radial_covariance(ens, (1, 2))
        assert report.maps[1][16, 16] == pytest.approx(-0.5 * var)
        assert report.maps[2][16, 16] == pytest.approx(var / 6.0)
        assert decay_inversions(report) == 1
        assert decay_inversions(report, from_radius=2) == 0

    def test_report_rows(self, rng):
        report = radial_covariance(_correlated(rng), (1, 4), include_self=True)
        rows = report.rows()
        assert [row["radius"] for row in rows] == [1, 4]
        assert all(row["include_self"] for row in rows)
        assert set(rows[0]) == {"radius", "include_self", "image_avg_covariance"}


class TestDuplicateHeatmap:
    """Sample impoverishment"""

    def test_window_offsets(self):
        assert list(window_offsets(3)) == [-1, 0, 1]
        assert list(window_offsets(4)) == [-2, -1, 0, 1]
        assert len(window_offsets(20)) == 20

    def test_missing_samples_ignored(self):
        heatmap = duplicate_heatmap(np.array([[7, 7, -1]]), window=3)
        assert list(heatmap[0]) == [1, 1, 0]

    def test_all_equal(self):
        heatmap = duplicate_heatmap(np.full((4, 4), 3), window=20)
        assert np.all(heatmap == 15)
        assert mean_duplicates(heatmap) == 15.0

    def test_unique_ids(self):
        heatmap = duplicate_heatmap(np.arange(36).reshape(6, 6), window=5)
        assert np.all(heatmap == 0)

    def test_window_limits_reach(self):
        ids = np.full((1, 10), -1)
        ids[0, 0] = ids[0, 9] = 4
        assert np.all(duplicate_heatmap(ids, window=5) == 0)
        assert duplicate_heatmap(ids, window=20)[0, 0] == 1

    def test_image_and_rows(self):
        heatmap = duplicate_heatmap(np.full((2, 3), 1), window=3)
        image = heatmap_image(heatmap, window=3)
        assert image.shape == (2, 3, 3)
        assert np.all((image >= 0) & (image <= 1))
        rows = heatmap_rows(heatmap)
        assert list(rows["pixel_x"]) == [0, 1, 2, 0, 1, 2]
        assert list(rows["pixel_y"]) == [0, 0, 0, 1, 1, 1]
        assert list(rows["duplicates"]) == list(heatmap.ravel())


class TestError:
    """Error against a reference image"""

    def test_mse(self):
        assert mse(np.ones((2, 2, 3)), np.zeros((2, 2, 3))) == 1.0
        with pytest.raises(DimensionMismatchError):
            mse(np.ones((2, 2, 3)), np.ones((2, 3, 3)))

    def test_z_scores(self):
        z = z_scores([1.0, 2.0, 3.0, 3.0], [0.0, 2.0, 3.0, 2.0], [0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0])
        assert z[0] == pytest.approx(2.0)
        assert z[1] == 0.0
        assert z[2] == 0.0
        assert z[3] == np.inf

    def test_z_scores_combine_errors(self):
        assert float(z_scores(5.0, 0.0, 3.0, 4.0)) == pytest.approx(1.0)

    def test_relative_change(self):
        assert relative_change(0.5, 1.0) == pytest.approx(-0.5)
        assert relative_change(0.0, 0.0) == 0.0
        assert relative_change(1.0, 0.0) == float("inf")
