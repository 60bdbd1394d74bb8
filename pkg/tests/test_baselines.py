import numpy as np
import pytest

from egogaze.baselines import AverageFixationMap, central_gaussian, fixation_oracle_maps
from egogaze.core import (
    FixationRecord,
    FixationTrace,
    gaussian_kernel,
    rasterize_fixation,
    smooth_map,
)
from egogaze.metrics import evaluate, zscore_map
from egogaze.synthetic import gaussian_gaze_trace


def trace_from_points(points, sequence_id="seq", subject_id="s0"):
    records = tuple(FixationRecord(i, x, y) for i, (x, y) in enumerate(points))
    return FixationTrace(sequence_id, subject_id, records)


class TestCentralGaussian:
    def test_sums_to_one_with_center_argmax(self):
        grid = central_gaussian(k=21)
        assert grid.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.unravel_index(grid.argmax(), grid.shape) == (10, 10)

    def test_four_fold_symmetry(self):
        grid = central_gaussian(k=20)
        assert np.allclose(grid, grid[::-1, :], atol=1e-15)
        assert np.allclose(grid, grid[:, ::-1], atol=1e-15)
        assert np.allclose(grid, grid.T, atol=1e-15)

    def test_wide_sigma_approaches_uniform(self):
        grid = central_gaussian(k=20, sigma_frac=10.0)
        assert grid.max() / grid.min() < 1.05

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError):
            central_gaussian(sigma_frac=0.0)


class TestAverageFixationMap:
    def test_single_fixation_equals_smoothed_one_hot(self):
        trace = trace_from_points([(0.3, 0.6)])
        model = AverageFixationMap(k=20).fit(trace)
        expected = smooth_map(rasterize_fixation(0.3, 0.6, 20))
        assert np.allclose(model.map_, expected, atol=1e-15)
        assert model.n_fixations_ == 1

    def test_uniform_coverage_gives_near_constant_map(self):
        # one fixation at every cell center, 25 passes; a narrow kernel keeps
        # the boundary smoothing loss negligible
        k = 20
        centers = [((j + 0.5) / k, (i + 0.5) / k) for i in range(k) for j in range(k)]
        traces = [trace_from_points(centers, subject_id=f"s{r}") for r in range(25)]
        model = AverageFixationMap(k=k, kernel_width=3, kernel_sigma=0.3).fit(traces)
        assert model.n_fixations_ == 10000
        assert model.map_.max() / model.map_.min() < 1.2

    def test_center_biased_traces_beat_chance_on_held_out(self):
        train = [gaussian_gaze_trace(200, seed=s, subject_id=f"s{s}") for s in range(3)]
        held_out = gaussian_gaze_trace(200, seed=77, subject_id="s77")
        model = AverageFixationMap().fit(train)
        report = evaluate(model.map_, held_out)
        assert report.nss_mean > 0.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        points = rng.random((12, 2)).tolist()
        forward = AverageFixationMap(k=10).fit(trace_from_points(points))
        backward = AverageFixationMap(k=10).fit(trace_from_points(points[::-1]))
        assert np.allclose(forward.map_, backward.map_, atol=1e-12)

    def test_concatenation_equals_count_weighted_average(self):
        rng = np.random.default_rng(5)
        pts_a = rng.random((7, 2)).tolist()
        pts_b = rng.random((13, 2)).tolist()
        a = AverageFixationMap(k=10).fit(trace_from_points(pts_a))
        b = AverageFixationMap(k=10).fit(trace_from_points(pts_b))
        both = AverageFixationMap(k=10).fit(
            [trace_from_points(pts_a), trace_from_points(pts_b, subject_id="s1")]
        )
        weighted = (7 * a.map_ + 13 * b.map_) / 20
        assert np.abs(both.map_ - weighted).max() < 1e-12

    def test_empty_training_set_rejected(self):
        records = (FixationRecord(0, 0.5, 0.5, valid=False),)
        with pytest.raises(ValueError):
            AverageFixationMap().fit(FixationTrace("seq", "s0", records))

    def test_predict_replicates_map(self):
        model = AverageFixationMap(k=8).fit(trace_from_points([(0.5, 0.5)]))
        maps = model.predict(3)
        assert maps.shape == (3, 8, 8)
        assert np.array_equal(maps[0], maps[2])


class TestFixationOracle:
    def test_auc_is_one_on_every_frame(self):
        trace = gaussian_gaze_trace(50, seed=1)
        maps = fixation_oracle_maps(trace)
        report = evaluate(maps, trace)
        assert report.auc_mean == 1.0
        assert all(f.auc == 1.0 for f in report.per_frame)

    def test_interior_nss_equals_analytic_constant(self):
        # oracle: z-score of the kernel embedded in an otherwise empty grid
        kernel = gaussian_kernel(5, 1.0)
        interior = smooth_map(rasterize_fixation(0.5, 0.5, 20), kernel)
        constant = float(zscore_map(interior).max())
        trace = trace_from_points([(0.48, 0.52), (0.31, 0.62), (0.52, 0.33)])
        maps = fixation_oracle_maps(trace, k=20, kernel=kernel)
        report = evaluate(maps, trace)
        for frame in report.per_frame:
            assert frame.nss == pytest.approx(constant, abs=1e-9)

    def test_corner_fixation_loses_mass_but_concentrates_scores(self):
        trace = trace_from_points([(0.0, 0.0), (0.5, 0.5)])
        maps = fixation_oracle_maps(trace, k=20)
        # zero padding drops boundary mass ...
        assert maps[0].sum() < maps[1].sum()
        report = evaluate(maps, trace)
        corner, interior = report.per_frame[0].nss, report.per_frame[1].nss
        # ... which shrinks the map's std more than its peak, so the corner
        # z-score comes out higher, not lower
        assert corner > interior
        assert report.auc_mean == 1.0

    def test_dominates_other_predictors(self):
        trace = gaussian_gaze_trace(120, seed=9)
        oracle_nss = evaluate(fixation_oracle_maps(trace), trace).nss_mean
        gauss_nss = evaluate(central_gaussian(), trace).nss_mean
        afm = AverageFixationMap().fit(gaussian_gaze_trace(120, seed=10))
        afm_nss = evaluate(afm.map_, trace).nss_mean
        assert oracle_nss > gauss_nss
        assert oracle_nss > afm_nss

    def test_invalid_frames_zeroed(self):
        records = (FixationRecord(0, 0.5, 0.5), FixationRecord(1, 0.5, 0.5, valid=False))
        maps = fixation_oracle_maps(FixationTrace("seq", "s0", records), k=10)
        assert maps[0].any()
        assert not maps[1].any()
