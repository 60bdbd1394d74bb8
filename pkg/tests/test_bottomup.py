import numpy as np
import pytest

from egogaze.bottomup import (
    CUE_ORDER,
    FlowField,
    build_cue_stack,
    flow_magnitude_map,
    gbvs_lite,
    gbvs_transition_matrix,
    horn_schunck,
    itti_lite,
    resize_bilinear,
    spectral_residual,
    stationary_distribution,
)
from egogaze.errors import ConvergenceError, DimensionError
from egogaze.synthetic import (
    moving_patch_frames,
    popout_frame,
    shifted_frame,
    textured_frame,
)


def patch_cells(bounds, frame_shape, k):
    r0, c0, r1, c1 = bounds
    h, w = frame_shape
    return (
        int(r0 * k / h), int(np.ceil(r1 * k / h)) - 1,
        int(c0 * k / w), int(np.ceil(c1 * k / w)) - 1,
    )


class TestHornSchunck:
    def test_identical_frames_give_exact_zero_flow(self):
        frame = textured_frame((64, 64), seed=0)
        flow = horn_schunck(frame, frame)
        assert not flow.u.any()
        assert not flow.v.any()

    def test_constant_frames_any_shift_give_zero_flow(self):
        a = np.full((48, 48), 3.0)
        b = np.full((48, 48), 3.0)
        flow = horn_schunck(a, b)
        assert not flow.u.any() and not flow.v.any()

    def test_recovers_one_pixel_horizontal_shift(self):
        frame = textured_frame((128, 128), seed=1)
        flow = horn_schunck(frame, shifted_frame(frame, dx=1, dy=0),
                            alpha=1.0, n_iters=200)
        assert 0.7 < flow.u.mean() < 1.3
        assert np.abs(flow.v).mean() < 0.3

    def test_recovers_vertical_shift(self):
        frame = textured_frame((128, 128), seed=2)
        flow = horn_schunck(frame, shifted_frame(frame, dx=0, dy=1))
        assert 0.7 < flow.v.mean() < 1.3
        assert np.abs(flow.u).mean() < 0.3

    def test_energy_non_increasing(self):
        frame = textured_frame((96, 96), seed=3)
        _, energies = horn_schunck(frame, shifted_frame(frame, 1, 0),
                                   n_iters=200, tol=0.0, track_energy=True)
        assert len(energies) == 20
        diffs = np.diff(energies)
        assert (diffs <= 1e-9 * np.abs(energies[:-1])).all()

    def test_mismatched_sizes_rejected(self):
        with pytest.raises(DimensionError):
            horn_schunck(np.zeros((10, 10)), np.zeros((12, 10)))

    def test_deterministic(self):
        frame = textured_frame((64, 64), seed=4)
        moved = shifted_frame(frame, 1, 0)
        a = horn_schunck(frame, moved)
        b = horn_schunck(frame.copy(), moved.copy())
        assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)


class TestFlowMagnitude:
    def test_zero_flow_gives_zero_map(self):
        flow = FlowField(np.zeros((40, 40)), np.zeros((40, 40)))
        assert not flow_magnitude_map(flow, k=10).any()

    def test_uniform_translation_near_constant(self):
        frame = textured_frame((128, 128), seed=5)
        flow = horn_schunck(frame, shifted_frame(frame, 1, 0))
        grid = flow_magnitude_map(flow, k=20)
        inner = grid[2:-2, 2:-2]
        assert inner.max() / inner.min() < 1.5

    def test_moving_patch_argmax_inside_patch(self):
        frames = moving_patch_frames(n_frames=2, shape=(128, 128), patch_size=16,
                                     seed=6, step=3)
        flow = horn_schunck(frames[0] * 255, frames[1] * 255)
        grid = flow_magnitude_map(flow, k=20)
        row, col = np.unravel_index(grid.argmax(), grid.shape)
        # patch rows 56..72 -> cells 8..11; cols 10..29 over the two frames
        assert 8 <= row <= 11
        assert 1 <= col <= 5


class TestSpectralResidual:
    def test_constant_frame_near_uniform(self):
        grid = spectral_residual(np.full((64, 64), 7.0), k=20)
        assert grid.max() - grid.min() < 1e-5

    def test_popout_patch_localized(self):
        hits = 0
        for seed in range(20):
            frame, bounds = popout_frame((64, 64), patch_size=10, seed=seed)
            grid = spectral_residual(frame, k=20)
            r0, r1, c0, c1 = patch_cells(bounds, frame.shape, 20)
            row, col = np.unravel_index(grid.argmax(), grid.shape)
            hits += int(r0 <= row <= r1 and c0 <= col <= c1)
        assert hits >= 19

    def test_brightness_scale_invariance(self):
        rng = np.random.default_rng(7)
        frame = rng.random((64, 64)) + 0.5
        base = spectral_residual(frame, k=20)
        scaled = spectral_residual(frame * 37.0, k=20)
        assert np.abs(base - scaled).max() <= 1e-6 * max(base.max(), 1e-12)

    def test_small_frame_rejected(self):
        with pytest.raises(DimensionError):
            spectral_residual(np.zeros((16, 16)))


class TestIttiLite:
    def test_constant_frame_gives_zero_map(self):
        assert not itti_lite(np.full((64, 64), 9.0)).any()

    def test_popout_dot_localized(self):
        for seed in range(5):
            frame, bounds = popout_frame((128, 128), patch_size=20, seed=seed,
                                         noise_level=0.05)
            grid = itti_lite(frame, k=20)
            r0, r1, c0, c1 = patch_cells(bounds, frame.shape, 20)
            row, col = np.unravel_index(grid.argmax(), grid.shape)
            assert r0 <= row <= r1 and c0 <= col <= c1

    def test_brightness_doubling_preserves_argmax(self):
        frame, _ = popout_frame((128, 128), patch_size=20, seed=11, noise_level=0.05)
        a = itti_lite(frame, k=20)
        b = itti_lite(frame * 2.0, k=20)
        assert np.unravel_index(a.argmax(), a.shape) == np.unravel_index(b.argmax(), b.shape)

    def test_rgb_input_accepted(self):
        rng = np.random.default_rng(8)
        frame = rng.random((64, 64, 3))
        grid = itti_lite(frame, k=10)
        assert grid.shape == (10, 10)
        assert grid.min() >= 0.0 and grid.max() <= 1.0


def eigen_oracle(matrix):
    values, vectors = np.linalg.eig(matrix.T)
    stationary = np.real(vectors[:, np.argmin(np.abs(values - 1.0))])
    return stationary / stationary.sum()


class TestGbvs:
    def test_stationary_distribution_properties(self):
        frame = textured_frame((64, 64), seed=9)
        cells = np.asarray(frame[::4, ::4])[:16, :16]
        matrix = gbvs_transition_matrix(cells, sigma=2.4)
        pi = stationary_distribution(matrix)
        assert abs(pi.sum() - 1.0) < 1e-12
        assert np.abs(pi @ matrix - pi).sum() < 1e-8

    def test_toy_outlier_matches_dense_eigen_oracle(self):
        toy = np.full((3, 3), 0.2)
        toy[1, 1] = 0.9
        matrix = gbvs_transition_matrix(toy, sigma=0.45)
        pi = stationary_distribution(matrix)
        assert np.abs(pi - eigen_oracle(matrix)).max() < 1e-6

    def test_start_vector_independence(self):
        rng = np.random.default_rng(10)
        matrix = gbvs_transition_matrix(rng.random((10, 10)), sigma=1.5)
        a = stationary_distribution(matrix, start=rng.random(100))
        b = stationary_distribution(matrix, start=rng.random(100))
        assert np.abs(a - b).sum() < 1e-6

    def test_constant_frame_falls_back_to_uniform(self):
        grid = gbvs_lite(np.full((64, 64), 4.0), k=10)
        assert np.allclose(grid, 0.01 * 0 + 1.0 / 100)

    def test_non_convergence_raises_with_residual(self):
        rng = np.random.default_rng(11)
        matrix = gbvs_transition_matrix(rng.random((6, 6)), sigma=1.0)
        with pytest.raises(ConvergenceError) as excinfo:
            stationary_distribution(matrix, tol=0.0, max_iters=5)
        assert excinfo.value.residual is not None

    def test_full_pipeline_matches_eigen_oracle(self):
        frame = textured_frame((80, 80), seed=12)
        from egogaze.core import block_average

        cells = block_average(frame, (20, 20))
        matrix = gbvs_transition_matrix(cells, sigma=3.0)
        pi = stationary_distribution(matrix)
        assert np.abs(pi - eigen_oracle(matrix)).max() < 1e-6
        from egogaze.core import max_normalize

        assert np.allclose(gbvs_lite(frame, k=20), max_normalize(pi.reshape(20, 20)))


class TestCueStack:
    def make_frames(self, n=3):
        return moving_patch_frames(n_frames=n, shape=(64, 64), patch_size=12, seed=13)

    def test_identical_frames_zero_flow_block(self):
        frame = textured_frame((64, 64), seed=14)
        stack = build_cue_stack([frame, frame.copy()], k=10)
        assert not stack.cue("of").any()

    def test_feature_row_length(self):
        stack = build_cue_stack(self.make_frames(2), k=20)
        features = stack.feature_matrix()
        assert features.data.shape == (2, 4 * 400)
        assert features.provenance == "cue_stack"

    def test_fixed_cue_order(self):
        assert CUE_ORDER == ("itti", "gbvs", "sr", "of")
        stack = build_cue_stack(self.make_frames(2), k=10)
        assert stack.names == CUE_ORDER
        rows = stack.feature_matrix().data
        assert np.array_equal(rows[1, :100], stack.cue("itti")[1].ravel())
        assert np.array_equal(rows[1, 300:400], stack.cue("of")[1].ravel())

    def test_maps_normalized(self):
        stack = build_cue_stack(self.make_frames(3), k=10)
        assert stack.maps.min() >= 0.0
        assert stack.maps.max() <= 1.0

    def test_single_frame_rejected(self):
        with pytest.raises(ValueError):
            build_cue_stack([textured_frame((64, 64))])

    def test_parallel_jobs_match_serial(self):
        frames = self.make_frames(3)
        serial = build_cue_stack(frames, k=10, n_jobs=1)
        parallel = build_cue_stack(frames, k=10, n_jobs=3)
        assert np.array_equal(serial.maps, parallel.maps)

    def test_cue_failure_names_cue_and_frame(self):
        frames = [textured_frame((64, 64), seed=15), np.full((64, 64), np.nan)]
        with pytest.raises(RuntimeError, match="frame 1"):
            build_cue_stack(frames, k=10)


class TestResize:
    def test_identity_when_same_shape(self):
        rng = np.random.default_rng(16)
        img = rng.random((32, 32))
        assert np.allclose(resize_bilinear(img, (32, 32)), img)

    def test_constant_preserved(self):
        img = np.full((40, 60), 3.5)
        assert np.allclose(resize_bilinear(img, (20, 30)), 3.5)
