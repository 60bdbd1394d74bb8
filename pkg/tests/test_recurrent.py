import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

import egogaze.recurrent as rec
from egogaze.core import FixationRecord, FixationTrace
from egogaze.errors import ConvergenceError, DimensionError
from egogaze.recurrent import (
    GruGazePredictor,
    GruLayerParams,
    cross_entropy,
    forward_sequence,
    gradient_check,
    gru_cell_forward,
    init_gru_params,
    load_gru_model,
    save_gru_model,
)
from egogaze.synthetic import symbol_task


def scalar_layer(w_z=0.0, u_z=0.0, b_z=0.0, w_r=0.0, u_r=0.0, b_r=0.0,
                 w_h=0.0, u_h=0.0, b_h=0.0):
    as_mat = lambda v: np.array([[float(v)]])
    as_vec = lambda v: np.array([float(v)])
    return GruLayerParams(
        as_mat(w_z), as_mat(u_z), as_vec(b_z),
        as_mat(w_r), as_mat(u_r), as_vec(b_r),
        as_mat(w_h), as_mat(u_h), as_vec(b_h),
    )


class TestCellForward:
    def test_all_zero_params_hold_state_at_zero(self):
        h, cache = gru_cell_forward(np.zeros(1), np.zeros(1), scalar_layer())
        assert h[0] == 0.0
        assert cache["z"][0] == 0.5 and cache["r"][0] == 0.5
        assert cache["c"][0] == 0.0

    def test_saturated_update_gate_carries_old_state(self):
        layer = scalar_layer(b_z=50.0, w_h=1.0)
        h, cache = gru_cell_forward(np.array([1.0]), np.array([0.8]), layer)
        assert cache["z"][0] > 1 - 1e-12
        assert h[0] == pytest.approx(0.8, abs=1e-9)

    def test_hand_computed_scalar_case(self):
        # z = r = 0.5; cand = tanh(1 + 0.5*0.5) = 0.84828; h = 0.25 + 0.42414
        layer = scalar_layer(w_h=1.0, u_h=1.0)
        h, cache = gru_cell_forward(np.array([1.0]), np.array([0.5]), layer)
        assert cache["z"][0] == pytest.approx(0.5, abs=1e-12)
        assert cache["r"][0] == pytest.approx(0.5, abs=1e-12)
        assert cache["c"][0] == pytest.approx(np.tanh(1.25), abs=1e-12)
        assert h[0] == pytest.approx(0.67414, abs=1e-5)

    def test_shape_mismatch_rejected(self):
        params = init_gru_params(3, 4, hidden_size=2, n_layers=1)
        with pytest.raises(DimensionError):
            gru_cell_forward(np.zeros(5), np.zeros(2), params.layers[0])

    def test_gate_ranges_and_hidden_bound(self):
        rng = np.random.default_rng(0)
        params = init_gru_params(4, 9, hidden_size=6, n_layers=3, rng=rng)
        hidden = [np.zeros(6) for _ in range(3)]
        for t in range(40):
            inp = rng.standard_normal(4) * 5
            for li, layer in enumerate(params.layers):
                hidden[li], cache = gru_cell_forward(inp, hidden[li], layer)
                assert ((cache["z"] > 0) & (cache["z"] < 1)).all()
                assert ((cache["r"] > 0) & (cache["r"] < 1)).all()
                # from h_0 = 0, |h| stays within max(|h_0|_inf, 1) = 1
                assert np.abs(hidden[li]).max() <= 1.0 + 1e-12
                inp = hidden[li]


class TestForwardSequence:
    def test_probability_maps_sum_to_one(self):
        rng = np.random.default_rng(1)
        params = init_gru_params(5, 16, hidden_size=4, n_layers=3, rng=rng)
        xs = rng.standard_normal((20, 5))
        _, probs = forward_sequence(params, xs)
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9
        assert (probs > 0).all()

    def test_zero_model_gives_uniform_maps(self):
        params = init_gru_params(3, 25, hidden_size=4, n_layers=3)
        for tensor in params.tensors():
            tensor[...] = 0.0
        _, probs = forward_sequence(params, np.random.default_rng(2).random((5, 3)))
        assert np.abs(probs - 1.0 / 25).max() < 1e-12

    def test_causality_future_frames_do_not_affect_past(self):
        rng = np.random.default_rng(3)
        params = init_gru_params(4, 9, hidden_size=5, n_layers=2, rng=rng)
        xs = rng.standard_normal((10, 4))
        logits, _ = forward_sequence(params, xs)
        permuted = xs.copy()
        permuted[6:] = permuted[6:][::-1]
        logits_permuted, _ = forward_sequence(params, permuted)
        assert np.array_equal(logits[:6], logits_permuted[:6])
        assert not np.array_equal(logits[6:], logits_permuted[6:])


class TestLoss:
    def test_uniform_logits_give_log_400(self):
        assert cross_entropy(np.zeros(400), 7) == pytest.approx(np.log(400), abs=1e-12)

    def test_confident_correct_logit_drives_loss_to_zero(self):
        logits = np.zeros(16)
        logits[3] = 60.0
        assert cross_entropy(logits, 3) < 1e-12

    def test_loss_is_non_negative(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            logits = rng.standard_normal((6, 9)) * 3
            cells = rng.integers(0, 9, size=6)
            assert cross_entropy(logits, cells) >= 0.0

    def test_invalid_cells_excluded(self):
        logits = np.zeros((3, 4))
        logits[1, 2] = 100.0
        assert cross_entropy(logits, np.array([-1, 2, -1])) < 1e-12

    def test_all_invalid_rejected(self):
        with pytest.raises(ValueError):
            cross_entropy(np.zeros((2, 4)), np.array([-1, -1]))


class TestGradientCheck:
    def test_correct_implementation_passes(self):
        for trial in range(3):
            rng = np.random.default_rng(trial)
            params = init_gru_params(3, 9, hidden_size=4, n_layers=3, rng=rng)
            xs = rng.standard_normal((3, 3))
            cells = rng.integers(0, 9, size=3)
            assert gradient_check(params, xs, cells) < 1e-4

    def test_corrupted_u_h_gradient_detected(self, monkeypatch):
        rng = np.random.default_rng(9)
        params = init_gru_params(3, 9, hidden_size=4, n_layers=2, rng=rng)
        xs = rng.standard_normal((3, 3))
        cells = rng.integers(0, 9, size=3)
        original = rec._window_pass

        def corrupted(p, x, c, hidden):
            loss, n_valid, grads = original(p, x, c, hidden)
            if grads is not None:
                for layer in grads.layers:
                    layer.u_h *= 2.0
            return loss, n_valid, grads

        monkeypatch.setattr(rec, "_window_pass", corrupted)
        assert gradient_check(params, xs, cells) > 1e-2

    def test_zero_parameter_model_stays_finite(self):
        params = init_gru_params(2, 4, hidden_size=3, n_layers=2)
        for tensor in params.tensors():
            tensor[...] = 0.0
        err = gradient_check(params, np.ones((2, 2)), np.array([0, 3]))
        assert np.isfinite(err)


class TestTraining:
    def test_fresh_model_loss_near_uniform(self):
        # small init keeps logits near zero, so the first loss sits at ln(k^2)
        features, cells, _ = symbol_task(n_frames=200, seed=5)
        rng = np.random.default_rng(5)
        params = init_gru_params(features.shape[1], 400, rng=rng)
        logits, _ = forward_sequence(params, features)
        assert cross_entropy(logits, cells) == pytest.approx(np.log(400), abs=0.15)

    def test_loss_decreases_on_learnable_task(self):
        features, cells, _ = symbol_task(n_frames=400, n_symbols=4, seed=0)
        model = GruGazePredictor(epochs=5, seed=0).fit(features, cells)
        assert model.loss_curve_[-1] < model.loss_curve_[0]

    def test_same_seed_gives_bit_identical_curves(self):
        features, cells, _ = symbol_task(n_frames=300, seed=1)
        a = GruGazePredictor(epochs=3, seed=42).fit(features, cells)
        b = GruGazePredictor(epochs=3, seed=42).fit(features, cells)
        assert np.array_equal(a.loss_curve_, b.loss_curve_)
        assert all(
            np.array_equal(x, y)
            for x, y in zip(a.params_.tensors(), b.params_.tensors())
        )

    def test_different_seed_differs(self):
        features, cells, _ = symbol_task(n_frames=300, seed=1)
        a = GruGazePredictor(epochs=2, seed=1).fit(features, cells)
        b = GruGazePredictor(epochs=2, seed=2).fit(features, cells)
        assert not np.array_equal(a.loss_curve_, b.loss_curve_)

    def test_trace_targets_accepted(self):
        records = tuple(FixationRecord(i, 0.5, 0.5) for i in range(30))
        trace = FixationTrace("seq", "s0", records)
        features = np.random.default_rng(5).random((30, 4))
        model = GruGazePredictor(epochs=2, seed=0).fit(features, trace)
        assert model.predict_proba(features).shape == (30, 20, 20)

    def test_invalid_frames_masked_from_loss(self):
        rng = np.random.default_rng(6)
        features = rng.random((40, 3))
        cells = rng.integers(0, 400, size=40)
        cells[::4] = -1
        model = GruGazePredictor(epochs=2, seed=0).fit(features, cells)
        assert np.isfinite(model.loss_curve_).all()

    def test_non_finite_loss_aborts_with_diagnostics(self, monkeypatch):
        features, cells, _ = symbol_task(n_frames=60, seed=2)
        original = rec._window_pass

        def exploding(p, x, c, hidden):
            loss, n_valid, grads = original(p, x, c, hidden)
            return np.inf, n_valid, grads

        monkeypatch.setattr(rec, "_window_pass", exploding)
        with pytest.raises(ConvergenceError, match="epoch 0"):
            GruGazePredictor(epochs=1, seed=0).fit(features, cells)

    def test_alignment_validated(self):
        records = tuple(FixationRecord(i, 0.5, 0.5) for i in range(5))
        trace = FixationTrace("seq", "s0", records)
        with pytest.raises(DimensionError):
            GruGazePredictor().fit(np.ones((6, 2)), trace)

    def test_predict_before_fit(self):
        with pytest.raises(NotFittedError):
            GruGazePredictor().predict(np.ones((3, 2)))


class TestCheckpoint:
    def test_round_trip_predictions_match_at_f32(self, tmp_path):
        features, cells, _ = symbol_task(n_frames=200, seed=3)
        model = GruGazePredictor(epochs=2, seed=7).fit(features, cells)
        save_gru_model(model, tmp_path / "gru.bin")
        loaded = load_gru_model(tmp_path / "gru.bin")
        for original, restored in zip(model.params_.tensors(), loaded.params_.tensors()):
            assert np.array_equal(original.astype(np.float32).astype(float), restored)
        a = model.predict_proba(features[:20])
        b = loaded.predict_proba(features[:20])
        assert np.abs(a - b).max() < 1e-5

    def test_rejects_non_checkpoint(self, tmp_path):
        from egogaze.io import save_matrix

        save_matrix(tmp_path / "x.bin", np.ones((1, 4)))
        with pytest.raises(ValueError):
            load_gru_model(tmp_path / "x.bin")
