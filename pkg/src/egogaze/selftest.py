"""Self-contained verification suite over generated synthetic data.

Each check mirrors one criterion of the acceptance suite: metric identities,
oracle equivalences, exact recovery, recurrent-model correctness and
learnability, bottom-up behavior, oracle dominance, cue fusion, and the
experiment-protocol harness. ``run_selftest`` executes everything with one
seed, writes a deterministic report plus run manifest, and returns the
structured results. All tolerances are fixed here, not configurable.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .baselines import AverageFixationMap, central_gaussian, fixation_oracle_maps
from .bottomup import (
    gbvs_transition_matrix,
    horn_schunck,
    spectral_residual,
    stationary_distribution,
)
from .core import (
    FixationRecord,
    FixationTrace,
    block_average,
    build_targets,
    fixation_cell,
    gaussian_kernel,
    rasterize_fixation,
    smooth_map,
)
from .cues import augment, point_to_map
from .experiments import (
    activity_curves,
    frame_ablation,
    subject_ablation,
    transfer_matrix,
    write_activity_csv,
    write_confusion_csv,
    write_frame_ablation_csv,
    write_subject_ablation_csv,
)
from .metrics import auc, evaluate, nss, zscore_map
from .recurrent import (
    GruGazePredictor,
    forward_sequence,
    gradient_check,
    init_gru_params,
)
from .regression import LinearGazeRegressor, combine_cues
from .report import write_csv, write_manifest
from .synthetic import (
    five_task_suite,
    gaussian_gaze_trace,
    multi_subject_traces,
    popout_frame,
    shifted_frame,
    symbol_task,
    textured_frame,
)


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    name: str
    passed: bool
    details: str


def _result(criterion, name, passed, details):
    return CheckResult(criterion, name, bool(passed), details)


def check_metric_identities(seed=0):
    """NSS complement/affine identities, AUC monotone invariance, tie behavior."""
    rng = np.random.default_rng(seed)
    worst_complement = 0.0
    worst_affine = 0.0
    monotone_ok = True
    for _ in range(100):
        grid = rng.random((20, 20))
        cell = tuple(rng.integers(0, 20, size=2))
        worst_complement = max(worst_complement, abs(nss(1.0 - grid, cell) + nss(grid, cell)))
        a, b = rng.uniform(0.1, 4.0), rng.uniform(-2.0, 2.0)
        worst_affine = max(worst_affine, abs(nss(a * grid + b, cell) - nss(grid, cell)))
        base = auc(grid, cell)
        monotone_ok &= auc(np.exp(grid), cell) == base
        monotone_ok &= auc(grid**3, cell) == base
    constant_auc = auc(np.ones((20, 20)), (5, 5))
    passed = (worst_complement < 1e-9 and worst_affine < 1e-9
              and monotone_ok and constant_auc == 0.5)
    return _result(
        1, "metric identities", passed,
        f"max |NSS(1-S)+NSS(S)|={worst_complement:.2e}, "
        f"max affine drift={worst_affine:.2e}, monotone={monotone_ok}, "
        f"constant AUC={constant_auc}",
    )


def _auc_pairwise_oracle(grid, cell):
    flat = grid.ravel()
    fix = grid[cell]
    others = np.delete(flat, cell[0] * grid.shape[1] + cell[1])
    return ((fix > others).sum() + 0.5 * (fix == others).sum()) / others.size


def check_oracle_equivalence(seed=0):
    """AUC vs exhaustive rank oracle; regression vs normal-equations oracle."""
    rng = np.random.default_rng(seed)
    worst_auc = 0.0
    for _ in range(1000):
        grid = rng.random((20, 20))
        cell = tuple(rng.integers(0, 20, size=2))
        worst_auc = max(worst_auc, abs(auc(grid, cell) - _auc_pairwise_oracle(grid, cell)))

    worst_fit = 0.0
    for lam in (0.0, 1e-6, 1e-2):
        M = rng.standard_normal((200, 50))
        X = rng.standard_normal((200, 16))
        model = LinearGazeRegressor(ridge=lam).fit(M, X)
        oracle = np.linalg.solve(M.T @ M + lam * np.eye(50), M.T @ X)
        worst_fit = max(worst_fit, np.abs(model.weights_ - oracle).max() / np.abs(oracle).max())

    M = rng.standard_normal((120, 30))
    M = np.hstack([M, M[:, :5]])  # rank deficient
    X = rng.standard_normal((120, 9))
    model = LinearGazeRegressor(ridge=0.0).fit(M, X)
    oracle_residual = float(np.linalg.norm(M @ (np.linalg.pinv(M) @ X) - X))
    residual_ok = model.residual_norm_ <= oracle_residual + 1e-8

    passed = worst_auc < 1e-12 and worst_fit < 1e-8 and residual_ok
    return _result(
        2, "oracle equivalence", passed,
        f"max AUC gap={worst_auc:.2e}, max fit rel err={worst_fit:.2e}, "
        f"rank-deficient residual {model.residual_norm_:.6f} <= {oracle_residual:.6f}",
    )


def check_exact_recovery(seed=0):
    """X = M W* systems recovered to the stated sup-norm tolerance."""
    worst = 0.0
    for offset in range(20):
        rng = np.random.default_rng(seed * 1000 + offset)
        M = rng.standard_normal((60, 12))
        W_true = rng.standard_normal((12, 25))
        X = M @ W_true
        model = LinearGazeRegressor().fit(M, X)
        worst = max(worst, np.abs(M @ model.weights_ - X).max())
    return _result(3, "exact recovery", worst < 1e-8,
                   f"max ||MW - X||_inf over 20 seeds = {worst:.2e}")


def check_gru_correctness(seed=0):
    """Backward pass vs finite differences; causality; softmax normalization."""
    rng = np.random.default_rng(seed)
    worst_grad = 0.0
    for _ in range(10):
        m = int(rng.integers(2, 6))
        hidden = int(rng.integers(2, 5))
        side = int(rng.integers(2, 4))  # k^2 <= 9
        T = int(rng.integers(1, 4))
        params = init_gru_params(m, side * side, hidden_size=hidden, n_layers=3,
                                 rng=np.random.default_rng(rng.integers(1 << 30)))
        xs = rng.standard_normal((T, m))
        cells = rng.integers(0, side * side, size=T)
        worst_grad = max(worst_grad, gradient_check(params, xs, cells))

    causal_ok = True
    softmax_ok = True
    for _ in range(100):
        m = int(rng.integers(2, 5))
        hidden = int(rng.integers(2, 5))
        T = int(rng.integers(4, 10))
        params = init_gru_params(m, 9, hidden_size=hidden, n_layers=3,
                                 rng=np.random.default_rng(rng.integers(1 << 30)))
        xs = rng.standard_normal((T, m))
        logits, probs = forward_sequence(params, xs)
        softmax_ok &= bool(np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9)
        cut = T // 2
        permuted = xs.copy()
        permuted[cut:] = permuted[cut:][::-1]
        logits_permuted, _ = forward_sequence(params, permuted)
        causal_ok &= bool(np.array_equal(logits[:cut], logits_permuted[:cut]))

    passed = worst_grad < 1e-4 and causal_ok and softmax_ok
    return _result(
        4, "recurrent-model correctness", passed,
        f"max gradient rel err={worst_grad:.2e}, causality={causal_ok}, "
        f"softmax normalization={softmax_ok}",
    )


def check_gru_learnability(seed=0):
    """Deterministic feature-to-cell task learned inside the paper recipe."""
    features, cells, _ = symbol_task(n_frames=2000, n_symbols=5, seed=seed)
    model = GruGazePredictor(seed=seed).fit(features, cells)
    probs = model.predict_proba(features)
    accuracy = float((probs.reshape(len(features), -1).argmax(axis=1) == cells).mean())
    final_loss = float(model.loss_curve_[-1])
    bound = 0.5 * np.log(400.0)
    passed = accuracy >= 0.90 and final_loss < bound
    return _result(5, "recurrent-model learnability", passed,
                   f"accuracy={accuracy:.3f} (>=0.90), "
                   f"final loss={final_loss:.3f} (<{bound:.3f})")


def check_bottomup(seed=0):
    """Flow recovery, pop-out localization, Markov-chain oracle equivalence."""
    frame = textured_frame((128, 128), seed=seed)
    flow = horn_schunck(frame, shifted_frame(frame, dx=1, dy=0), alpha=1.0, n_iters=200)
    mean_u = float(flow.u.mean())
    flow_ok = abs(mean_u - 1.0) < 0.3
    zero_flow = horn_schunck(frame, frame)
    zero_ok = not zero_flow.u.any() and not zero_flow.v.any()

    hits = 0
    for draw in range(100):
        popout, (r0, c0, r1, c1) = popout_frame((64, 64), patch_size=10,
                                                seed=seed * 1000 + draw)
        grid = spectral_residual(popout, k=20)
        row, col = np.unravel_index(grid.argmax(), grid.shape)
        cr0, cr1 = int(r0 * 20 / 64), int(np.ceil(r1 * 20 / 64)) - 1
        cc0, cc1 = int(c0 * 20 / 64), int(np.ceil(c1 * 20 / 64)) - 1
        hits += int(cr0 <= row <= cr1 and cc0 <= col <= cc1)

    cells = block_average(textured_frame((80, 80), seed=seed + 7), (20, 20))
    matrix = gbvs_transition_matrix(cells, sigma=3.0)
    pi = stationary_distribution(matrix)
    values, vectors = np.linalg.eig(matrix.T)
    eigvec = np.real(vectors[:, np.argmin(np.abs(values - 1.0))])
    eigvec = eigvec / eigvec.sum()
    eig_gap = float(np.abs(pi - eigvec).max())
    residual = float(np.abs(pi @ matrix - pi).sum())

    passed = flow_ok and zero_ok and hits >= 95 and eig_gap < 1e-6 and residual < 1e-8
    return _result(
        6, "bottom-up behavior", passed,
        f"mean u={mean_u:.3f}, zero-flow exact={zero_ok}, popout {hits}/100, "
        f"eigen gap={eig_gap:.2e}, ||piP-pi||_1={residual:.2e}",
    )


def check_fom_dominance(seed=0):
    """The smoothed ground-truth map beats every other predictor per trace."""
    kernel = gaussian_kernel(5, 1.0)
    interior = smooth_map(rasterize_fixation(0.5, 0.5, 20), kernel)
    interior_constant = float(zscore_map(interior).max())

    auc_ok = True
    dominance_ok = True
    constant_ok = True
    for i in range(10):
        rng = np.random.default_rng(seed * 100 + i)
        trace = gaussian_gaze_trace(150, center=(0.4 + 0.02 * i, 0.5), spread=0.1,
                                    seed=seed * 100 + i, sequence_id=f"seq{i}")
        oracle_maps = fixation_oracle_maps(trace, k=20, kernel=kernel)
        oracle_report = evaluate(oracle_maps, trace)
        auc_ok &= oracle_report.auc_mean == 1.0

        # interior fixations score exactly the analytically derived constant
        for frame in oracle_report.per_frame:
            rec = trace.records[frame.frame_index]
            row, col = fixation_cell(rec.x, rec.y, 20)
            if 2 <= row <= 17 and 2 <= col <= 17:
                constant_ok &= abs(frame.nss - interior_constant) < 1e-9

        features = rng.standard_normal((len(trace), 24))
        targets = build_targets(trace, k=20, kernel=kernel)
        regressor = LinearGazeRegressor().fit(features, targets)
        gru = GruGazePredictor(epochs=2, seed=i).fit(features, trace)
        afm = AverageFixationMap().fit(trace)
        competitors = {
            "gauss": central_gaussian(20),
            "afm": afm.map_,
            "regression": regressor.predict(features),
            "gru": gru.predict_proba(features),
        }
        for maps in competitors.values():
            dominance_ok &= oracle_report.nss_mean > evaluate(maps, trace).nss_mean

    passed = auc_ok and dominance_ok and constant_ok
    return _result(
        7, "fixation-oracle dominance", passed,
        f"oracle AUC=1.0: {auc_ok}, NSS dominance: {dominance_ok}, "
        f"interior NSS constant={interior_constant:.4f} matched: {constant_ok}",
    )


def check_cue_fusion(seed=0):
    """Planted two-cue mixture recovered; aligned MP maps raise NSS."""
    rng = np.random.default_rng(seed)
    trace = gaussian_gaze_trace(40, seed=seed)
    targets = build_targets(trace, k=20)
    stream_a = rng.random((40, 20, 20))
    stream_b = (targets.reshape(40, 20, 20) - 0.7 * stream_a) / 0.3
    model = combine_cues({"a": stream_a, "b": stream_b}, trace, ridge=0.0)
    mixture_ok = model.residual_norm_ < 1e-6

    increases = []
    for s in range(50):
        r = np.random.default_rng(seed * 1000 + s)
        points = r.random((40, 2))
        records = tuple(FixationRecord(i, x, y) for i, (x, y) in enumerate(points))
        mp_trace = FixationTrace(f"mp{s}", "s0", records)
        prediction = np.stack([r.random((20, 20)) for _ in range(40)])
        mp_maps = np.stack([
            point_to_map([points[i]] if r.random() < 0.8 else [tuple(r.random(2))], k=20)
            for i in range(40)
        ])
        base = evaluate(prediction, mp_trace).nss_mean
        boosted = evaluate(
            np.stack([augment(prediction[i], mp_maps[i]) for i in range(40)]), mp_trace
        ).nss_mean
        increases.append(boosted - base)
    mean_increase = float(np.mean(increases))

    passed = mixture_ok and mean_increase > 0
    return _result(
        8, "cue-fusion recovery", passed,
        f"mixture residual={model.residual_norm_:.2e} (<1e-6), "
        f"mean NSS increase from MP augmentation={mean_increase:.4f} (>0)",
    )


def _afm_train(traces):
    return AverageFixationMap().fit(traces)


def check_protocol_harness(seed=0, out_dir=None):
    """Transfer structure, ablation trends, and activity decoding ordering."""
    transfer_ok = True
    last_matrix = None
    for s in range(10):
        suite = five_task_suite(n_frames=200, seed=seed * 100 + s)
        matrix = transfer_matrix(
            [(item["id"], item["trace"]) for item in suite],
            _afm_train,
            lambda model, trace: (evaluate(model.map_, trace).nss_mean,
                                  evaluate(model.map_, trace).auc_mean),
        )
        transfer_ok &= matrix.diagonal_mean("auc") > matrix.off_diagonal_mean("auc")
        last_matrix = matrix

    subject_rhos = []
    last_subject_curve = None
    for s in range(10):
        traces = multi_subject_traces(n_subjects=4, n_frames=150, seed=seed * 100 + s)
        curve = subject_ablation(
            traces, _afm_train,
            lambda model, held: float(np.mean([evaluate(model.map_, t).nss_mean
                                               for t in held])),
        )
        subject_rhos.append(spearmanr([i for i, _, _, _ in curve],
                                      [m for _, m, _, _ in curve]).statistic)
        last_subject_curve = curve

    frame_rhos = []
    last_frame_curve = None
    for s in range(10):
        train_trace = gaussian_gaze_trace(3000, seed=seed * 100 + s, subject_id="train")
        test_trace = gaussian_gaze_trace(500, seed=seed * 100 + 50 + s, subject_id="test")

        def train(indices, source=train_trace):
            records = tuple(
                FixationRecord(j, source.records[i].x, source.records[i].y)
                for j, i in enumerate(indices)
            )
            return AverageFixationMap().fit(FixationTrace("seq", "train", records))

        curve = frame_ablation(3000, train,
                               lambda model: evaluate(model.map_, test_trace).nss_mean,
                               step=1000, runs=3, seed=seed * 100 + s)
        frame_rhos.append(spearmanr([b for b, _, _ in curve],
                                    [m for _, m, _ in curve]).statistic)
        last_frame_curve = curve

    ablation_ok = float(np.mean(subject_rhos)) > 0 and float(np.mean(frame_rhos)) > 0

    aug_accs, avg_accs, nss_accs = [], [], []
    last_curves = None
    for s in range(10):
        suite = five_task_suite(n_frames=300, seed=seed * 100 + 500 + s)
        curves = activity_curves([(item["maps"], item["trace"]) for item in suite],
                                 window_sizes=[6], count=220, seed=seed * 100 + s)
        aug_accs.append(dict(curves["augmented"])[6])
        avg_accs.append(dict(curves["avg_map"])[6])
        nss_accs.append(dict(curves["nss_vector"])[6])
        last_curves = curves
    aug_mean = float(np.mean(aug_accs))
    avg_mean = float(np.mean(avg_accs))
    nss_mean_acc = float(np.mean(nss_accs))
    chance = 1.0 / 5.0
    activity_ok = (aug_mean >= avg_mean - 1e-9 and avg_mean > chance + 0.1
                   and abs(nss_mean_acc - chance) < 0.15)

    if out_dir is not None:
        out_dir = Path(out_dir)
        write_confusion_csv(last_matrix, out_dir / "transfer_nss.csv", which="nss")
        write_confusion_csv(last_matrix, out_dir / "transfer_auc.csv", which="auc")
        write_subject_ablation_csv(last_subject_curve, out_dir / "ablation_subjects.csv")
        write_frame_ablation_csv(last_frame_curve, out_dir / "ablation_frames.csv")
        write_activity_csv(last_curves, out_dir / "activity_accuracy.csv")

    passed = transfer_ok and ablation_ok and activity_ok
    return _result(
        9, "protocol harness", passed,
        f"transfer diag>offdiag 10/10: {transfer_ok}, "
        f"subject rho mean={np.mean(subject_rhos):.2f}, "
        f"frame rho mean={np.mean(frame_rhos):.2f}, "
        f"activity aug={aug_mean:.3f} >= avg={avg_mean:.3f} > chance, "
        f"nss-only={nss_mean_acc:.3f} ~ {chance}",
    )


ALL_CHECKS = (
    check_metric_identities,
    check_oracle_equivalence,
    check_exact_recovery,
    check_gru_correctness,
    check_gru_learnability,
    check_bottomup,
    check_fom_dominance,
    check_cue_fusion,
    check_protocol_harness,
)


def run_selftest(out_dir, seed=0):
    """Run all criterion checks; write the report, protocol outputs, and the
    run manifest. File contents depend only on the seed."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for check in ALL_CHECKS:
        if check is check_protocol_harness:
            results.append(check(seed=seed, out_dir=out_dir / "protocol"))
        else:
            results.append(check(seed=seed))
    write_csv(
        out_dir / "selftest_report.csv",
        ["criterion", "name", "passed", "details"],
        [[r.criterion, r.name, int(r.passed), r.details] for r in results],
    )
    write_manifest(out_dir / "manifest.json", "selftest",
                   {"checks": [r.name for r in results]}, seed)
    return results
