"""Experiment protocols: knowledge transfer, subject/frame ablations, and
activity decoding from gaze-prediction windows with a linear SVM.

Runners take train/eval callables so any predictor can slot in; every runner
is deterministic given its seed and enumeration order.
"""

import csv
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .metrics import evaluate, nss
from .core import fixation_cell
from .errors import DimensionError
from .validation import as_float_array

SVM_REG = 1e-4
SVM_EPOCHS = 20
SVM_LEARNING_RATE = 0.1

FEATURE_KINDS = ("avg_map", "nss_vector", "augmented")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Train-on-row, test-on-column score matrices. Failed cells are NaN."""

    ids: tuple
    nss: np.ndarray
    auc: np.ndarray

    def diagonal_mean(self, which="auc"):
        return float(np.nanmean(np.diag(getattr(self, which))))

    def off_diagonal_mean(self, which="auc"):
        values = getattr(self, which)
        mask = ~np.eye(len(self.ids), dtype=bool)
        return float(np.nanmean(values[mask]))


def transfer_matrix(sequences, train_fn, eval_fn):
    """Cross-sequence generalization matrix.

    ``sequences`` is a list of (id, payload); ``train_fn(payload)`` returns a
    model and ``eval_fn(model, payload)`` returns (nss, auc). A failed fit
    marks the row NaN and the run continues.
    """
    sequences = list(sequences)
    if len(sequences) < 2:
        raise ValueError(f"need at least 2 sequences, got {len(sequences)}")
    ids = tuple(seq_id for seq_id, _ in sequences)
    size = len(sequences)
    nss_cells = np.full((size, size), np.nan)
    auc_cells = np.full((size, size), np.nan)
    for i, (_, train_payload) in enumerate(sequences):
        try:
            model = train_fn(train_payload)
        except Exception:
            continue
        for j, (_, test_payload) in enumerate(sequences):
            try:
                nss_cells[i, j], auc_cells[i, j] = eval_fn(model, test_payload)
            except Exception:
                continue
    return ConfusionMatrix(ids, nss_cells, auc_cells)


def subject_ablation(traces_by_subject, train_fn, eval_fn):
    """Score vs number of training subjects over all subject combinations.

    For each i in 1..S-1, trains on every size-i combination (sorted subject
    order, deterministic enumeration) and evaluates on the held-out subjects.
    Returns [(i, mean, std, n_combinations), ...].
    """
    subjects = sorted(traces_by_subject)
    if len(subjects) < 2:
        raise ValueError(f"need at least 2 subjects, got {len(subjects)}")
    curve = []
    for i in range(1, len(subjects)):
        scores = []
        for train_subjects in combinations(subjects, i):
            held_out = [s for s in subjects if s not in train_subjects]
            model = train_fn([traces_by_subject[s] for s in train_subjects])
            scores.append(eval_fn(model, [traces_by_subject[s] for s in held_out]))
        curve.append((i, float(np.mean(scores)), float(np.std(scores)), len(scores)))
    return curve


def frame_ablation(n_frames, train_fn, eval_fn, step=1000, runs=3, seed=0):
    """Score vs training-frame budget.

    For each budget in step, 2*step, ..., n_frames, draws ``runs`` seeded
    random frame subsets, trains via ``train_fn(frame_indices)``, and
    evaluates with ``eval_fn(model)``. The final budget is the full range.
    Returns [(budget, mean, std), ...].
    """
    if n_frames < step:
        raise ValueError(f"sequence length {n_frames} is below the step {step}")
    budgets = list(range(step, n_frames + 1, step))
    if budgets[-1] != n_frames:
        budgets.append(n_frames)
    rng = np.random.default_rng(seed)
    curve = []
    for budget in budgets:
        scores = []
        for _ in range(runs):
            indices = np.sort(rng.choice(n_frames, size=budget, replace=False))
            scores.append(eval_fn(train_fn(indices)))
        curve.append((budget, float(np.mean(scores)), float(np.std(scores))))
    return curve


@dataclass(frozen=True)
class WindowFeature:
    """One decoding feature extracted from a window of frames."""

    kind: str
    window_size: int
    start: int
    vector: np.ndarray
    label: str


def window_features(maps, trace, window_size, count=2000, seed=0, frame_range=None):
    """Sample frame windows and compute the three decoding feature kinds.

    Per window: the mean prediction map (k^2-D), the per-frame NSS values
    (window-size-D), and their concatenation. Windows are drawn uniformly
    (seeded) from ``frame_range`` (default: the whole sequence) and labeled
    with the trace's sequence id.
    """
    maps = np.asarray(maps, dtype=float)
    if maps.ndim != 3:
        raise DimensionError(f"maps must be (n, k, k), got shape {maps.shape}")
    if maps.shape[0] != len(trace):
        raise DimensionError(f"{maps.shape[0]} maps vs {len(trace)} trace records")
    k = maps.shape[1]
    lo, hi = frame_range if frame_range is not None else (0, maps.shape[0])
    if hi - lo < window_size:
        raise ValueError(
            f"frame range of {hi - lo} is shorter than window size {window_size}"
        )
    rng = np.random.default_rng(seed)
    starts = rng.integers(lo, hi - window_size + 1, size=count)
    features = []
    records = trace.records
    for start in starts:
        start = int(start)
        window_maps = maps[start : start + window_size]
        avg_map = window_maps.reshape(window_size, -1).mean(axis=0)
        nss_vec = np.zeros(window_size)
        for offset in range(window_size):
            rec = records[start + offset]
            if rec.valid:
                nss_vec[offset] = nss(window_maps[offset], fixation_cell(rec.x, rec.y, k))
        features.append(WindowFeature("avg_map", window_size, start, avg_map, trace.sequence_id))
        features.append(WindowFeature("nss_vector", window_size, start, nss_vec, trace.sequence_id))
        features.append(WindowFeature(
            "augmented", window_size, start, np.concatenate([avg_map, nss_vec]),
            trace.sequence_id,
        ))
    return features


def stack_features(features, kind):
    """Gather one feature kind into (X, labels) arrays for the SVM."""
    picked = [f for f in features if f.kind == kind]
    if not picked:
        raise ValueError(f"no features of kind {kind!r}")
    return np.stack([f.vector for f in picked]), np.array([f.label for f in picked])


class LinearSvm(BaseEstimator):
    """One-vs-rest linear SVM trained by seeded subgradient descent.

    Hinge loss with L2 regularization applied as a proximal shrinkage step,
    so weights contract toward zero for any regularization strength. Biases
    are unregularized.
    """

    def __init__(self, reg=SVM_REG, epochs=SVM_EPOCHS,
                 learning_rate=SVM_LEARNING_RATE, seed=0):
        self.reg = reg
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y):
        X = as_float_array(X, name="X", ndim=2)
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise DimensionError(f"{X.shape[0]} samples vs {y.shape[0]} labels")
        classes = np.unique(y)
        if classes.size < 2:
            raise ValueError("need at least 2 classes")
        targets = np.where(y[:, None] == classes[None, :], 1.0, -1.0)
        n, m = X.shape
        weights = np.zeros((classes.size, m))
        biases = np.zeros(classes.size)
        rng = np.random.default_rng(self.seed)
        lr = self.learning_rate
        for epoch in range(self.epochs):
            step = lr / (1.0 + epoch)
            order = rng.permutation(n)
            for idx in order:
                x = X[idx]
                margin = targets[idx] * (weights @ x + biases)
                active = margin < 1.0
                weights /= 1.0 + step * self.reg
                if active.any():
                    weights[active] += step * targets[idx, active, None] * x[None, :]
                    biases[active] += step * targets[idx, active]
        self.classes_ = classes
        self.coef_ = weights
        self.intercept_ = biases
        return self

    def decision_function(self, X):
        if not hasattr(self, "coef_"):
            raise NotFittedError("LinearSvm is not fitted")
        X = as_float_array(X, name="X")
        single = X.ndim == 1
        if single:
            X = X[None, :]
        scores = X @ self.coef_.T + self.intercept_
        return scores[0] if single else scores

    def predict(self, X):
        scores = self.decision_function(X)
        if scores.ndim == 1:
            return self.classes_[int(np.argmax(scores))]
        return self.classes_[np.argmax(scores, axis=1)]


def activity_curves(sequences, window_sizes, count=2000, train_frac=0.7,
                    reg=SVM_REG, epochs=SVM_EPOCHS, seed=0):
    """Decoding accuracy vs window size for each feature kind.

    ``sequences`` is a list of (maps, trace) pairs, one per video. Train
    windows come from the first ``train_frac`` of each sequence's frames and
    test windows from the remainder, so no window can leak across the split.
    Returns {kind: [(window_size, accuracy), ...]}.
    """
    sequences = list(sequences)
    if len(sequences) < 2:
        raise ValueError(f"need at least 2 sequences, got {len(sequences)}")
    curves = {kind: [] for kind in FEATURE_KINDS}
    for w in window_sizes:
        train_feats = []
        test_feats = []
        for si, (maps, trace) in enumerate(sequences):
            n = np.asarray(maps).shape[0]
            split = int(n * train_frac)
            train_feats.extend(window_features(
                maps, trace, w, count=count, seed=seed * 1000 + si,
                frame_range=(0, split)))
            test_feats.extend(window_features(
                maps, trace, w, count=count, seed=seed * 1000 + 500 + si,
                frame_range=(split, n)))
        for kind in FEATURE_KINDS:
            X_train, y_train = stack_features(train_feats, kind)
            X_test, y_test = stack_features(test_feats, kind)
            model = LinearSvm(reg=reg, epochs=epochs, seed=seed).fit(X_train, y_train)
            accuracy = float((model.predict(X_test) == y_test).mean())
            curves[kind].append((w, accuracy))
    return curves


def sequence_scores(model_maps, trace):
    """(mean NSS, mean AUC) of per-frame maps against a trace."""
    report = evaluate(model_maps, trace)
    return report.nss_mean, report.auc_mean


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_confusion_csv(matrix, path, which="nss"):
    values = getattr(matrix, which)
    rows = [
        [matrix.ids[i]] + [repr(float(v)) for v in values[i]]
        for i in range(len(matrix.ids))
    ]
    return _write_rows(path, ["train\\test"] + list(matrix.ids), rows)


def write_subject_ablation_csv(curve, path):
    rows = [[i, repr(mean), repr(std), n] for i, mean, std, n in curve]
    return _write_rows(path, ["n_subjects", "mean_score", "std_score", "n_combinations"], rows)


def write_frame_ablation_csv(curve, path):
    rows = [[budget, repr(mean), repr(std)] for budget, mean, std in curve]
    return _write_rows(path, ["n_frames", "mean_score", "std_score"], rows)


def write_activity_csv(curves, path):
    rows = []
    for kind in FEATURE_KINDS:
        for w, accuracy in curves.get(kind, []):
            rows.append([kind, w, repr(accuracy)])
    return _write_rows(path, ["feature_kind", "window_size", "accuracy"], rows)
