"""Least-squares mapping from frame features to linearized fixation maps.

The fit minimizes ||M W - X||^2 (plus lambda ||W||^2 when ridge > 0). With no
ridge the minimum-norm solution is taken via SVD with a relative
singular-value cutoff, which matches the normal-equations pseudo-inverse on
well-conditioned systems and stays defined on rank-deficient ones.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .core import FeatureMatrix, build_targets, gaussian_kernel
from .errors import DimensionError
from .io import load_matrix, save_matrix
from .validation import as_float_array

DEFAULT_SV_CUTOFF = 1e-10
DEFAULT_CUE_RIDGE = 1e-6


def _as_rows(features):
    if isinstance(features, FeatureMatrix):
        features = features.data
    features = as_float_array(features, name="features")
    if features.ndim == 1:
        return features[None, :], True
    if features.ndim != 2:
        raise DimensionError(f"features must be 1-D or 2-D, got shape {features.shape}")
    return features, False


class LinearGazeRegressor(BaseEstimator):
    """Multi-output linear map from feature rows to linearized gaze maps.

    Parameters
    ----------
    ridge : float
        L2 penalty; 0 selects the minimum-norm least-squares solution.
    sv_cutoff : float
        Relative singular-value cutoff (fraction of the largest singular
        value) used when ridge == 0.

    After ``fit``: ``weights_`` (m, k*k), ``k_``, ``rank_``,
    ``residual_norm_``, ``singular_values_``.
    """

    def __init__(self, ridge=0.0, sv_cutoff=DEFAULT_SV_CUTOFF):
        self.ridge = ridge
        self.sv_cutoff = sv_cutoff

    def fit(self, features, targets):
        """Solve for the weight matrix; targets are (n, k*k) rows."""
        if self.ridge < 0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")
        m_rows, _ = _as_rows(features)
        x_rows = as_float_array(targets, name="targets", ndim=2)
        if m_rows.shape[0] != x_rows.shape[0]:
            raise DimensionError(
                f"{m_rows.shape[0]} feature rows vs {x_rows.shape[0]} target rows"
            )
        k = int(round(np.sqrt(x_rows.shape[1])))
        if k * k != x_rows.shape[1] or k < 2:
            raise DimensionError(
                f"target width {x_rows.shape[1]} is not a square grid size"
            )

        u, s, vt = np.linalg.svd(m_rows, full_matrices=False)
        s_max = s[0] if s.size else 0.0
        if s_max == 0.0:
            factors = np.zeros_like(s)
            rank = 0
        elif self.ridge > 0:
            factors = s / (s**2 + self.ridge)
            rank = int((s > self.sv_cutoff * s_max).sum())
        else:
            keep = s > self.sv_cutoff * s_max
            factors = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
            rank = int(keep.sum())

        self.weights_ = vt.T @ (factors[:, None] * (u.T @ x_rows))
        self.k_ = k
        self.rank_ = rank
        self.singular_values_ = s
        self.residual_norm_ = float(np.linalg.norm(m_rows @ self.weights_ - x_rows))
        self.n_features_in_ = m_rows.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError("LinearGazeRegressor is not fitted")

    def predict_linear(self, features):
        """Signed linearized predictions, one (k*k,) row per feature row."""
        self._check_fitted()
        rows, single = _as_rows(features)
        if rows.shape[1] != self.n_features_in_:
            raise DimensionError(
                f"expected {self.n_features_in_} features, got {rows.shape[1]}"
            )
        out = rows @ self.weights_
        return out[0] if single else out

    def predict(self, features):
        """Prediction maps with negative cells clamped to 0 for scoring.

        Returns one (k, k) map for a single feature row, else (n, k, k).
        """
        rows = self.predict_linear(features)
        clamped = np.maximum(rows, 0.0)
        if clamped.ndim == 1:
            return clamped.reshape(self.k_, self.k_)
        return clamped.reshape(-1, self.k_, self.k_)

    def diagnostics(self):
        self._check_fitted()
        return {
            "rank": self.rank_,
            "residual_norm": self.residual_norm_,
            "ridge": self.ridge,
            "sv_cutoff": self.sv_cutoff,
        }


def stack_map_streams(streams):
    """Concatenate named map streams into per-frame feature rows.

    ``streams`` is an ordered mapping or sequence of (name, (n, k, k) array)
    pairs; the given order fixes the row layout. Returns (names, rows, k).
    """
    if hasattr(streams, "items"):
        streams = list(streams.items())
    else:
        streams = list(streams)
    if not streams:
        raise ValueError("need at least one map stream")
    names = tuple(name for name, _ in streams)
    arrays = []
    n = k = None
    for name, maps in streams:
        maps = as_float_array(maps, name=f"stream {name!r}")
        if maps.ndim != 3 or maps.shape[1] != maps.shape[2]:
            raise DimensionError(
                f"stream {name!r} must be (n, k, k), got shape {maps.shape}"
            )
        if n is None:
            n, k = maps.shape[0], maps.shape[1]
        elif maps.shape[0] != n:
            raise DimensionError(
                f"stream {name!r} has {maps.shape[0]} frames, "
                f"stream {names[0]!r} has {n}"
            )
        elif maps.shape[1] != k:
            raise DimensionError(
                f"stream {name!r} grid {maps.shape[1]} != {k} of stream {names[0]!r}"
            )
        arrays.append(maps.reshape(n, k * k))
    return names, np.concatenate(arrays, axis=1), k


def combine_cues(streams, trace, ridge=DEFAULT_CUE_RIDGE, kernel=None):
    """Fit a regressor over stacked prediction-map streams.

    Each stream contributes its flattened per-frame maps as features; targets
    are the smoothed fixation maps of the trace. Near-duplicate streams make
    the system ill-conditioned, hence the small default ridge.
    """
    names, rows, k = stack_map_streams(streams)
    if rows.shape[0] != len(trace):
        raise DimensionError(
            f"streams have {rows.shape[0]} frames but trace has {len(trace)}"
        )
    if kernel is None:
        kernel = gaussian_kernel()
    targets = build_targets(trace, k=k, kernel=kernel)
    model = LinearGazeRegressor(ridge=ridge).fit(rows, targets)
    model.cue_names_ = names
    return model


def save_linear_model(model, path):
    """Persist weights plus fit metadata in the binary matrix format."""
    model._check_fitted()
    extra = {
        "model": {
            "kind": "linear_gaze_regressor",
            "m": int(model.n_features_in_),
            "k": int(model.k_),
            "ridge": model.ridge,
            "sv_cutoff": model.sv_cutoff,
            "diagnostics": {
                "rank": model.rank_,
                "residual_norm": model.residual_norm_,
            },
            "cue_names": list(getattr(model, "cue_names_", [])),
        }
    }
    return save_matrix(path, model.weights_, extra=extra)


def load_linear_model(path):
    weights, header = load_matrix(path)
    meta = header.get("model")
    if not meta or meta.get("kind") != "linear_gaze_regressor":
        raise ValueError(f"{path} does not hold a linear gaze model")
    model = LinearGazeRegressor(ridge=meta["ridge"], sv_cutoff=meta["sv_cutoff"])
    model.weights_ = weights
    model.k_ = int(meta["k"])
    model.n_features_in_ = int(meta["m"])
    model.rank_ = int(meta["diagnostics"]["rank"])
    model.residual_norm_ = float(meta["diagnostics"]["residual_norm"])
    model.singular_values_ = None
    if meta.get("cue_names"):
        model.cue_names_ = tuple(meta["cue_names"])
    return model
