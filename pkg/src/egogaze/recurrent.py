"""Stacked-GRU gaze predictor.

Gate equations follow the convention where the update gate carries the OLD
hidden state:

    z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
    r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
    h_t = z_t * h_{t-1} + (1 - z_t) * tanh(x_t W_h + (r_t * h_{t-1}) U_h + b_h)

Three layers are stacked (each layer's input is the previous layer's hidden
state) and a dense readout maps the top hidden state to k^2 logits; softmax
over cells gives the per-frame probability map. Training is softmax
cross-entropy against the fixated cell with Adam over truncated BPTT windows:
the hidden state is carried across windows, gradients are cut at window
boundaries.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .core import (
    DEFAULT_GRID_SIZE,
    FeatureMatrix,
    FixationTrace,
    fixation_cells,
    standardize_features,
)
from .errors import ConvergenceError, DimensionError
from .io import load_matrix, save_matrix
from .validation import as_float_array

HIDDEN_SIZE = 20
N_LAYERS = 3
BPTT_WINDOW = 6
LEARNING_RATE = 1e-4
EPOCHS = 25


@dataclass
class GruLayerParams:
    """Weights of one GRU layer: input (W), recurrent (U) and bias (b) per gate."""

    w_z: np.ndarray
    u_z: np.ndarray
    b_z: np.ndarray
    w_r: np.ndarray
    u_r: np.ndarray
    b_r: np.ndarray
    w_h: np.ndarray
    u_h: np.ndarray
    b_h: np.ndarray

    def tensors(self):
        return [self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r,
                self.w_h, self.u_h, self.b_h]


_LAYER_TENSOR_NAMES = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")


@dataclass
class GruParams:
    """Full parameter set: stacked layers plus the dense readout."""

    layers: list
    readout_w: np.ndarray
    readout_b: np.ndarray

    @property
    def input_dim(self):
        return self.layers[0].w_z.shape[0]

    @property
    def hidden_size(self):
        return self.layers[0].u_z.shape[0]

    @property
    def n_outputs(self):
        return self.readout_b.shape[0]

    def tensors(self):
        out = []
        for layer in self.layers:
            out.extend(layer.tensors())
        out.extend([self.readout_w, self.readout_b])
        return out

    def tensor_names(self):
        names = []
        for i in range(len(self.layers)):
            names.extend(f"layer{i}.{n}" for n in _LAYER_TENSOR_NAMES)
        names.extend(["readout.w", "readout.b"])
        return names

    def copy(self):
        layers = [GruLayerParams(*[t.copy() for t in layer.tensors()])
                  for layer in self.layers]
        return GruParams(layers, self.readout_w.copy(), self.readout_b.copy())


def init_gru_params(input_dim, n_outputs, hidden_size=HIDDEN_SIZE,
                    n_layers=N_LAYERS, rng=None):
    """Uniform(-s, s) weight init with s = 1/sqrt(fan_in); biases start at 0."""
    rng = rng or np.random.default_rng(0)

    def uniform(fan_in, shape):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape)

    layers = []
    dim = input_dim
    for _ in range(n_layers):
        layers.append(GruLayerParams(
            w_z=uniform(dim, (dim, hidden_size)),
            u_z=uniform(hidden_size, (hidden_size, hidden_size)),
            b_z=np.zeros(hidden_size),
            w_r=uniform(dim, (dim, hidden_size)),
            u_r=uniform(hidden_size, (hidden_size, hidden_size)),
            b_r=np.zeros(hidden_size),
            w_h=uniform(dim, (dim, hidden_size)),
            u_h=uniform(hidden_size, (hidden_size, hidden_size)),
            b_h=np.zeros(hidden_size),
        ))
        dim = hidden_size
    readout_w = uniform(hidden_size, (hidden_size, n_outputs))
    readout_b = np.zeros(n_outputs)
    return GruParams(layers, readout_w, readout_b)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gru_cell_forward(x, h_prev, layer):
    """One GRU step. Returns (h_new, cache) with the activations needed for
    the backward pass."""
    x = np.asarray(x, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    if x.shape[-1] != layer.w_z.shape[0]:
        raise DimensionError(
            f"input dim {x.shape[-1]} != layer input dim {layer.w_z.shape[0]}"
        )
    if h_prev.shape[-1] != layer.u_z.shape[0]:
        raise DimensionError(
            f"hidden dim {h_prev.shape[-1]} != layer hidden dim {layer.u_z.shape[0]}"
        )
    z = sigmoid(x @ layer.w_z + h_prev @ layer.u_z + layer.b_z)
    r = sigmoid(x @ layer.w_r + h_prev @ layer.u_r + layer.b_r)
    c = np.tanh(x @ layer.w_h + (r * h_prev) @ layer.u_h + layer.b_h)
    h = z * h_prev + (1.0 - z) * c
    cache = {"x": x, "h_prev": h_prev, "z": z, "r": r, "c": c}
    return h, cache


def _gru_cell_backward(dh, cache, layer, grads):
    """Backprop one GRU step; accumulates into ``grads`` (same layout as the
    layer) and returns (dh_prev, dx)."""
    x, h_prev, z, r, c = cache["x"], cache["h_prev"], cache["z"], cache["r"], cache["c"]
    dz = dh * (h_prev - c)
    dc = dh * (1.0 - z)
    da_c = dc * (1.0 - c**2)
    grads.w_h += np.outer(x, da_c)
    grads.u_h += np.outer(r * h_prev, da_c)
    grads.b_h += da_c
    d_rh = da_c @ layer.u_h.T
    dr = d_rh * h_prev
    dh_prev = dh * z + d_rh * r
    da_z = dz * z * (1.0 - z)
    grads.w_z += np.outer(x, da_z)
    grads.u_z += np.outer(h_prev, da_z)
    grads.b_z += da_z
    dh_prev = dh_prev + da_z @ layer.u_z.T
    da_r = dr * r * (1.0 - r)
    grads.w_r += np.outer(x, da_r)
    grads.u_r += np.outer(h_prev, da_r)
    grads.b_r += da_r
    dh_prev = dh_prev + da_r @ layer.u_r.T
    dx = da_c @ layer.w_h.T + da_z @ layer.w_z.T + da_r @ layer.w_r.T
    return dh_prev, dx


def _log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(_log_softmax(logits))


def cross_entropy(logits, cells):
    """Mean -log softmax probability of the target cell(s).

    ``cells`` may be a scalar index or an array aligned with logit rows;
    entries < 0 mark invalid frames and are excluded from the mean.
    """
    logits = np.asarray(logits, dtype=float)
    if logits.ndim == 1:
        logits = logits[None, :]
        cells = np.array([cells], dtype=int)
    else:
        cells = np.asarray(cells, dtype=int)
    if cells.shape[0] != logits.shape[0]:
        raise DimensionError(f"{cells.shape[0]} targets for {logits.shape[0]} logit rows")
    keep = cells >= 0
    if not keep.any():
        raise ValueError("no valid target cells")
    if (cells[keep] >= logits.shape[1]).any():
        raise IndexError("target cell outside the output range")
    log_p = _log_softmax(logits[keep])
    return float(-log_p[np.arange(keep.sum()), cells[keep]].mean())


def forward_sequence(params, xs, h0=None):
    """Run the full stack over a sequence.

    Returns (logits, probs): both (T, k^2); each probability row sums to 1.
    """
    xs = as_float_array(xs, name="features")
    if xs.ndim == 1:
        xs = xs[None, :]
    hidden = _initial_hidden(params) if h0 is None else [h.copy() for h in h0]
    logits = np.empty((xs.shape[0], params.n_outputs))
    for t in range(xs.shape[0]):
        inp = xs[t]
        for li, layer in enumerate(params.layers):
            hidden[li], _ = gru_cell_forward(inp, hidden[li], layer)
            inp = hidden[li]
        logits[t] = inp @ params.readout_w + params.readout_b
    return logits, softmax(logits)


def _initial_hidden(params):
    return [np.zeros(params.hidden_size) for _ in params.layers]


def _zero_grads(params):
    layers = [GruLayerParams(*[np.zeros_like(t) for t in layer.tensors()])
              for layer in params.layers]
    return GruParams(layers, np.zeros_like(params.readout_w),
                     np.zeros_like(params.readout_b))


def _window_pass(params, xs, cells, hidden):
    """Forward + backward over one BPTT window.

    ``hidden`` is the carried-in state (modified to the carried-out state).
    Returns (loss_sum, n_valid, grads); grads are averaged over the window's
    valid frames. Gradient flow stops at the window's first frame.
    """
    T = xs.shape[0]
    caches = []
    logits = np.empty((T, params.n_outputs))
    for t in range(T):
        inp = xs[t]
        step = []
        for li, layer in enumerate(params.layers):
            hidden[li], cache = gru_cell_forward(inp, hidden[li], layer)
            inp = hidden[li]
            step.append(cache)
        caches.append((step, inp))
        logits[t] = inp @ params.readout_w + params.readout_b

    valid = cells >= 0
    n_valid = int(valid.sum())
    if n_valid == 0:
        return 0.0, 0, None
    probs = softmax(logits)
    log_p = _log_softmax(logits)
    loss_sum = float(-log_p[valid, cells[valid]].sum())

    grads = _zero_grads(params)
    dlogits = probs.copy()
    dlogits[np.arange(T), np.maximum(cells, 0)] -= 1.0
    dlogits[~valid] = 0.0
    dlogits /= n_valid

    n_layers = len(params.layers)
    dh_rec = [np.zeros(params.hidden_size) for _ in range(n_layers)]
    for t in range(T - 1, -1, -1):
        step, h_top = caches[t]
        grads.readout_w += np.outer(h_top, dlogits[t])
        grads.readout_b += dlogits[t]
        d_above = dlogits[t] @ params.readout_w.T
        for li in range(n_layers - 1, -1, -1):
            dh = d_above + dh_rec[li]
            dh_rec[li], d_above = _gru_cell_backward(dh, step[li], params.layers[li], grads.layers[li])
    return loss_sum, n_valid, grads


class AdamOptimizer:
    """Adam with bias correction over a fixed list of parameter arrays."""

    def __init__(self, tensors, learning_rate=LEARNING_RATE, beta1=0.9,
                 beta2=0.999, epsilon=1e-8):
        self.tensors = tensors
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p) for p in tensors]
        self.v = [np.zeros_like(p) for p in tensors]

    def step(self, grad_tensors):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(self.tensors, grad_tensors)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g**2
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def gradient_check(params, xs, cells, step=1e-5):
    """Compare analytic BPTT gradients with central finite differences.

    Meant for tiny instances. Returns the max relative error over every
    entry of every parameter tensor.
    """
    xs = as_float_array(xs, name="features")
    cells = np.asarray(cells, dtype=int)
    hidden = _initial_hidden(params)
    _, n_valid, grads = _window_pass(params, xs, cells, hidden)
    if grads is None:
        raise ValueError("gradient check needs at least one valid frame")

    def loss_at():
        logits, _ = forward_sequence(params, xs)
        return cross_entropy(logits, cells)

    worst = 0.0
    for analytic, tensor in zip(grads.tensors(), params.tensors()):
        flat = tensor.reshape(-1)
        a_flat = analytic.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = loss_at()
            flat[idx] = orig - step
            down = loss_at()
            flat[idx] = orig
            numeric = (up - down) / (2 * step)
            denom = max(abs(a_flat[idx]), abs(numeric), 1e-4)
            worst = max(worst, abs(a_flat[idx] - numeric) / denom)
    return worst


class GruGazePredictor(BaseEstimator):
    """Recurrent fixation predictor: 3 stacked GRU layers and a softmax readout.

    Defaults (hidden size 20, window 6, learning rate 1e-4, 25 epochs, Adam)
    are the reference training recipe; the dims are configurable so tiny
    instances can be gradient-checked.
    """

    def __init__(self, k=DEFAULT_GRID_SIZE, hidden_size=HIDDEN_SIZE,
                 n_layers=N_LAYERS, learning_rate=LEARNING_RATE, epochs=EPOCHS,
                 bptt_window=BPTT_WINDOW, beta1=0.9, beta2=0.999,
                 epsilon=1e-8, seed=0, standardize=False):
        self.k = k
        self.hidden_size = hidden_size
        self.n_layers = n_layers
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.bptt_window = bptt_window
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.seed = seed
        self.standardize = standardize

    def _target_cells(self, y, n):
        if isinstance(y, FixationTrace):
            if len(y) != n:
                raise DimensionError(f"{n} feature rows vs {len(y)} trace records")
            return fixation_cells(y, self.k)
        cells = np.asarray(y, dtype=int)
        if cells.shape != (n,):
            raise DimensionError(f"target cells must have shape ({n},), got {cells.shape}")
        if (cells >= self.k * self.k).any():
            raise IndexError("target cell outside the grid")
        return cells

    def fit(self, features, y):
        """Train on one sequence; ``y`` is a FixationTrace aligned with the
        feature rows or an int array of cell indices (-1 = invalid frame)."""
        if self.bptt_window < 1:
            raise ValueError(f"bptt_window must be >= 1, got {self.bptt_window}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if isinstance(features, FeatureMatrix):
            features = features.data
        xs = as_float_array(features, name="features", ndim=2)
        cells = self._target_cells(y, xs.shape[0])
        if self.standardize:
            xs, self.feature_mean_, self.feature_std_ = standardize_features(xs)
        else:
            self.feature_mean_ = None
            self.feature_std_ = None

        rng = np.random.default_rng(self.seed)
        params = init_gru_params(xs.shape[1], self.k * self.k,
                                 hidden_size=self.hidden_size,
                                 n_layers=self.n_layers, rng=rng)
        optimizer = AdamOptimizer(params.tensors(), self.learning_rate,
                                  self.beta1, self.beta2, self.epsilon)
        loss_curve = []
        for epoch in range(self.epochs):
            hidden = _initial_hidden(params)
            loss_total = 0.0
            n_total = 0
            for start in range(0, xs.shape[0], self.bptt_window):
                stop = min(start + self.bptt_window, xs.shape[0])
                loss_sum, n_valid, grads = _window_pass(
                    params, xs[start:stop], cells[start:stop], hidden)
                if n_valid == 0:
                    continue
                if not np.isfinite(loss_sum):
                    grad_norm = float(np.sqrt(sum((g**2).sum() for g in grads.tensors())))
                    raise ConvergenceError(
                        f"non-finite loss at epoch {epoch}, window start {start} "
                        f"(grad norm {grad_norm:.3g})"
                    )
                optimizer.step(grads.tensors())
                loss_total += loss_sum
                n_total += n_valid
            loss_curve.append(loss_total / n_total)
        self.params_ = params
        self.loss_curve_ = np.array(loss_curve)
        self.n_features_in_ = xs.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("GruGazePredictor is not fitted")

    def predict_proba(self, features):
        """Per-frame probability maps, shape (n, k, k); each sums to 1."""
        self._check_fitted()
        if isinstance(features, FeatureMatrix):
            features = features.data
        xs = as_float_array(features, name="features", ndim=2)
        if xs.shape[1] != self.n_features_in_:
            raise DimensionError(
                f"expected {self.n_features_in_} features, got {xs.shape[1]}"
            )
        if self.feature_mean_ is not None:
            xs = (xs - self.feature_mean_) / self.feature_std_
        _, probs = forward_sequence(self.params_, xs)
        return probs.reshape(-1, self.k, self.k)

    def predict(self, features):
        """Alias of predict_proba: the probability map is the prediction."""
        return self.predict_proba(features)


def save_gru_model(model, path):
    """Checkpoint: tensors concatenated f32le, order documented in the header."""
    model._check_fitted()
    params = model.params_
    tensors = params.tensors()
    names = params.tensor_names()
    payload = np.concatenate([t.ravel() for t in tensors])[None, :]
    extra = {
        "model": {
            "kind": "gru_gaze_predictor",
            "k": int(model.k),
            "input_dim": int(model.n_features_in_),
            "hidden_size": int(model.hidden_size),
            "n_layers": int(model.n_layers),
            "seed": model.seed,
            "epochs_trained": int(len(model.loss_curve_)),
            "config": {
                "learning_rate": model.learning_rate,
                "epochs": model.epochs,
                "bptt_window": model.bptt_window,
                "beta1": model.beta1,
                "beta2": model.beta2,
                "epsilon": model.epsilon,
                "standardize": bool(model.standardize),
            },
            "feature_mean": (None if model.feature_mean_ is None
                             else [float(v) for v in model.feature_mean_]),
            "feature_std": (None if model.feature_std_ is None
                            else [float(v) for v in model.feature_std_]),
            "tensors": [
                {"name": n, "shape": list(t.shape)} for n, t in zip(names, tensors)
            ],
        }
    }
    return save_matrix(path, payload, extra=extra)


def load_gru_model(path):
    payload, header = load_matrix(path)
    meta = header.get("model")
    if not meta or meta.get("kind") != "gru_gaze_predictor":
        raise ValueError(f"{path} does not hold a GRU checkpoint")
    cfg = meta["config"]
    model = GruGazePredictor(
        k=int(meta["k"]), hidden_size=int(meta["hidden_size"]),
        n_layers=int(meta["n_layers"]), learning_rate=cfg["learning_rate"],
        epochs=cfg["epochs"], bptt_window=cfg["bptt_window"],
        beta1=cfg["beta1"], beta2=cfg["beta2"], epsilon=cfg["epsilon"],
        seed=meta["seed"], standardize=cfg.get("standardize", False),
    )
    mean = meta.get("feature_mean")
    std = meta.get("feature_std")
    model.feature_mean_ = None if mean is None else np.asarray(mean, dtype=float)
    model.feature_std_ = None if std is None else np.asarray(std, dtype=float)
    flat = payload.ravel()
    tensors = []
    offset = 0
    for spec_entry in meta["tensors"]:
        shape = tuple(spec_entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        tensors.append(flat[offset : offset + size].reshape(shape))
        offset += size
    if offset != flat.size:
        raise DimensionError(f"{path}: checkpoint payload size mismatch")
    layers = []
    per_layer = len(_LAYER_TENSOR_NAMES)
    for li in range(int(meta["n_layers"])):
        layers.append(GruLayerParams(*tensors[li * per_layer : (li + 1) * per_layer]))
    model.params_ = GruParams(layers, tensors[-2], tensors[-1])
    model.n_features_in_ = int(meta["input_dim"])
    model.loss_curve_ = np.array([])
    return model
