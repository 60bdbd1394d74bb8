"""Bottom-up cue maps computed from raw frames.

Four cues share the (k, k) map currency: a center-surround pyramid saliency,
a graph/Markov-chain saliency, spectral-residual saliency, and Horn-Schunck
optical-flow magnitude. All are simplified, documented re-implementations;
every returned map is non-negative and max-normalized to [0, 1] (or all
zero). No randomness anywhere in this module.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .core import DEFAULT_GRID_SIZE, FeatureMatrix, block_average, max_normalize
from .errors import ConvergenceError, DimensionError
from .validation import as_float_array

CUE_ORDER = ("itti", "gbvs", "sr", "of")

HS_ALPHA = 1.0
HS_ITERS = 200
HS_TOL = 1e-4
HS_RESOLUTION = (128, 128)
SR_RESOLUTION = (64, 64)
ITTI_RESOLUTION = (256, 256)
GBVS_SIGMA_FRAC = 0.15
GBVS_TOL = 1e-9
GBVS_MAX_ITERS = 10000

_KERNEL_AVG = np.array([
    [1 / 12, 1 / 6, 1 / 12],
    [1 / 6, 0.0, 1 / 6],
    [1 / 12, 1 / 6, 1 / 12],
])


class FlowField(NamedTuple):
    """Per-pixel horizontal (u) and vertical (v) displacement."""

    u: np.ndarray
    v: np.ndarray


def to_grayscale(frame):
    """Accept (H, W) or (H, W, 3) arrays; average channels if needed."""
    frame = np.asarray(frame, dtype=float)
    if frame.ndim == 3 and frame.shape[2] == 3:
        return frame.mean(axis=2)
    if frame.ndim == 2:
        return frame
    raise DimensionError(f"expected grayscale or RGB frame, got shape {frame.shape}")


def resize_bilinear(image, shape):
    """Bilinear resize to ``shape`` using edge-clamped sampling."""
    image = as_float_array(image, name="image", ndim=2)
    h, w = image.shape
    th, tw = shape
    rows = (np.arange(th) + 0.5) * h / th - 0.5
    cols = (np.arange(tw) + 0.5) * w / tw - 0.5
    grid = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(image, grid, order=1, mode="nearest")


def _derivatives(a, b):
    """Forward differences averaged over the 2x2x2 cube around each pixel.

    Positive u means motion toward larger column index, positive v toward
    larger row index.
    """
    pa = np.pad(a, ((0, 1), (0, 1)), mode="edge")
    pb = np.pad(b, ((0, 1), (0, 1)), mode="edge")
    dxa = pa[:, 1:] - pa[:, :-1]
    dxb = pb[:, 1:] - pb[:, :-1]
    fx = 0.25 * (dxa[:-1, :] + dxa[1:, :] + dxb[:-1, :] + dxb[1:, :])
    dya = pa[1:, :] - pa[:-1, :]
    dyb = pb[1:, :] - pb[:-1, :]
    fy = 0.25 * (dya[:, :-1] + dya[:, 1:] + dyb[:, :-1] + dyb[:, 1:])
    dt = pb - pa
    ft = 0.25 * (dt[:-1, :-1] + dt[1:, :-1] + dt[:-1, 1:] + dt[1:, 1:])
    return fx, fy, ft


def hs_energy(u, v, fx, fy, ft, alpha):
    """Variational energy: data term plus alpha^2-weighted smoothness term."""
    data = ((fx * u + fy * v + ft) ** 2).sum()
    gy_u, gx_u = np.gradient(u)
    gy_v, gx_v = np.gradient(v)
    smooth = (gx_u**2 + gy_u**2 + gx_v**2 + gy_v**2).sum()
    return float(data + alpha**2 * smooth)


def horn_schunck(frame_a, frame_b, alpha=HS_ALPHA, n_iters=HS_ITERS, tol=HS_TOL,
                 track_energy=False):
    """Jacobi iteration on the Horn-Schunck system.

    Stops after ``n_iters`` or once the mean per-pixel update magnitude drops
    below ``tol``. Identical frames produce exactly zero flow. When
    ``track_energy`` is set, returns (flow, energies) with the energy sampled
    every 10 iterations.
    """
    a = as_float_array(frame_a, name="frame_a", ndim=2)
    b = as_float_array(frame_b, name="frame_b", ndim=2)
    if a.shape != b.shape:
        raise DimensionError(f"frame shapes differ: {a.shape} vs {b.shape}")
    fx, fy, ft = _derivatives(a, b)
    denom = alpha**2 + fx**2 + fy**2
    u = np.zeros_like(a)
    v = np.zeros_like(a)
    energies = []
    for it in range(n_iters):
        u_avg = ndimage.convolve(u, _KERNEL_AVG, mode="constant", cval=0.0)
        v_avg = ndimage.convolve(v, _KERNEL_AVG, mode="constant", cval=0.0)
        shared = (fx * u_avg + fy * v_avg + ft) / denom
        u_new = u_avg - fx * shared
        v_new = v_avg - fy * shared
        delta = float(np.mean(np.sqrt((u_new - u) ** 2 + (v_new - v) ** 2)))
        u, v = u_new, v_new
        if track_energy and (it + 1) % 10 == 0:
            energies.append(hs_energy(u, v, fx, fy, ft, alpha))
        if delta < tol:
            break
    flow = FlowField(u, v)
    if track_energy:
        return flow, np.array(energies)
    return flow


def flow_magnitude_map(flow, k=DEFAULT_GRID_SIZE):
    """Block-averaged, max-normalized per-pixel flow magnitude."""
    magnitude = np.sqrt(flow.u**2 + flow.v**2)
    return max_normalize(block_average(magnitude, (k, k)))


def spectral_residual(frame, k=DEFAULT_GRID_SIZE):
    """Spectral-residual saliency.

    Work at 64x64: take the FFT, subtract a 3x3 box filter of the
    log-amplitude from itself, reconstruct with the original phase, square,
    smooth, and block-average to the grid. Global brightness scaling shifts
    the log spectrum by a constant, which the box-filter difference cancels.
    """
    gray = to_grayscale(frame)
    if gray.shape[0] < 32 or gray.shape[1] < 32:
        raise DimensionError(f"frame must be at least 32x32, got {gray.shape}")
    small = resize_bilinear(gray, SR_RESOLUTION)
    spectrum = np.fft.fft2(small)
    amplitude = np.abs(spectrum)
    phase = np.angle(spectrum)
    log_amp = np.log(amplitude + 1e-12)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="nearest")
    recon = np.fft.ifft2(np.exp(residual) * np.exp(1j * phase))
    saliency = ndimage.gaussian_filter(np.abs(recon) ** 2, sigma=2.5, mode="nearest")
    return max_normalize(block_average(saliency, (k, k)))


def _pyramid(channel, levels=6):
    """Gaussian pyramid: blur then decimate by 2 per level."""
    pyr = [channel]
    for _ in range(levels - 1):
        blurred = ndimage.gaussian_filter(pyr[-1], sigma=1.0, mode="nearest")
        pyr.append(blurred[::2, ::2])
    return pyr


def _peak_normalize(feature_map):
    """Range-normalize to [0, 1], then weight by (max - mean)^2 so maps with
    one dominant peak outweigh cluttered ones."""
    lo, hi = feature_map.min(), feature_map.max()
    if hi <= lo:
        return np.zeros_like(feature_map)
    scaled = (feature_map - lo) / (hi - lo)
    return scaled * (scaled.max() - scaled.mean()) ** 2


_CS_PAIRS = ((2, 4), (2, 5), (3, 5))


def itti_lite(frame, k=DEFAULT_GRID_SIZE):
    """Center-surround pyramid saliency over intensity and two color-opponency
    channels, with per-map peak normalization."""
    frame = np.asarray(frame, dtype=float)
    gray = to_grayscale(frame)
    if gray.shape[0] < 64 or gray.shape[1] < 64:
        raise DimensionError(f"frame must be at least 64x64, got {gray.shape}")
    if frame.ndim == 3:
        r, g, b = frame[:, :, 0], frame[:, :, 1], frame[:, :, 2]
        channels = [gray, r - g, b - (r + g) / 2.0]
    else:
        channels = [gray]

    acc = None
    for channel in channels:
        level0 = resize_bilinear(channel, ITTI_RESOLUTION)
        pyr = _pyramid(level0, levels=6)
        for c, s in _CS_PAIRS:
            surround = resize_bilinear(pyr[s], pyr[c].shape)
            diff = _peak_normalize(np.abs(pyr[c] - surround))
            diff = resize_bilinear(diff, pyr[2].shape)
            acc = diff if acc is None else acc + diff
    return max_normalize(block_average(acc, (k, k)))


def gbvs_transition_matrix(cell_values, sigma):
    """Row-stochastic transition matrix over grid cells.

    Edge weight a->b is |v(a) - v(b)| * exp(-d(a,b)^2 / (2 sigma^2)). Returns
    None when every weight is zero (constant input).
    """
    values = as_float_array(cell_values, name="cell values", ndim=2)
    k_rows, k_cols = values.shape
    flat = values.ravel()
    rows, cols = np.divmod(np.arange(flat.size), k_cols)
    d2 = (rows[:, None] - rows[None, :]) ** 2 + (cols[:, None] - cols[None, :]) ** 2
    weights = np.abs(flat[:, None] - flat[None, :]) * np.exp(-d2 / (2.0 * sigma**2))
    sums = weights.sum(axis=1)
    if not sums.any():
        return None
    # zero rows only occur for constant inputs; guard anyway
    safe = np.where(sums > 0, sums, 1.0)
    matrix = weights / safe[:, None]
    matrix[sums == 0] = 1.0 / flat.size
    return matrix


def stationary_distribution(matrix, tol=GBVS_TOL, max_iters=GBVS_MAX_ITERS, start=None):
    """Power iteration for the stationary distribution of a stochastic matrix.

    Iterates the lazy chain (I + P) / 2, which has the same stationary
    distribution but cannot oscillate on (near-)periodic graphs; the
    convergence test is ||pi P - pi||_1 < tol against the original matrix.
    """
    n = matrix.shape[0]
    if start is None:
        pi = np.full(n, 1.0 / n)
    else:
        start = as_float_array(start, name="start vector", ndim=1)
        if start.min() < 0 or start.sum() <= 0:
            raise ValueError("start vector must be non-negative with positive sum")
        pi = start / start.sum()
    residual = np.inf
    for _ in range(max_iters):
        stepped = pi @ matrix
        residual = float(np.abs(stepped - pi).sum())
        if residual < tol:
            return pi
        pi = 0.5 * (pi + stepped)
        pi /= pi.sum()
    raise ConvergenceError(
        f"power iteration did not reach tol {tol} in {max_iters} iterations",
        residual=residual,
    )


def gbvs_lite(frame, k=DEFAULT_GRID_SIZE, sigma_frac=GBVS_SIGMA_FRAC,
              tol=GBVS_TOL, max_iters=GBVS_MAX_ITERS):
    """Markov-chain saliency: the stationary distribution of a fully connected
    dissimilarity-weighted graph over grid cells. Constant frames fall back to
    a uniform map."""
    gray = to_grayscale(frame)
    if gray.shape[0] < 64 or gray.shape[1] < 64:
        raise DimensionError(f"frame must be at least 64x64, got {gray.shape}")
    cells = block_average(gray, (k, k))
    matrix = gbvs_transition_matrix(cells, sigma=sigma_frac * k)
    if matrix is None:
        return np.full((k, k), 1.0 / (k * k))
    pi = stationary_distribution(matrix, tol=tol, max_iters=max_iters)
    return max_normalize(pi.reshape(k, k))


@dataclass(frozen=True)
class CueStack:
    """Per-frame bottom-up cue maps in the fixed order ``CUE_ORDER``."""

    maps: np.ndarray  # (n_frames, n_cues, k, k)
    names: tuple = CUE_ORDER

    @property
    def n_frames(self):
        return self.maps.shape[0]

    @property
    def k(self):
        return self.maps.shape[2]

    def cue(self, name):
        return self.maps[:, self.names.index(name)]

    def feature_matrix(self):
        """Flatten to (n, len(names) * k^2) rows in cue order."""
        n = self.maps.shape[0]
        return FeatureMatrix(self.maps.reshape(n, -1), provenance="cue_stack")


def _frame_cues(args):
    index, frame, prev_frame, k = args
    gray = to_grayscale(frame)
    out = {}
    for name in ("itti", "gbvs", "sr"):
        func = {"itti": itti_lite, "gbvs": gbvs_lite, "sr": spectral_residual}[name]
        try:
            out[name] = func(frame, k=k)
        except Exception as exc:
            raise RuntimeError(f"cue {name!r} failed on frame {index}: {exc}") from exc
    if prev_frame is None:
        out["of"] = np.zeros((k, k))
    else:
        try:
            a = resize_bilinear(to_grayscale(prev_frame), HS_RESOLUTION)
            b = resize_bilinear(gray, HS_RESOLUTION)
            out["of"] = flow_magnitude_map(horn_schunck(a, b), k=k)
        except Exception as exc:
            raise RuntimeError(f"cue 'of' failed on frame {index}: {exc}") from exc
    return np.stack([out[name] for name in CUE_ORDER])


def build_cue_stack(frames, k=DEFAULT_GRID_SIZE, n_jobs=1):
    """Compute all four cue maps for every frame.

    Needs at least 2 frames (flow uses consecutive pairs; frame 0 gets a zero
    flow map). Frames are processed independently, optionally in parallel;
    the output order never depends on the job count.
    """
    frames = list(frames)
    if len(frames) < 2:
        raise ValueError(f"need at least 2 frames for the cue stack, got {len(frames)}")
    jobs = [(i, frame, frames[i - 1] if i > 0 else None, k)
            for i, frame in enumerate(frames)]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            per_frame = list(pool.map(_frame_cues, jobs))
    else:
        per_frame = [_frame_cues(job) for job in jobs]
    return CueStack(np.stack(per_frame))
