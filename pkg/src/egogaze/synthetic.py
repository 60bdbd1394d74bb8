"""Synthetic data generators for desk-scale runs, the self-test, and tests.

Everything here is seeded and deterministic.
"""

import numpy as np
from scipy import ndimage

from .core import (
    DEFAULT_GRID_SIZE,
    FixationRecord,
    FixationTrace,
    gaussian_kernel,
    rasterize_fixation,
    smooth_map,
)


def gaussian_gaze_trace(n_frames, center=(0.5, 0.5), spread=0.12, seed=0,
                        sequence_id="synthetic", subject_id="s0"):
    """Gaze points sampled around a center, clipped to the unit square."""
    rng = np.random.default_rng(seed)
    xs = np.clip(rng.normal(center[0], spread, size=n_frames), 0.0, 1.0)
    ys = np.clip(rng.normal(center[1], spread, size=n_frames), 0.0, 1.0)
    records = tuple(
        FixationRecord(i, float(xs[i]), float(ys[i])) for i in range(n_frames)
    )
    return FixationTrace(sequence_id, subject_id, records)


def textured_frame(shape=(128, 128), seed=0, smooth_sigma=2.0, scale=255.0):
    """Smooth random texture with healthy gradients (for optical flow).

    Periodic (wrap-filtered), so circular shifts have no seam. ``scale`` sets
    the intensity range; grayscale-like contrast keeps the Horn-Schunck data
    term dominant at alpha = 1.
    """
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(shape)
    frame = ndimage.gaussian_filter(noise, sigma=smooth_sigma, mode="wrap")
    frame -= frame.min()
    peak = frame.max()
    return frame * (scale / peak) if peak > 0 else frame


def shifted_frame(frame, dx=1, dy=0):
    """Circularly shift a frame by (dx, dy) pixels (x = columns, y = rows)."""
    return np.roll(np.roll(frame, dy, axis=0), dx, axis=1)


def popout_frame(shape=(64, 64), patch_size=10, seed=0, noise_level=0.1,
                 patch_value=1.0):
    """Low-contrast noise background with one bright square patch.

    Returns (frame, (row0, col0, row1, col1)) with the patch bounds
    half-open. The patch placement is seeded.
    """
    rng = np.random.default_rng(seed)
    frame = rng.uniform(0.0, noise_level, size=shape)
    row0 = int(rng.integers(0, shape[0] - patch_size + 1))
    col0 = int(rng.integers(0, shape[1] - patch_size + 1))
    frame[row0 : row0 + patch_size, col0 : col0 + patch_size] = patch_value
    return frame, (row0, col0, row0 + patch_size, col0 + patch_size)


def moving_patch_frames(n_frames=4, shape=(128, 128), patch_size=16, seed=0,
                        step=3):
    """Static textured background with one patch translating left to right."""
    rng = np.random.default_rng(seed)
    background = textured_frame(shape, seed=seed) * 0.3
    row0 = shape[0] // 2 - patch_size // 2
    patch = 0.7 + 0.3 * rng.random((patch_size, patch_size))
    frames = []
    for t in range(n_frames):
        frame = background.copy()
        col0 = 10 + t * step
        frame[row0 : row0 + patch_size, col0 : col0 + patch_size] = patch
        frames.append(frame)
    return frames


def symbol_task(n_frames=2000, n_symbols=5, k=DEFAULT_GRID_SIZE, seed=0,
                run_length=8, feature_scale=5.0):
    """Learnable sequence task: the fixated cell is a fixed function of a
    one-hot feature.

    Symbols arrive in dwell runs (uniform in [run_length/2, 2*run_length)),
    mimicking gaze lingering on a target for several frames. Returns
    (features (n, n_symbols), cells (n,), cell_for_symbol).
    """
    rng = np.random.default_rng(seed)
    symbols = []
    while len(symbols) < n_frames:
        s = int(rng.integers(0, n_symbols))
        symbols.extend([s] * int(rng.integers(run_length // 2, run_length * 2)))
    symbols = np.array(symbols[:n_frames])
    # spread target cells over the grid so they are well separated
    cell_for_symbol = np.linspace(0, k * k - 1, n_symbols, dtype=int)
    features = np.zeros((n_frames, n_symbols))
    features[np.arange(n_frames), symbols] = feature_scale
    return features, cell_for_symbol[symbols], cell_for_symbol


def jittered_oracle_maps(trace, k=DEFAULT_GRID_SIZE, jitter=0.35, seed=0,
                         kernel=None):
    """Imperfect predictor: smoothed one-hot at the gaze cell mixed with a
    seeded random map. Decent but beatable, unlike the exact oracle."""
    rng = np.random.default_rng(seed)
    if kernel is None:
        kernel = gaussian_kernel()
    maps = np.zeros((len(trace), k, k))
    for i, rec in enumerate(trace.records):
        noise = rng.random((k, k))
        if rec.valid:
            signal = smooth_map(rasterize_fixation(rec.x, rec.y, k), kernel)
            peak = signal.max()
            if peak > 0:
                signal = signal / peak
            maps[i] = (1.0 - jitter) * signal + jitter * noise
        else:
            maps[i] = noise
    return maps


TASK_CENTERS = (
    (0.25, 0.25),
    (0.75, 0.25),
    (0.5, 0.55),
    (0.25, 0.8),
    (0.75, 0.8),
)


def five_task_suite(n_frames=300, seed=0, k=DEFAULT_GRID_SIZE, spread=0.08,
                    jitter=0.35):
    """Five sequences with distinct gaze statistics plus imperfect per-frame
    prediction maps.

    Returns a list of dicts: {"id", "trace", "maps"}.
    """
    suite = []
    for i, center in enumerate(TASK_CENTERS):
        trace = gaussian_gaze_trace(
            n_frames, center=center, spread=spread, seed=seed * 100 + i,
            sequence_id=f"task{i}", subject_id="s0",
        )
        maps = jittered_oracle_maps(trace, k=k, jitter=jitter, seed=seed * 100 + 50 + i)
        suite.append({"id": f"task{i}", "trace": trace, "maps": maps})
    return suite


def multi_subject_traces(n_subjects=4, n_frames=150, center=(0.45, 0.55),
                         spread=0.1, subject_offset=0.03, seed=0,
                         sequence_id="shared"):
    """Subjects sharing a gaze prior with small per-subject offsets."""
    rng = np.random.default_rng(seed)
    traces = {}
    for s in range(n_subjects):
        offset = rng.normal(0.0, subject_offset, size=2)
        traces[f"s{s}"] = gaussian_gaze_trace(
            n_frames,
            center=(float(np.clip(center[0] + offset[0], 0.05, 0.95)),
                    float(np.clip(center[1] + offset[1], 0.05, 0.95))),
            spread=spread,
            seed=seed * 100 + s,
            sequence_id=sequence_id,
            subject_id=f"s{s}",
        )
    return traces
