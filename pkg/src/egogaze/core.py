"""Domain types and grid-map primitives.

Attention maps are plain ``(k, k)`` float arrays (default ``k = 20``); all
other modules exchange them directly. This module owns fixation traces,
feature matrices, fixation rasterization, Gaussian smoothing, target-matrix
construction, and the built-in frame descriptor used at desk scale in place
of externally computed CNN features.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionError, FrameGapError
from .validation import as_float_array, as_grid_map, check_unit_coords

DEFAULT_GRID_SIZE = 20
DEFAULT_KERNEL_WIDTH = 5
DEFAULT_KERNEL_SIGMA = 1.0

#: Allowed origins of a feature matrix.
PROVENANCES = ("ingested", "builtin_descriptor", "cue_stack")


@dataclass(frozen=True)
class FixationRecord:
    """One gaze sample: frame index plus normalized image coordinates."""

    frame_index: int
    x: float
    y: float
    valid: bool = True


@dataclass(frozen=True)
class FixationTrace:
    """Per-frame gaze records for one subject on one sequence.

    Frame indices are strictly increasing and each frame carries exactly one
    record. Coordinates of valid records lie in [0, 1].
    """

    sequence_id: str
    subject_id: str
    records: tuple

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        if not records:
            raise ValueError("fixation trace must contain at least one record")
        last = None
        for rec in records:
            if last is not None and rec.frame_index <= last:
                raise ValueError(
                    f"frame indices must be strictly increasing "
                    f"({rec.frame_index} after {last})"
                )
            if rec.frame_index < 0:
                raise ValueError(f"negative frame index {rec.frame_index}")
            last = rec.frame_index
            if rec.valid:
                check_unit_coords(rec.x, rec.y)

    def __len__(self):
        return len(self.records)

    @property
    def n_frames(self):
        return len(self.records)

    def valid_mask(self):
        return np.array([rec.valid for rec in self.records], dtype=bool)

    def frame_indices(self):
        return np.array([rec.frame_index for rec in self.records], dtype=int)


@dataclass(frozen=True)
class FeatureMatrix:
    """n x m matrix of per-frame feature vectors; rows align with frames."""

    data: np.ndarray
    provenance: str = "ingested"

    def __post_init__(self):
        arr = as_float_array(self.data, name="feature matrix", ndim=2)
        object.__setattr__(self, "data", arr)
        if self.provenance not in PROVENANCES:
            raise ValueError(
                f"unknown provenance {self.provenance!r}, expected one of {PROVENANCES}"
            )

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def m(self):
        return self.data.shape[1]


def gaussian_kernel(width=DEFAULT_KERNEL_WIDTH, sigma=DEFAULT_KERNEL_SIGMA):
    """Isotropic 2-D Gaussian kernel, normalized to sum 1. Width must be odd."""
    if width < 1 or width % 2 == 0:
        raise ValueError(f"kernel width must be odd and positive, got {width}")
    if sigma <= 0:
        raise ValueError(f"kernel sigma must be positive, got {sigma}")
    half = width // 2
    coords = np.arange(-half, half + 1, dtype=float)
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def rasterize_fixation(x, y, k=DEFAULT_GRID_SIZE):
    """One-hot (k, k) map for a normalized gaze point.

    Cell index is floor(coord * k), clamped to k - 1 so that the boundary
    value 1.0 lands in the last cell.
    """
    check_unit_coords(x, y)
    if k < 2:
        raise ValueError(f"grid size must be >= 2, got {k}")
    row = min(int(np.floor(y * k)), k - 1)
    col = min(int(np.floor(x * k)), k - 1)
    out = np.zeros((k, k))
    out[row, col] = 1.0
    return out


def fixation_cell(x, y, k=DEFAULT_GRID_SIZE):
    """(row, col) of the cell a normalized gaze point falls into."""
    check_unit_coords(x, y)
    return min(int(np.floor(y * k)), k - 1), min(int(np.floor(x * k)), k - 1)


def smooth_map(grid, kernel=None):
    """Convolve a map with a kernel using zero-padded borders.

    Mass leaving the grid is lost, so a blob near the edge sums to less
    than an interior one.
    """
    grid = as_grid_map(grid, name="map")
    if kernel is None:
        kernel = gaussian_kernel()
    kernel = as_float_array(kernel, name="kernel", ndim=2)
    return ndimage.convolve(grid, kernel, mode="constant", cval=0.0)


def fixation_cells(trace, k=DEFAULT_GRID_SIZE):
    """Linear cell index per record (row-major); -1 for invalid records."""
    cells = np.full(len(trace), -1, dtype=int)
    for i, rec in enumerate(trace.records):
        if rec.valid:
            row, col = fixation_cell(rec.x, rec.y, k)
            cells[i] = row * k + col
    return cells


def _check_contiguous(trace):
    idx = trace.frame_indices()
    expected = np.arange(idx[0], idx[-1] + 1)
    missing = sorted(set(expected.tolist()) - set(idx.tolist()))
    if missing:
        raise FrameGapError(
            f"trace {trace.sequence_id!r} is missing frames {missing}", missing
        )


def build_targets(trace, k=DEFAULT_GRID_SIZE, kernel=None):
    """Stack linearized smoothed fixation maps into an (n, k*k) target matrix.

    Row t is smooth(one-hot(g_t)) flattened row-major. The trace must cover a
    contiguous frame range with one valid record per frame.
    """
    _check_contiguous(trace)
    invalid = [rec.frame_index for rec in trace.records if not rec.valid]
    if invalid:
        raise ValueError(
            f"targets need one valid record per frame; invalid frames: {invalid}"
        )
    if kernel is None:
        kernel = gaussian_kernel()
    rows = np.empty((len(trace), k * k))
    for i, rec in enumerate(trace.records):
        rows[i] = smooth_map(rasterize_fixation(rec.x, rec.y, k), kernel).ravel()
    return rows


def normalize_sum(grid):
    """Scale a non-negative map so it sums to 1. All-zero maps are rejected."""
    grid = as_grid_map(grid, name="map", nonnegative=True)
    total = grid.sum()
    if total <= 0:
        raise ValueError("cannot sum-normalize an all-zero map")
    return grid / total


def max_normalize(grid):
    """Scale a non-negative map to [0, 1] by its maximum; zero maps pass through."""
    grid = np.asarray(grid, dtype=float)
    peak = grid.max() if grid.size else 0.0
    if peak <= 0:
        return np.zeros_like(grid)
    return grid / peak


def block_average(image, shape):
    """Average an image down to ``shape`` blocks; block edges at floor(i*H/kh).

    Handles sizes that are not exact multiples of the target shape.
    """
    image = as_float_array(image, name="image", ndim=2)
    kh, kw = shape
    h, w = image.shape
    if kh > h or kw > w:
        raise DimensionError(
            f"cannot block-average {image.shape} image down to {shape}"
        )
    row_edges = (np.arange(kh + 1) * h) // kh
    col_edges = (np.arange(kw + 1) * w) // kw
    out = np.empty((kh, kw))
    for i in range(kh):
        band = image[row_edges[i] : row_edges[i + 1]]
        for j in range(kw):
            out[i, j] = band[:, col_edges[j] : col_edges[j + 1]].mean()
    return out


def standardize_features(data):
    """Z-score feature columns; constant columns become zeros.

    Returns (standardized, mean, std_guarded) so the same transform can be
    replayed on held-out rows.
    """
    data = as_float_array(data, name="features", ndim=2)
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    std_guarded = np.where(std > 0, std, 1.0)
    return (data - mean) / std_guarded, mean, std_guarded


def _zscore_block(block):
    std = block.std()
    if std == 0:
        return np.zeros_like(block)
    return (block - block.mean()) / std


def builtin_descriptor(frame):
    """128-D handcrafted frame descriptor.

    An 8x8 block-averaged intensity grid concatenated with an 8x8
    block-averaged gradient-energy grid, each block z-scored. Deterministic;
    constant frames map to all zeros.
    """
    frame = as_float_array(frame, name="frame", ndim=2)
    if frame.shape[0] < 32 or frame.shape[1] < 32:
        raise DimensionError(f"frame must be at least 32x32, got {frame.shape}")
    intensity = block_average(frame, (8, 8))
    gy, gx = np.gradient(frame)
    energy = block_average(gx**2 + gy**2, (8, 8))
    return np.concatenate([_zscore_block(intensity).ravel(), _zscore_block(energy).ravel()])
