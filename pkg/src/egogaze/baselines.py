"""Spatial-bias predictors: central Gaussian, average fixation map, and the
fixation-oracle upper bound."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .core import (
    DEFAULT_GRID_SIZE,
    DEFAULT_KERNEL_SIGMA,
    DEFAULT_KERNEL_WIDTH,
    FixationTrace,
    gaussian_kernel,
    rasterize_fixation,
    smooth_map,
)

DEFAULT_SIGMA_FRAC = 0.25


def central_gaussian(k=DEFAULT_GRID_SIZE, sigma_frac=DEFAULT_SIGMA_FRAC):
    """Isotropic Gaussian centered on the grid, normalized to sum 1.

    ``sigma_frac`` is the standard deviation as a fraction of the grid side.
    """
    if sigma_frac <= 0:
        raise ValueError(f"sigma_frac must be positive, got {sigma_frac}")
    sigma = sigma_frac * k
    center = (k - 1) / 2.0
    coords = np.arange(k, dtype=float) - center
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    grid = np.outer(g, g)
    return grid / grid.sum()


class AverageFixationMap(BaseEstimator):
    """Spatial prior learned as the mean of smoothed training fixation maps.

    Pools all valid fixations over all training traces and subjects; the
    fitted map is the same for every predicted frame.
    """

    def __init__(self, k=DEFAULT_GRID_SIZE, kernel_width=DEFAULT_KERNEL_WIDTH,
                 kernel_sigma=DEFAULT_KERNEL_SIGMA):
        self.k = k
        self.kernel_width = kernel_width
        self.kernel_sigma = kernel_sigma

    def fit(self, traces):
        """Accumulate smoothed one-hot maps over all valid records.

        ``traces`` is one FixationTrace or an iterable of them.
        """
        if isinstance(traces, FixationTrace):
            traces = [traces]
        kernel = gaussian_kernel(self.kernel_width, self.kernel_sigma)
        acc = np.zeros((self.k, self.k))
        count = 0
        for trace in traces:
            for rec in trace.records:
                if not rec.valid:
                    continue
                acc += smooth_map(rasterize_fixation(rec.x, rec.y, self.k), kernel)
                count += 1
        if count == 0:
            raise ValueError("cannot fit on an empty training set")
        self.map_ = acc / count
        self.n_fixations_ = count
        return self

    def predict(self, n_frames=1):
        """Return the fitted map replicated for ``n_frames`` frames."""
        if not hasattr(self, "map_"):
            raise NotFittedError("AverageFixationMap is not fitted")
        return np.repeat(self.map_[None, :, :], n_frames, axis=0)


def fixation_oracle_maps(trace, k=DEFAULT_GRID_SIZE, kernel=None):
    """Per-frame smoothed ground-truth fixation maps (the oracle upper bound).

    Invalid frames yield all-zero maps; the evaluator skips them anyway.
    """
    if kernel is None:
        kernel = gaussian_kernel()
    maps = np.zeros((len(trace), k, k))
    for i, rec in enumerate(trace.records):
        if rec.valid:
            maps[i] = smooth_map(rasterize_fixation(rec.x, rec.y, k), kernel)
    return maps
