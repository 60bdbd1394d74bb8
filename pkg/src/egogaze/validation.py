"""Input validation helpers used by every module.

Grid maps travel between modules as plain ``(k, k)`` float arrays, so the
checks live here instead of on a wrapper class.
"""

import numpy as np

from .errors import DimensionError


def as_float_array(a, name="array", ndim=None, allow_empty=False):
    """Coerce to a float64 ndarray and require finite values."""
    arr = np.asarray(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ValueError(f"{name} must not be empty")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_grid_map(m, name="map", k=None, nonnegative=False):
    """Coerce to a square 2-D float map with side length >= 2."""
    arr = as_float_array(m, name=name, ndim=2)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DimensionError(f"{name} side must be >= 2, got {arr.shape[0]}")
    if k is not None and arr.shape[0] != k:
        raise DimensionError(f"{name} must be {k}x{k}, got shape {arr.shape}")
    if nonnegative and arr.min() < 0:
        raise ValueError(f"{name} must be non-negative")
    return arr


def check_same_shape(a, b, name_a="first map", name_b="second map"):
    if a.shape != b.shape:
        raise DimensionError(
            f"{name_a} has shape {a.shape} but {name_b} has shape {b.shape}"
        )


def check_unit_coords(x, y):
    """Reject coordinates outside [0, 1]^2 (raises CoordinateError)."""
    from .errors import CoordinateError

    if not (np.isfinite(x) and np.isfinite(y)):
        raise CoordinateError(f"coordinates must be finite, got ({x}, {y})")
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise CoordinateError(f"coordinates must lie in [0, 1], got ({x}, {y})")
