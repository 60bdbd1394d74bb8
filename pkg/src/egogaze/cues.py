"""Task-specific cue maps: vanishing points, manipulation-point click maps,
hand masks, complement maps, and additive map augmentation."""

import csv
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import DEFAULT_GRID_SIZE, gaussian_kernel, rasterize_fixation, smooth_map, max_normalize
from .errors import ParseError
from .io import read_pgm
from .metrics import map_correlation, nss
from .validation import as_grid_map, check_same_shape, check_unit_coords

KIND_VANISHING_POINT = "vanishing_point"
KIND_MANIPULATION_CLICK = "manipulation_click"
POINT_KINDS = (KIND_VANISHING_POINT, KIND_MANIPULATION_CLICK)

NO_HANDS = "no-hands"
ONE_HAND = "one-hand"
TWO_HANDS = "two-hands"
HAND_CATEGORIES = (NO_HANDS, ONE_HAND, TWO_HANDS)

#: Components smaller than this fraction of the frame are annotation noise.
MIN_HAND_AREA_FRAC = 0.005


@dataclass(frozen=True)
class PointAnnotation:
    """A single annotated image point (vanishing point or manipulation click)."""

    frame_index: int
    kind: str
    x: float
    y: float
    subject_id: str = None

    def __post_init__(self):
        if self.kind not in POINT_KINDS:
            raise ValueError(f"unknown point kind {self.kind!r}")
        check_unit_coords(self.x, self.y)


@dataclass(frozen=True)
class HandMask:
    """Binary hand-region mask at working resolution."""

    frame_index: int
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
        if not np.isin(mask, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        object.__setattr__(self, "mask", mask.astype(np.uint8))

    @property
    def hand_count(self):
        return count_hands(self.mask)


def point_to_map(points, k=DEFAULT_GRID_SIZE, kernel=None):
    """Rasterize points onto the grid, sum, and smooth.

    Accepts (x, y) pairs or PointAnnotations; an empty point set yields the
    zero map. Additive over point sets by construction.
    """
    if kernel is None:
        kernel = gaussian_kernel()
    acc = np.zeros((k, k))
    n_points = 0
    for point in points:
        if isinstance(point, PointAnnotation):
            x, y = point.x, point.y
        else:
            x, y = point
        acc += rasterize_fixation(x, y, k)
        n_points += 1
    if n_points == 0:
        return acc
    return smooth_map(acc, kernel)


def complement(grid):
    """1 - S for a [0, 1]-valued map S. Involution; flips the NSS sign."""
    grid = as_grid_map(grid, name="map")
    if grid.min() < 0 or grid.max() > 1:
        raise ValueError("complement requires values in [0, 1]")
    return 1.0 - grid


def augment(prediction, mp_map, weight=1.0):
    """Additively mix a prediction map with a manipulation-point map.

    Both inputs are max-normalized, summed (``weight`` scales the MP side,
    1.0 = equal weights), and max-normalized again.
    """
    prediction = as_grid_map(prediction, name="prediction", nonnegative=True)
    mp_map = as_grid_map(mp_map, name="mp map", nonnegative=True)
    check_same_shape(prediction, mp_map, "prediction", "mp map")
    if weight < 0:
        raise ValueError(f"weight must be >= 0, got {weight}")
    return max_normalize(max_normalize(prediction) + weight * max_normalize(mp_map))


_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


def count_hands(mask, min_area_frac=MIN_HAND_AREA_FRAC):
    """Number of 8-connected components covering at least ``min_area_frac``
    of the frame."""
    mask = np.asarray(mask)
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    labeled, n_components = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if n_components == 0:
        return 0
    areas = ndimage.sum_labels(np.ones_like(mask), labeled, np.arange(1, n_components + 1))
    return int((areas >= min_area_frac * mask.size).sum())


def hand_category(mask_or_count):
    """Map a mask (or precomputed count) to no-hands / one-hand / two-hands."""
    if np.isscalar(mask_or_count):
        count = int(mask_or_count)
    elif isinstance(mask_or_count, HandMask):
        count = mask_or_count.hand_count
    else:
        count = count_hands(mask_or_count)
    if count <= 0:
        return NO_HANDS
    if count == 1:
        return ONE_HAND
    return TWO_HANDS


def nss_by_hand_category(maps, trace, masks):
    """Mean NSS of per-frame maps partitioned by hand category.

    ``masks`` align with the trace records. Returns a dict with one entry per
    category; categories with no scored frames map to None.
    """
    maps = np.asarray(maps, dtype=float)
    if len(masks) != len(trace) or maps.shape[0] != len(trace):
        raise ValueError("maps, trace, and masks must align per frame")
    k = maps.shape[1]
    buckets = {cat: [] for cat in HAND_CATEGORIES}
    from .core import fixation_cell

    for i, rec in enumerate(trace.records):
        if not rec.valid:
            continue
        cat = hand_category(masks[i])
        buckets[cat].append(nss(maps[i], fixation_cell(rec.x, rec.y, k)))
    return {
        cat: (float(np.mean(vals)) if vals else None)
        for cat, vals in buckets.items()
    }


def _group_by_frame(points):
    frames = {}
    for p in points:
        frames.setdefault(p.frame_index, []).append(p)
    return frames


def subject_mean_map(points, k=DEFAULT_GRID_SIZE, kernel=None):
    """Average of one subject's per-frame point maps over the video."""
    frames = _group_by_frame(list(points))
    if not frames:
        raise ValueError("subject has no points")
    acc = np.zeros((k, k))
    for frame_points in frames.values():
        acc += point_to_map(frame_points, k=k, kernel=kernel)
    return acc / len(frames)


def click_agreement(click_logs, k=DEFAULT_GRID_SIZE, kernel=None):
    """Mean pairwise correlation of subjects' average click maps.

    ``click_logs`` maps subject id to that subject's PointAnnotations.
    """
    if len(click_logs) < 2:
        raise ValueError(f"need at least 2 subjects, got {len(click_logs)}")
    mean_maps = {
        subject: subject_mean_map(points, k=k, kernel=kernel)
        for subject, points in click_logs.items()
    }
    subjects = sorted(mean_maps)
    scores = [
        map_correlation(mean_maps[a], mean_maps[b])
        for a, b in combinations(subjects, 2)
    ]
    return float(np.mean(scores))


def load_point_log(path, kind=KIND_MANIPULATION_CLICK):
    """Read a point CSV: ``frame,subject,x,y`` or ``frame,x,y``."""
    path = Path(path)
    points = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", path=path) from None
        if header == ["frame", "subject", "x", "y"]:
            has_subject = True
        elif header == ["frame", "x", "y"]:
            has_subject = False
        else:
            raise ParseError(
                f"expected header 'frame,subject,x,y' or 'frame,x,y', got {','.join(header)!r}",
                path=path, line=1,
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} columns, got {len(row)}",
                                 path=path, line=line_no)
            try:
                frame = int(row[0])
                x = float(row[-2])
                y = float(row[-1])
            except ValueError as exc:
                raise ParseError(f"malformed row: {row!r}", path=path, line=line_no) from exc
            if not (np.isfinite(x) and np.isfinite(y) and 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise ParseError(f"coordinates ({x}, {y}) outside [0, 1]",
                                 path=path, line=line_no)
            subject = row[1].strip() if has_subject else None
            points.append(PointAnnotation(frame, kind, x, y, subject))
    if not points:
        raise ParseError("no data rows", path=path)
    return points


def save_point_log(path, points):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    has_subject = any(p.subject_id is not None for p in points)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if has_subject:
            writer.writerow(["frame", "subject", "x", "y"])
            for p in points:
                writer.writerow([int(p.frame_index), p.subject_id or "",
                                 repr(float(p.x)), repr(float(p.y))])
        else:
            writer.writerow(["frame", "x", "y"])
            for p in points:
                writer.writerow([int(p.frame_index), repr(float(p.x)), repr(float(p.y))])
    return path


def group_by_subject(points):
    """Split a click log into per-subject point lists."""
    logs = {}
    for p in points:
        logs.setdefault(p.subject_id, []).append(p)
    return logs


def load_hand_masks(index_path):
    """Read hand masks from an index CSV ``frame,path`` of binary PGM files.

    Mask paths are resolved relative to the index file. Pixels > 127 count
    as hand.
    """
    index_path = Path(index_path)
    masks = []
    with index_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", path=index_path) from None
        if header != ["frame", "path"]:
            raise ParseError(f"expected header 'frame,path', got {','.join(header)!r}",
                             path=index_path, line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 columns, got {len(row)}",
                                 path=index_path, line=line_no)
            try:
                frame = int(row[0])
            except ValueError as exc:
                raise ParseError(f"bad frame index {row[0]!r}", path=index_path,
                                 line=line_no) from exc
            image = read_pgm(index_path.parent / row[1])
            masks.append(HandMask(frame, (image > 127).astype(np.uint8)))
    if not masks:
        raise ParseError("no data rows", path=index_path)
    return masks
