"""Fixation-map scoring: NSS, AUC, and pairwise map correlation.

NSS is the z-scored map value at the fixated cell (population standard
deviation). AUC treats the fixated cell as the single positive against all
remaining cells, with ties credited 0.5, which makes a constant map score
exactly 0.5 and any strictly increasing rescaling of the map a no-op.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .core import fixation_cell
from .validation import as_grid_map, check_same_shape


def zscore_map(grid):
    """Normalize a map to zero mean and unit population std over all cells.

    A constant map has no contrast to score, so it maps to all zeros.
    """
    grid = as_grid_map(grid, name="map")
    std = grid.std()
    if std == 0:
        return np.zeros_like(grid)
    return (grid - grid.mean()) / std


def is_degenerate(grid):
    """True when a map is constant (zero contrast)."""
    grid = np.asarray(grid, dtype=float)
    return bool(grid.std() == 0)


def nss(saliency, cell):
    """Z-scored saliency value at the fixated (row, col) cell.

    Degenerate (constant) maps score 0.0.
    """
    saliency = as_grid_map(saliency, name="saliency map")
    row, col = cell
    k = saliency.shape[0]
    if not (0 <= row < k and 0 <= col < k):
        raise IndexError(f"fixation cell {cell} outside {k}x{k} grid")
    return float(zscore_map(saliency)[row, col])


def auc(saliency, cells):
    """Rank-based AUC of a map against one or more fixated cells.

    Per fixation: P(map[fix] > map[other]) + 0.5 * P(map[fix] = map[other])
    over the k^2 - 1 non-fixated cells; multiple cells average their
    per-fixation AUCs. Equivalent to (average_rank - 1) / (k^2 - 1).
    """
    saliency = as_grid_map(saliency, name="saliency map")
    k = saliency.shape[0]
    if isinstance(cells, tuple) and len(cells) == 2 and np.isscalar(cells[0]):
        cells = [cells]
    cells = list(cells)
    if not cells:
        raise ValueError("need at least one fixation cell")
    ranks = rankdata(saliency.ravel(), method="average")
    scores = []
    for row, col in cells:
        if not (0 <= row < k and 0 <= col < k):
            raise IndexError(f"fixation cell {(row, col)} outside {k}x{k} grid")
        scores.append((ranks[row * k + col] - 1.0) / (k * k - 1.0))
    return float(np.mean(scores))


def map_correlation(a, b):
    """Pearson correlation between two maps over cells; 0 if either is constant."""
    a = as_grid_map(a, name="first map")
    b = as_grid_map(b, name="second map")
    check_same_shape(a, b)
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da**2).sum() * (db**2).sum())
    if denom == 0:
        return 0.0
    return float((da * db).sum() / denom)


@dataclass(frozen=True)
class FrameScore:
    frame_index: int
    nss: float
    auc: float


@dataclass(frozen=True)
class ScoreReport:
    """Sequence-level NSS/AUC summary with per-frame detail.

    Invalid frames are skipped entirely; ``frames_scored`` counts only the
    frames that contributed. ``degenerate_frames`` counts scored frames whose
    prediction map was constant (NSS pinned to 0, AUC to 0.5).
    """

    nss_mean: float
    auc_mean: float
    per_frame: tuple
    frames_scored: int
    degenerate_frames: int = 0


def evaluate(maps, trace, k=None):
    """Score prediction maps against a fixation trace.

    ``maps`` is an (n, k, k) stack aligned with the trace records, or a
    single (k, k) map reused for every frame (static predictors).
    """
    maps = np.asarray(maps, dtype=float)
    if maps.ndim == 2:
        k = k or maps.shape[0]
        get_map = lambda i: maps
    elif maps.ndim == 3:
        if maps.shape[0] != len(trace):
            raise ValueError(
                f"{maps.shape[0]} maps for {len(trace)} trace records"
            )
        k = k or maps.shape[1]
        get_map = lambda i: maps[i]
    else:
        raise ValueError(f"maps must be (k, k) or (n, k, k), got shape {maps.shape}")

    per_frame = []
    degenerate = 0
    for i, rec in enumerate(trace.records):
        if not rec.valid:
            continue
        grid = get_map(i)
        cell = fixation_cell(rec.x, rec.y, k)
        if is_degenerate(grid):
            degenerate += 1
        per_frame.append(FrameScore(rec.frame_index, nss(grid, cell), auc(grid, cell)))
    if not per_frame:
        raise ValueError("no valid frames to score")
    return ScoreReport(
        nss_mean=float(np.mean([f.nss for f in per_frame])),
        auc_mean=float(np.mean([f.auc for f in per_frame])),
        per_frame=tuple(per_frame),
        frames_scored=len(per_frame),
        degenerate_frames=degenerate,
    )


def write_report_csv(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "nss", "auc"])
        for frame in report.per_frame:
            writer.writerow([frame.frame_index, repr(frame.nss), repr(frame.auc)])
    return path


def write_report_json(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary = {
        "nss_mean": report.nss_mean,
        "auc_mean": report.auc_mean,
        "frames_scored": report.frames_scored,
        "degenerate_frames": report.degenerate_frames,
    }
    path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
