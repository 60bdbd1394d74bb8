"""File formats: fixation logs, binary matrices/maps, and PGM images.

Binary matrices are raw little-endian float32, row-major, with a sidecar
header ``<basename>.hdr.json`` declaring ``{"rows": n, "cols": m,
"dtype": "f32le"}``. Extra keys in the sidecar are preserved for model
metadata. Fixation logs are UTF-8 CSV with header ``frame,x,y,valid``.
"""

import csv
import json
import warnings
from pathlib import Path

import numpy as np

from .core import FixationRecord, FixationTrace, FeatureMatrix
from .errors import DimensionError, ParseError

DTYPE_TAG = "f32le"


def _header_path(path):
    return Path(path).with_suffix(".hdr.json")


def save_matrix(path, data, extra=None):
    """Write a 2-D array as f32le payload plus its sidecar header."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DimensionError(f"matrix payload must be 2-D, got shape {data.shape}")
    if data.size and not np.isfinite(data).all():
        raise ValueError("refusing to write non-finite values")
    path = Path(path)
    header = {"rows": int(data.shape[0]), "cols": int(data.shape[1]), "dtype": DTYPE_TAG}
    if extra:
        header.update(extra)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data.astype("<f4").tobytes(order="C"))
    _header_path(path).write_text(json.dumps(header, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_header(path):
    hdr_path = _header_path(path)
    if not hdr_path.exists():
        raise ParseError("missing sidecar header", path=hdr_path)
    try:
        header = json.loads(hdr_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=hdr_path) from exc
    for key in ("rows", "cols", "dtype"):
        if key not in header:
            raise ParseError(f"header missing field {key!r}", path=hdr_path)
    if header["dtype"] != DTYPE_TAG:
        raise ParseError(f"unsupported dtype {header['dtype']!r}", path=hdr_path)
    if not (isinstance(header["rows"], int) and isinstance(header["cols"], int)):
        raise ParseError("rows/cols must be integers", path=hdr_path)
    if header["rows"] < 1 or header["cols"] < 1:
        raise ParseError("rows/cols must be >= 1", path=hdr_path)
    return header


def load_matrix(path):
    """Read an f32le matrix; validates header/payload consistency and finiteness."""
    path = Path(path)
    header = read_header(path)
    rows, cols = header["rows"], header["cols"]
    payload = np.frombuffer(path.read_bytes(), dtype="<f4")
    if payload.size != rows * cols:
        raise DimensionError(
            f"{path}: header declares {rows}x{cols} = {rows * cols} values, "
            f"payload holds {payload.size}"
        )
    if payload.size and not np.isfinite(payload).all():
        raise ParseError("payload contains non-finite values", path=path)
    return payload.astype(float).reshape(rows, cols), header


def save_map(path, grid):
    """Write a square map in the binary matrix format."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
        raise DimensionError(f"map must be square, got shape {grid.shape}")
    return save_matrix(path, grid)


def load_map(path):
    data, _ = load_matrix(path)
    if data.shape[0] != data.shape[1]:
        raise DimensionError(f"{path}: map must be square, got shape {data.shape}")
    return data


def save_feature_matrix(path, features):
    extra = {"provenance": features.provenance} if isinstance(features, FeatureMatrix) else None
    data = features.data if isinstance(features, FeatureMatrix) else features
    return save_matrix(path, data, extra=extra)


def load_feature_matrix(path):
    data, header = load_matrix(path)
    return FeatureMatrix(data, provenance=header.get("provenance", "ingested"))


def _parse_float(text, path, line_no, column):
    try:
        return float(text)
    except ValueError as exc:
        raise ParseError(f"column {column!r} is not a number: {text!r}", path=path, line=line_no) from exc


_TRUTHY = {"1", "true", "yes"}
_FALSY = {"0", "false", "no"}

FIXATION_HEADER = ["frame", "x", "y", "valid"]


def load_fixation_log(path, sequence_id=None, subject_id=None):
    """Read a ``frame,x,y,valid`` CSV into a FixationTrace.

    Multiple samples for one frame are averaged with a warning (valid samples
    only, when any exist). Out-of-range coordinates on valid rows are
    rejected, naming the offending line.
    """
    path = Path(path)
    by_frame = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path=path) from None
        if [h.strip() for h in header] != FIXATION_HEADER:
            raise ParseError(
                f"expected header {','.join(FIXATION_HEADER)!r}, got {','.join(header)!r}",
                path=path, line=1,
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 columns, got {len(row)}", path=path, line=line_no)
            try:
                frame = int(row[0])
            except ValueError as exc:
                raise ParseError(f"column 'frame' is not an integer: {row[0]!r}", path=path, line=line_no) from exc
            x = _parse_float(row[1], path, line_no, "x")
            y = _parse_float(row[2], path, line_no, "y")
            flag = row[3].strip().lower()
            if flag in _TRUTHY:
                valid = True
            elif flag in _FALSY:
                valid = False
            else:
                raise ParseError(f"column 'valid' must be boolean-like: {row[3]!r}", path=path, line=line_no)
            if not (np.isfinite(x) and np.isfinite(y)):
                raise ParseError("non-finite coordinates", path=path, line=line_no)
            if valid and not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise ParseError(
                    f"coordinates ({x}, {y}) outside [0, 1]", path=path, line=line_no
                )
            by_frame.setdefault(frame, []).append((x, y, valid))

    if not by_frame:
        raise ParseError("no data rows", path=path)

    records = []
    duplicates = 0
    for frame in sorted(by_frame):
        samples = by_frame[frame]
        if len(samples) > 1:
            duplicates += 1
        valid_samples = [(x, y) for x, y, valid in samples if valid]
        if valid_samples:
            xs, ys = zip(*valid_samples)
            records.append(FixationRecord(frame, float(np.mean(xs)), float(np.mean(ys)), True))
        else:
            xs = [x for x, _, _ in samples]
            ys = [y for _, y, _ in samples]
            records.append(FixationRecord(frame, float(np.mean(xs)), float(np.mean(ys)), False))
    if duplicates:
        warnings.warn(
            f"{path}: {duplicates} frame(s) had multiple gaze samples; averaged",
            stacklevel=2,
        )
    return FixationTrace(
        sequence_id=sequence_id or path.stem,
        subject_id=subject_id or "unknown",
        records=tuple(records),
    )


def save_fixation_log(path, trace):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FIXATION_HEADER)
        for rec in trace.records:
            writer.writerow([int(rec.frame_index), repr(float(rec.x)),
                             repr(float(rec.y)), int(rec.valid)])
    return path


def read_pgm(path):
    """Read a binary (P5) PGM image into a uint8 array."""
    path = Path(path)
    raw = path.read_bytes()
    tokens = []
    pos = 0
    # header = magic, width, height, maxval; '#' starts a comment
    while len(tokens) < 4 and pos < len(raw):
        ch = raw[pos : pos + 1]
        if ch == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(raw) and not raw[pos : pos + 1].isspace():
                pos += 1
            tokens.append(raw[start:pos])
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise ParseError("not a binary PGM (P5) file", path=path)
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise ParseError("malformed PGM header", path=path) from exc
    if maxval != 255:
        raise ParseError(f"only maxval 255 supported, got {maxval}", path=path)
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(raw[pos : pos + width * height], dtype=np.uint8)
    if pixels.size != width * height:
        raise DimensionError(f"{path}: PGM payload truncated")
    return pixels.reshape(height, width).copy()


def write_pgm(path, image):
    """Write a 2-D array as binary PGM; values are clipped to [0, 255]."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise DimensionError(f"PGM image must be 2-D, got shape {image.shape}")
    data = np.clip(np.round(image.astype(float)), 0, 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes(order="C"))
    return path
