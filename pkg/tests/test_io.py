import json

import numpy as np
import pytest

from egogaze.core import FeatureMatrix, FixationRecord, FixationTrace
from egogaze.errors import DimensionError, ParseError
from egogaze.io import (
    load_feature_matrix,
    load_fixation_log,
    load_map,
    load_matrix,
    read_pgm,
    save_feature_matrix,
    save_fixation_log,
    save_map,
    save_matrix,
    write_pgm,
)


def f32(values):
    return np.asarray(values, dtype=np.float32).astype(float)


class TestMatrixRoundTrip:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        data = f32(rng.random((2, 3)))
        save_matrix(tmp_path / "m.bin", data)
        loaded, header = load_matrix(tmp_path / "m.bin")
        assert np.array_equal(loaded, data)
        assert header == {"rows": 2, "cols": 3, "dtype": "f32le"}

    def test_map_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        grid = f32(rng.random((20, 20)))
        save_map(tmp_path / "map.bin", grid)
        assert np.array_equal(load_map(tmp_path / "map.bin"), grid)

    def test_non_square_map_rejected(self, tmp_path):
        save_matrix(tmp_path / "m.bin", np.ones((2, 3)))
        with pytest.raises(DimensionError):
            load_map(tmp_path / "m.bin")

    def test_header_payload_mismatch(self, tmp_path):
        path = save_matrix(tmp_path / "m.bin", np.ones((2, 3)))
        hdr = path.with_suffix(".hdr.json")
        header = json.loads(hdr.read_text())
        header["rows"] = 5
        hdr.write_text(json.dumps(header))
        with pytest.raises(DimensionError):
            load_matrix(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "m.bin"
        path.write_bytes(b"\x00" * 8)
        with pytest.raises(ParseError):
            load_matrix(path)

    def test_malformed_header_json(self, tmp_path):
        path = save_matrix(tmp_path / "m.bin", np.ones((2, 2)))
        path.with_suffix(".hdr.json").write_text("{not json")
        with pytest.raises(ParseError):
            load_matrix(path)

    def test_non_finite_payload_rejected(self, tmp_path):
        path = save_matrix(tmp_path / "m.bin", np.ones((1, 2)))
        path.write_bytes(np.array([1.0, np.inf], dtype="<f4").tobytes())
        with pytest.raises(ParseError):
            load_matrix(path)

    def test_refuses_to_write_nan(self, tmp_path):
        with pytest.raises(ValueError):
            save_matrix(tmp_path / "m.bin", np.array([[np.nan]]))

    def test_feature_matrix_keeps_provenance(self, tmp_path):
        fm = FeatureMatrix(f32(np.ones((2, 4))), provenance="cue_stack")
        save_feature_matrix(tmp_path / "f.bin", fm)
        loaded = load_feature_matrix(tmp_path / "f.bin")
        assert loaded.provenance == "cue_stack"
        assert np.array_equal(loaded.data, fm.data)


class TestFixationLog:
    def write(self, tmp_path, text):
        path = tmp_path / "trace.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_round_trip(self, tmp_path):
        records = (
            FixationRecord(0, 0.25, 0.75),
            FixationRecord(1, 0.5, 0.5, valid=False),
            FixationRecord(2, 1.0, 0.0),
        )
        trace = FixationTrace("seq", "subj", records)
        path = save_fixation_log(tmp_path / "t.csv", trace)
        loaded = load_fixation_log(path, sequence_id="seq", subject_id="subj")
        assert loaded == trace

    def test_out_of_range_names_line(self, tmp_path):
        path = self.write(tmp_path, "frame,x,y,valid\n0,0.5,0.5,1\n1,1.2,0.5,1\n")
        with pytest.raises(ParseError) as excinfo:
            load_fixation_log(path)
        assert excinfo.value.line == 3

    def test_wrong_header(self, tmp_path):
        path = self.write(tmp_path, "frame,u,v,valid\n0,0.5,0.5,1\n")
        with pytest.raises(ParseError):
            load_fixation_log(path)

    def test_non_numeric_coordinate(self, tmp_path):
        path = self.write(tmp_path, "frame,x,y,valid\n0,abc,0.5,1\n")
        with pytest.raises(ParseError) as excinfo:
            load_fixation_log(path)
        assert excinfo.value.line == 2

    def test_duplicate_frames_averaged_with_warning(self, tmp_path):
        path = self.write(tmp_path, "frame,x,y,valid\n0,0.2,0.4,1\n0,0.4,0.6,1\n1,0.5,0.5,1\n")
        with pytest.warns(UserWarning, match="averaged"):
            trace = load_fixation_log(path)
        assert len(trace) == 2
        assert trace.records[0].x == pytest.approx(0.3)
        assert trace.records[0].y == pytest.approx(0.5)

    def test_nan_rejected(self, tmp_path):
        path = self.write(tmp_path, "frame,x,y,valid\n0,nan,0.5,1\n")
        with pytest.raises(ParseError):
            load_fixation_log(path)

    def test_invalid_row_out_of_range_tolerated(self, tmp_path):
        path = self.write(tmp_path, "frame,x,y,valid\n0,3.0,0.5,0\n1,0.5,0.5,1\n")
        trace = load_fixation_log(path)
        assert not trace.records[0].valid


class TestPgm:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        image = rng.integers(0, 256, size=(13, 9)).astype(np.uint8)
        path = write_pgm(tmp_path / "img.pgm", image)
        assert np.array_equal(read_pgm(path), image)

    def test_comment_in_header(self, tmp_path):
        payload = bytes(range(12))
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# comment line\n4 3\n255\n" + payload)
        image = read_pgm(path)
        assert image.shape == (3, 4)
        assert image.ravel().tolist() == list(range(12))

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P2\n2 2\n255\n1 2 3 4\n")
        with pytest.raises(ParseError):
            read_pgm(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
        with pytest.raises(DimensionError):
            read_pgm(path)
