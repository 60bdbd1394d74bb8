import json

import numpy as np
import pytest

from egogaze.report import (
    svg_bar_chart,
    svg_heat_grid,
    svg_line_chart,
    write_csv,
    write_manifest,
)


def test_single_bar_chart():
    svg = svg_bar_chart(["only"], [0.7], title="one bar")
    assert svg.count("<rect") == 1
    assert "only" in svg


def test_bar_chart_rejects_empty():
    with pytest.raises(ValueError):
        svg_bar_chart([], [])


def test_bar_chart_deterministic():
    labels, values = ["a", "b", "c"], [0.1, -0.4, 2.0]
    assert svg_bar_chart(labels, values) == svg_bar_chart(labels, values)


def test_heat_grid_labels_and_nan_cells():
    matrix = np.array([[1.0, np.nan], [0.0, 2.0]])
    svg = svg_heat_grid(matrix, ["r0", "r1"], ["c0", "c1"], title="grid")
    assert svg.count("<rect") == 4
    assert "n/a" in svg
    assert "r1" in svg and "c0" in svg


def test_heat_grid_rejects_empty():
    with pytest.raises(ValueError):
        svg_heat_grid(np.zeros((0, 0)), [], [])


def test_line_chart_multiple_series():
    svg = svg_line_chart({"a": ([1, 2, 3], [0.1, 0.2, 0.3]),
                          "b": ([1, 2, 3], [0.3, 0.2, 0.1])})
    assert svg.count("<polyline") == 2


def test_line_chart_rejects_empty():
    with pytest.raises(ValueError):
        svg_line_chart({})


def test_manifest_contents_and_determinism(tmp_path):
    a = write_manifest(tmp_path / "a.json", "cmd", {"x": 1}, seed=7)
    b = write_manifest(tmp_path / "b.json", "cmd", {"x": 1}, seed=7)
    assert a.read_bytes() == b.read_bytes()
    payload = json.loads(a.read_text())
    assert payload["command"] == "cmd"
    assert payload["seed"] == 7
    assert set(payload["versions"]) == {"egogaze", "numpy", "scipy"}


def test_write_csv_lf_line_endings(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "b"], [[1, 2], [3, 4]])
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode().splitlines() == ["a,b", "1,2", "3,4"]
