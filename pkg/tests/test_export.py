import csv

import numpy as np
import pytest

from topovertex import export
from topovertex import grid_fem as fem
from topovertex.detect import NO_LABEL, RankingEntry


def test_float_format_roundtrips():
    for v in (0.1, -20.348, 1e-300, np.pi):
        assert float(export.fmt(v)) == v
    assert export.fmt(float("nan")) == ""


def test_field_csv(tmp_path):
    g = fem.Grid2D.uniform(2, 0.0, 2.0)
    vals = np.array([[np.nan, 1.0, 2.0], [0.1, np.nan, np.nan], [3.0, 4.0, 5.0]])
    path = export.write_field_csv(tmp_path / "f.csv", g, vals)
    raw = path.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(raw.decode("utf-8").splitlines()))
    assert rows[0] == ["i", "j", "x", "y", "value"]
    assert len(rows) == 1 + 6
    assert rows[3] == ["1", "0", "1", "0", "0.10000000000000001"]


def test_ranking_csv(tmp_path):
    e = [RankingEntry(1, -1.5, "w[0,90]", (0.0, 90.0), (25, 15), (25.0, 15.0), "A", 0.0),
         RankingEntry(2, -1.0, "w[0,45,270]", (0.0, 45.0, 270.0), (3, 4), (3.0, 4.0), NO_LABEL, float("nan"))]
    path = export.write_ranking_csv(tmp_path / "r.csv", e)
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[0] == "rank,min_value,angles,argmin_i,argmin_j,x,y,label,label_distance_px"
    assert lines[1] == "1,-1.5,0;90,25,15,25,15,A,0"
    assert lines[2] == f"2,-1,0;45;270,3,4,3,4,{NO_LABEL},"


def test_pgm_minmax(tmp_path):
    vals = np.array([[0.0, 1.0], [2.0, 4.0]])       # [i, j] = (x, y)
    path = export.write_pgm(tmp_path / "a.pgm", vals)
    assert path.read_bytes().startswith(b"P5\n2 2\n255\n")
    img = export.read_pgm(path)
    # top row is the largest y
    np.testing.assert_array_equal(img, [[64, 255], [0, 128]])


def test_pgm_negative_mode():
    vals = np.array([[-4.0, 2.0], [np.nan, -1.0]])
    gray = export.to_gray(vals, mode="negative")
    np.testing.assert_array_equal(gray, [[255, 191], [0, 255]])


def test_pgm_constant_field_and_bad_mode():
    assert np.all(export.to_gray(np.ones((3, 3))) == 0)
    with pytest.raises(ValueError):
        export.to_gray(np.ones((2, 2)), mode="log")


def test_metadata_is_sorted_and_stable(tmp_path):
    a = export.write_metadata(tmp_path / "a.json", {"b": 1, "a": [1, 2]})
    b = export.write_metadata(tmp_path / "b.json", {"a": [1, 2], "b": 1})
    assert a.read_bytes() == b.read_bytes()
    assert export.sidecar(tmp_path / "x.csv").name == "x.csv.meta.json"
