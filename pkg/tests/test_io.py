import json

import numpy as np
import pytest

from carnotsig import io
from carnotsig.density import LogSigSampleSet
from carnotsig.fbm import sample_fbm_circulant
from carnotsig.signature import PLPath


def test_floats_keep_seventeen_digits():
    x = 0.1 + 0.2
    assert io.format_float(x) == "0.30000000000000004"
    assert float(io.format_float(np.pi)) == np.pi
    text = io.dumps_json({"a": x, "b": [1, np.float64(np.nan)], "c": np.inf, "d": np.int64(3), "e": True})
    data = json.loads(text)
    assert data == {"a": x, "b": [1, None], "c": None, "d": 3, "e": True}
    assert "0.30000000000000004" in text
    with pytest.raises(TypeError):
        io.dumps_json({"x": object()})


def test_json_nesting_round_trip(tmp_path):
    obj = {"rows": [{"u": np.array([0.1, -2.5e-17]), "ok": np.bool_(False)}], "empty": [], "none": None}
    io.write_json(obj, tmp_path / "r.json")
    back = json.loads((tmp_path / "r.json").read_text())
    assert back == {"rows": [{"u": [0.1, -2.5e-17], "ok": False}], "empty": [], "none": None}


def test_path_csv_round_trip(tmp_path, rng):
    path = PLPath(np.cumsum(rng.uniform(0.1, 1, 6)), rng.standard_normal((6, 3)))
    io.write_path_csv(path, tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "t,x1,x2,x3"
    back = io.read_path_csv(tmp_path / "p.csv")
    assert np.array_equal(back.times, path.times) and np.array_equal(back.values, path.values)


@pytest.mark.parametrize("text", ["", "t,y1\n0,0\n1,1\n", "t,x1\n0,a\n1,1\n", "t,x1\n0,0,0\n1,1,1\n"])
def test_path_csv_rejects_bad_files(tmp_path, text):
    (tmp_path / "bad.csv").write_text(text)
    with pytest.raises(ValueError):
        io.read_path_csv(tmp_path / "bad.csv")


def test_fbm_binary_round_trip(tmp_path):
    batch = sample_fbm_circulant(32, 0.7, 2, 5, seed=3)
    io.write_fbm_binary(batch, tmp_path / "f.bin")
    back = io.read_fbm_binary(tmp_path / "f.bin")
    assert back.H == 0.7 and back.seed == 3
    assert np.array_equal(back.grid, batch.grid) and np.array_equal(back.samples, batch.samples)
    io.write_fbm_csv(batch, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "sample,t,x1,x2" and len(lines) == 1 + 5 * 32
    (tmp_path / "g.bin").write_bytes(b"garbage" * 20)
    with pytest.raises(ValueError):
        io.read_fbm_binary(tmp_path / "g.bin")


@pytest.mark.parametrize("weighted", [False, True])
def test_samples_binary_round_trip(tmp_path, rng, weighted):
    logw = rng.standard_normal(7) if weighted else None
    S = LogSigSampleSet(0.6, 0.5, 2, 3, 64, 7, 11, rng.standard_normal((7, 5)), 0.25, logw)
    io.write_samples_binary(S, tmp_path / "s.bin")
    back = io.read_samples_binary(tmp_path / "s.bin")
    assert (back.H, back.t, back.eps, back.d, back.N, back.steps, back.seed) == (0.6, 0.5, 0.25, 2, 3, 64, 11)
    assert np.array_equal(back.samples, S.samples)
    assert (back.log_weights is None) == (not weighted)
    if weighted:
        assert np.array_equal(back.log_weights, logw)
    io.write_samples_csv(S, tmp_path / "s.csv")
    header = (tmp_path / "s.csv").read_text().splitlines()[0].split(",")
    assert header[:2] == ["1", "2"] and (header[-1] == "log_weight") == weighted


def test_rows_csv(tmp_path):
    io.write_rows_csv([{"a": 1, "b": [0.5, 2.0]}, {"a": 2, "c": None}], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines() == ["a,b,c", "1,0.5;2,", "2,,"]


def test_config_round_trip(tmp_path):
    cfg = {"command": "sample", "H": 0.75, "t": (0.25, 1.0), "count": 1000, "path": "x.csv", "skip": None}
    io.write_config(cfg, tmp_path / "c.txt")
    text = (tmp_path / "c.txt").read_text()
    assert "skip = none\n" in text and "t = 0.25,1\n" in text
    assert io.read_config(tmp_path / "c.txt") == {"command": "sample", "H": "0.75", "t": "0.25,1",
                                                  "count": "1000", "path": "x.csv", "skip": "none"}
    (tmp_path / "d.txt").write_text("# comment\ngrid-size = 16  # trailing\n\n")
    assert io.read_config(tmp_path / "d.txt") == {"grid_size": "16"}
    (tmp_path / "e.txt").write_text("no equals sign\n")
    with pytest.raises(ValueError):
        io.read_config(tmp_path / "e.txt")
