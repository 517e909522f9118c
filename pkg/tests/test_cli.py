import json

import numpy as np
import pytest

from carnotsig.cli import COMMANDS, build_parser, run


def run_json(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr().out
    assert code == 0, out
    return json.loads(out)


@pytest.fixture
def square(tmp_path):
    f = tmp_path / "square.csv"
    f.write_text("t,x1,x2\n0,0,0\n1,1,0\n2,1,1\n3,0,1\n4,0,0\n")
    return f


def test_dims(capsys):
    rep = run_json(capsys, "dims", "--d", "2", "--N", "5")["report"]
    assert rep["layer_dims"] == [2, 1, 2, 3, 6]
    assert [r["nu"] for r in rep["rows"]] == [2, 4, 10, 22, 52]


def test_basis(capsys):
    rep = run_json(capsys, "basis", "--d", "2", "--N", "3")["report"]
    assert [e["label"] for e in rep["elements"]] == ["1", "2", "[1,2]", "[1,[1,2]]", "[[1,2],2]"]


def test_signature_of_square(capsys, square):
    out = run_json(capsys, "signature", "--path", str(square), "--d", "2", "--N", "2")
    assert np.allclose(out["report"]["logsig"], [0, 0, 1], atol=1e-12)
    assert out["config"]["command"] == "signature" and out["config"]["N"] == 2


def test_sample_is_deterministic(tmp_path, capsys):
    args = ["sample", "--H", "0.75", "--d", "2", "--N", "2", "--t", "1", "--steps", "256", "--count", "1000",
            "--seed", "7"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b"), "--threads", "1"]) == 0
    assert run(["sample", "--config", str(tmp_path / "a" / "config.txt"), "--out", str(tmp_path / "c")]) == 0
    for name in ("report.json", "config.txt", "samples.csv", "samples.bin"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


def test_flags_override_config(tmp_path, capsys):
    (tmp_path / "c.txt").write_text("command = dims\nd = 3\nN = 2\n")
    rep = run_json(capsys, "dims", "--config", str(tmp_path / "c.txt"), "--N", "3")
    assert rep["config"] == {"command": "dims", "d": 3, "N": 3, "seed": 0}
    assert rep["report"]["layer_dims"] == [3, 3, 8]


def test_validation_errors_exit_two(tmp_path, capsys, square):
    (tmp_path / "other.txt").write_text("command = basis\n")
    (tmp_path / "unknown.txt").write_text("colour = red\n")
    cases = [
        ["density", "--u", "0,0,0", "--H", "0.2", "--count", "100"],
        ["signature", "--path", str(tmp_path / "missing.csv")],
        ["signature", "--path", str(square), "--d", "3"],
        ["dims", "--bogus", "1"],
        ["dims", "--d", "two"],
        ["dims", "--config", str(tmp_path / "other.txt")],
        ["dims", "--config", str(tmp_path / "unknown.txt")],
        ["chow", "--u", "1,2"],
        ["cdist", "--u", "0,0,1", "--mode", "x"],
        ["nosuchcommand"],
    ]
    for argv in cases:
        assert run(argv) == 2, argv
    capsys.readouterr()


def test_numeric_failure_exits_three(monkeypatch, capsys):
    import carnotsig.cli as cli
    from carnotsig.chow import ChowSolveError

    def fail(*args, **kwargs):
        raise ChowSolveError("no convergence")

    monkeypatch.setattr(cli, "second_kind_solve", fail)
    assert run(["chow", "--u", "0,0,1"]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_chow_and_distances(tmp_path, capsys):
    rep = run_json(capsys, "chow", "--u=-0.5,0.25,1")["report"]
    assert rep["residual"] < 1e-8
    assert run(["ccdist", "--u", "0,0,1", "--segments", "16", "--starts", "2", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["value"] == pytest.approx(2 * np.sqrt(np.pi), rel=0.1)
    assert (tmp_path / "certificate.csv").read_text().startswith("t,x1,x2\n")
    assert (tmp_path / "config.txt").read_text().startswith("command = ccdist\n")


def test_help_documents_every_flag(capsys):
    parser = build_parser()
    for cmd in COMMANDS:
        with pytest.raises(SystemExit):
            parser.parse_args([cmd.name, "--help"])
        text = " ".join(capsys.readouterr().out.split())
        assert "Output schema" in text and "default:" in text
        for prm in cmd.params:
            assert "--" + prm.name.replace("_", "-") in text
        for flag in ("--config", "--out", "--threads", "--seed"):
            assert flag in text
    assert run(["--help"]) == 0
    capsys.readouterr()


def test_unset_optional_values_survive_config_round_trip(tmp_path):
    from carnotsig import io
    from carnotsig.cli import _BY_NAME, _emitted_config, resolve_config

    cmd = _BY_NAME["varadhan"]
    parser = build_parser()
    cfg = resolve_config(cmd, parser.parse_args(["varadhan", "--u", "0,0,0.2", "--homogeneity-lambda", "none"]))
    assert cfg["homogeneity_lambda"] is None
    io.write_config(_emitted_config(cmd, cfg), tmp_path / "config.txt")
    assert "homogeneity_lambda = none\n" in (tmp_path / "config.txt").read_text()
    again = resolve_config(cmd, parser.parse_args(["varadhan", "--config", str(tmp_path / "config.txt")]))
    assert again == cfg
