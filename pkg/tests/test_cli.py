import json
import os
import subprocess
import sys

import pytest

from legkit import __version__
from legkit.cli import main
from legkit.model import serialize_model


def _tello_doc(tello):
    return json.loads(serialize_model(tello))


def _read(path):
    return json.loads(path.read_text())


def test_validate_builtin(capsys):
    assert main(["validate", "builtin:tello"]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_bad_inertia(tmp_path, capsys, tello):
    doc = _tello_doc(tello)
    body = next(b for b in doc["bodies"] if b["name"] == "thigh")
    body["inertia"] = [1.0, 0.0, 0.0, 0.1, 0.0, 0.1]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", str(path)]) == 1
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1
    assert "thigh" in lines[0]


def test_validate_io_and_parse_errors(tmp_path):
    assert main(["validate", str(tmp_path / "missing.json")]) == 2
    assert main(["validate", "builtin:nope"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x",\n "bodies": [\n oops]}')
    assert main(["validate", str(bad)]) == 3


def test_argument_errors(tmp_path):
    assert main(["cii"]) == 3
    assert main(["frobnicate"]) == 3
    assert main(["cii", "builtin:tello", "--out", str(tmp_path), "--q0", "knee=x"]) == 3
    assert main(["cii", "builtin:tello", "--out", str(tmp_path), "--range-a", "-3", "0"]) == 1


def test_cii_small_grid(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["cii", "builtin:tello", "--resolution", "4", "3", "--out", str(out)]) == 0
    assert "rcii" in capsys.readouterr().out
    lines = (out / "cii_values.csv").read_text().splitlines()
    assert lines[0] == "i,j,haa,hfe,dependent_angle,cii"
    assert len(lines) == 13
    summary = _read(out / "cii_summary.json")
    assert summary["rcii"] > 0
    manifest = _read(out / "manifest.json")
    assert "wall_time" in manifest
    for name in manifest["outputs"]:
        assert (out / name).is_file()
    assert {"cii_heatmap.svg", "posture_qmax.svg", "posture_qmin.svg"} <= set(manifest["outputs"])


def test_cii_massless(tmp_path):
    assert main(["cii", "builtin:massless_leg", "--resolution", "5", "5",
                 "--out", str(tmp_path)]) == 0
    assert abs(_read(tmp_path / "cii_summary.json")["rcii"]) < 1e-10


def test_cii_compare_serial(tmp_path, capsys):
    assert main(["cii", "builtin:tello", "--resolution", "8", "8", "--compare", "serial",
                 "--out", str(tmp_path)]) == 0
    doc = _read(tmp_path / "cii_compare.json")
    labels = [r["label"] for r in doc["rows"]]
    assert labels[0] == "tello-reference"
    assert labels[1].endswith("(serial)")
    assert doc["rows"][0]["rcii"] < doc["rows"][1]["rcii"]


def test_polytope_vertices(tmp_path):
    assert main(["polytope", "--kind", "differential", "--gear", "1", "--tau-max", "10",
                 "--out", str(tmp_path / "d")]) == 0
    lines = (tmp_path / "d" / "tcp_vertices.csv").read_text().splitlines()
    assert lines[1:] == ["0,20,0", "1,0,20", "2,-20,0", "3,0,-20"]
    assert main(["polytope", "--kind", "serial", "--gear", "2", "--tau-max", "10",
                 "--out", str(tmp_path / "s")]) == 0
    lines = (tmp_path / "s" / "tcp_vertices.csv").read_text().splitlines()
    assert sorted(lines[1:]) == sorted(["0,20,20", "1,-20,20", "2,-20,-20", "3,20,-20"])


def test_polytope_sizing(tmp_path, capsys):
    assert main(["polytope", "--size", "--require", "20", "20", "--tau-max", "10",
                 "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "N_d = 1, N_s = 2" in out
    assert main(["polytope", "--require", "30", "0", "--out", str(tmp_path / "x")]) == 0
    assert "NOT contained" in capsys.readouterr().out


def test_jump_default_with_compare(tmp_path, capsys):
    assert main(["jump", "--compare-serial", "--stride", "10", "--out", str(tmp_path)]) == 0
    comp = _read(tmp_path / "compare.json")
    assert 0.5 <= comp["ratio"] <= 0.65
    summary = _read(tmp_path / "summary.json")
    assert summary["phase_sequence"] == ["Ground", "Thrust", "Aerial", "Ground"]
    manifest = _read(tmp_path / "manifest.json")
    for name in manifest["outputs"]:
        assert (tmp_path / name).is_file()
    assert "trajectory.csv" in manifest["outputs"]


def test_jump_zero_thrust_warns(tmp_path, capsys):
    cfg = tmp_path / "zero.json"
    cfg.write_text(json.dumps({"thrust_bezier": [0.0] * 6, "t_max": 0.5}))
    assert main(["jump", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert "warning" in capsys.readouterr().err
    text = (tmp_path / "o" / "summary.json").read_text()
    assert '"apex": 0.0' in text


def test_jump_abort(tmp_path, capsys):
    cfg = tmp_path / "abort.json"
    cfg.write_text(json.dumps({"stance_hfe": -0.7}))
    out = tmp_path / "o"
    assert main(["jump", "--config", str(cfg), "--out", str(out)]) == 4
    state = _read(out / "last_state.json")
    assert {"clock", "q", "qdot", "psi", "grf"} <= set(state)
    assert "last_state.json" in _read(out / "manifest.json")["outputs"]


def test_jump_config_errors(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dt": -1.0}))
    assert main(["jump", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 3
    cfg.write_text(json.dumps({"unknown_key": 1}))
    assert main(["jump", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 3
    cfg.write_text(json.dumps({"stance_hfe": -1.4}))
    assert main(["jump", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 1
    assert main(["jump", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "d")]) == 2


@pytest.mark.parametrize("argv", [
    ["cii", "builtin:tello", "--resolution", "3", "3"],
    ["polytope", "--require", "20", "20", "--size"],
    ["jump", "--config", "CFG", "--stride", "20"],
])
def test_outputs_byte_identical_without_meta(tmp_path, argv):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"t_max": 0.3}))
    argv = [str(cfg) if a == "CFG" else a for a in argv]
    # same command line both times; the first result is moved aside
    for run in ("a", "b"):
        assert main(argv + ["--no-meta", "--out", str(tmp_path / "out")]) == 0
        (tmp_path / "out").rename(tmp_path / run)
    names = sorted(os.listdir(tmp_path / "a"))
    assert names == sorted(os.listdir(tmp_path / "b"))
    assert "wall_time" not in _read(tmp_path / "a" / "manifest.json")
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_writes_only_under_out(tmp_path, monkeypatch):
    work = tmp_path / "work"
    work.mkdir()
    monkeypatch.chdir(work)
    assert main(["polytope", "--out", str(tmp_path / "out")]) == 0
    assert main(["cii", "builtin:tello", "--resolution", "2", "2", "--out", str(tmp_path / "out2")]) == 0
    assert os.listdir(work) == []
    assert sorted(os.listdir(tmp_path)) == ["out", "out2", "work"]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "legkit", "--version"], capture_output=True, text=True)
    assert r.returncode == 0
    assert __version__ in r.stdout
