import json

import numpy as np
import pytest

from conewalk.cli import main
from conewalk.diffgroup import Diffeo
from conewalk.io import config_hash, read_diffeo, read_path, read_table, write_diffeo, write_path
from conewalk.grid_paths import Path1D, TimeGrid


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sample_cone_writes_files_and_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["sample", "--geometry", "cone", "--sigma", "1", "--T", "1", "--N", "128", "--M", "10", "--seed", "7"]
    assert run(capsys, *args, "--out", str(a))[0] == 0
    assert run(capsys, *args, "--out", str(b), "--threads", "8")[0] == 0
    files = sorted(p.name for p in a.iterdir())
    assert len(files) == 11 and "manifest.json" in files
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert {k: man[k] for k in ("sigma", "T", "N", "seed", "count")} == {
        "sigma": 1.0, "T": 1.0, "N": 128, "seed": 7, "count": 10}
    assert (a / "path_00000.csv").read_text().startswith("# config_hash=" + man["config_hash"])


def test_sample_zero_paths_is_usage_error(tmp_path, capsys):
    code, _, err = run(capsys, "sample", "--M", "0", "--out", str(tmp_path))
    assert code == 2 and "M" in err


def test_env_seed_and_config_precedence(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"M": 3, "N": 32, "geometry": "r2"}))
    monkeypatch.setenv("CONEWALK_SEED", "11")
    run(capsys, "sample", "--config", str(cfg), "--M", "2", "--out", str(tmp_path / "o"))
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["seed"] == 11 and man["count"] == 2 and man["N"] == 32
    cfg.write_text(json.dumps({"nested": {"a": 1}}))
    assert run(capsys, "sample", "--config", str(cfg))[0] == 2
    monkeypatch.setenv("CONEWALK_SEED", "x")
    assert run(capsys, "sample", "--out", str(tmp_path / "p"))[0] == 2


def test_decompose_roundtrip(tmp_path, capsys):
    run(capsys, "sample", "--geometry", "r2", "--N", "128", "--M", "1", "--start", "1,0.5", "--out", str(tmp_path))
    code, out, _ = run(capsys, "decompose", str(tmp_path / "path_00000.csv"), "--out", str(tmp_path / "d"))
    assert code == 0
    doc = json.loads(out)
    assert doc["rho"] > 0 and 0 <= doc["alpha"] < 2 * np.pi
    assert {p.name for p in (tmp_path / "d").iterdir()} == {"phi.csv", "phi.json", "psi.csv", "decomposition.json"}
    header, data, _ = read_table(tmp_path / "d" / "phi.csv")
    assert header == ["tau", "phi"] and data.shape == (129, 2)
    assert run(capsys, "decompose", str(tmp_path / "missing.csv"))[0] == 2


def test_path_csv_roundtrip(tmp_path):
    g = TimeGrid(0.0, 2.0, 8)
    p = Path1D(g, np.sin(g.nodes) / 3)
    write_path(tmp_path / "p.csv", p, "abc")
    q = read_path(tmp_path / "p.csv")
    assert np.array_equal(q.values, p.values) and q.grid == g
    assert config_hash({"a": 1, "out": "x"}) == config_hash({"a": 1, "out": "y"})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_verify_suites(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "lorentz", "--gamma", "0.693", "--M", "5", "--N", "128")
    doc = json.loads(out)
    assert code == 0 and doc["pass"] is True and doc["estimate"] < 1e-10
    assert set(doc) >= {"name", "config", "estimate", "std_error", "pass", "details"}
    code, out, _ = run(capsys, "verify", "appendix-b", "--N", "128,256", "--M", "3", "--trace-dir", str(tmp_path))
    assert "common_slope" in json.loads(out)["details"]
    assert (tmp_path / "appendix_b_refinement.csv").exists()
    assert run(capsys, "verify", "nope")[0] == 2


def test_verify_split_point_validation(capsys):
    code, out, _ = run(capsys, "verify", "splitting-roundtrip", "--M", "2", "--N", "16", "--t-star", "0.5")
    assert code == 0
    code, _, err = run(capsys, "verify", "splitting-roundtrip", "--M", "2", "--N", "16", "--t-star", "0.51")
    assert code == 2 and "node" in err


def test_geodesic_command(tmp_path, capsys):
    code, out, _ = run(capsys, "geodesic", "1", "0", "1", "1.5708")
    doc = json.loads(out)
    assert code == 0 and doc["case"] == 1 and doc["distance"] == pytest.approx(1.41421, abs=1e-5)
    doc = json.loads(run(capsys, "geodesic", "1", "0", "2", "4.7124", "--csv", str(tmp_path / "g.csv"))[1])
    assert doc["case"] == 2 and doc["distance"] == 3.0
    assert json.loads(run(capsys, "geodesic", "1", "0", "2", "7.0")[1])["case"] == 3
    assert run(capsys, "geodesic", "--", "-1", "0", "1", "1")[0] == 2


def test_kernel_command(capsys, tmp_path):
    code, out, _ = run(capsys, "kernel", "--method", "mc", "--M", "500", "--N", "64", "--trace-dir", str(tmp_path))
    doc = json.loads(out)
    assert code == 0 and doc["details"]["probability_sum"] == pytest.approx(1.0)
    assert (tmp_path / "winding_histogram.csv").exists()
    code, out, _ = run(capsys, "kernel", "--method", "pde", "--dd", "0.05")
    assert code == 0 and json.loads(out)["estimate"] > 0
    assert run(capsys, "kernel", "--A", "0,1")[0] == 2


def test_failed_check_exits_one(capsys):
    # eight cells are far too coarse for the action identity to hold to 1e-2
    code, out, _ = run(capsys, "verify", "appendix-b", "--N", "4,8", "--M", "3")
    assert code == 1 and json.loads(out)["pass"] is False


def test_diffeo_roundtrip(tmp_path):
    g = TimeGrid(0.0, 1.0, 64)
    phi = Diffeo.named(g, "exponential", {"a": 1.5})
    write_diffeo(tmp_path / "phi.csv", phi)
    back = read_diffeo(tmp_path / "phi.csv")
    assert back.family.name == "exponential" and back.family.params["a"] == 1.5
    assert np.array_equal(back.values, phi.values)
    (tmp_path / "phi.json").unlink()
    tab = read_diffeo(tmp_path / "phi.csv")
    assert tab.family is None and np.array_equal(tab.values, phi.values)
