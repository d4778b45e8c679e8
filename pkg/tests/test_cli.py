import json
import os

import numpy as np
import pytest

from fracmag import cli
from fracmag.field import RadialGrid, read_field_csv
from fracmag.io import atomic_write_text, read_csv_table, to_jsonable, write_csv_rows


def _run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    return code, capsys.readouterr().err


def _err(stderr):
    return json.loads(stderr.strip().splitlines()[-1])


def test_specfun_table_roundtrip(tmp_path, capsys):
    out = tmp_path / "k.csv"
    code, _ = _run(capsys, "specfun-table", "--out", out, "nu=0.5", "zeta=1,2")
    assert code == 0
    header, rows = read_csv_table(str(out))
    assert header == ["nu", "zeta", "k", "est_rel_err"]
    np.testing.assert_allclose(rows[:, 2], np.sqrt(np.pi / (2 * rows[:, 1])) * np.exp(-rows[:, 1]),
                               rtol=1e-12)
    text = out.read_text()
    assert text.startswith("# fracmag ") and "# nu=0.5" in text


def test_kernel_check_json(tmp_path, capsys):
    out = tmp_path / "k.json"
    code, _ = _run(capsys, "kernel-check", "--format", "json", "--out", out, "s=0.3,0.7", "m=1")
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["columns"] == ["s", "m", "kernel_mass", "target", "abs_err"]
    assert len(doc["rows"]) == 2 and max(r["abs_err"] for r in doc["rows"]) < 1e-8
    assert "verb=kernel-check" in doc["provenance"]


def test_config_file_and_override_precedence(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("# table settings\nnu=1.5\nzeta=3  # inline\n\n")
    out = tmp_path / "t.csv"
    code, _ = _run(capsys, "specfun-table", "--config", conf, "--out", out, "zeta=4")
    assert code == 0
    _, rows = read_csv_table(str(out))
    assert rows.shape[0] == 1 and rows[0, 0] == 1.5 and rows[0, 1] == 4.0


def test_apply_op_and_energy(tmp_path, capsys):
    out = tmp_path / "op.csv"
    code, _ = _run(capsys, "apply-op", "--out", out, "potential=linear:0.5", "grid=cart:9:5",
                   "points=0,0,0;0.5,0,0")
    assert code == 0
    header, rows = read_csv_table(str(out))
    assert header[:3] == ["x", "y", "z"] and rows.shape == (2, 6)
    out = tmp_path / "e.json"
    code, _ = _run(capsys, "energy", "--out", out, "grid=cart:9:5", "s=0.5")
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["seminorm_sq"] > 0 and doc["norm_sq"] > doc["seminorm_sq"]


def test_groundstate_outputs(tmp_path, capsys):
    out = tmp_path / "gs.csv"
    code, _ = _run(capsys, "groundstate", "--out", out, "grid=radial:24:6", "p=2.5")
    assert code == 0
    u = read_field_csv(str(out))
    assert isinstance(u.grid, RadialGrid) and u.grid.n == 24
    summary = json.loads((tmp_path / "gs.json").read_text())
    assert summary["converged"] and summary["energy"] > 0


def test_exit_codes(tmp_path, capsys):
    code, err = _run(capsys, "specfun-table", "--out", tmp_path / "x.csv")
    assert code == 2 and _err(err)["exit_code"] == 2
    code, err = _run(capsys, "specfun-table", "--out", tmp_path / "x.csv", "bogus=1")
    assert code == 2 and "bogus" in _err(err)["message"]
    code, err = _run(capsys, "groundstate", "--out", tmp_path / "g.csv", "p=1.5")
    assert code == 2 and "admissible range" in _err(err)["message"]
    code, err = _run(capsys, "energy", "--out", tmp_path / "e.json", "grid=cart:40:6")
    assert code == 3 and _err(err)["error"] == "CapacityError"
    code, err = _run(capsys, "groundstate", "--out", tmp_path / "g.csv", "grid=radial:24:6",
                     "max_iters=2")
    assert code == 4 and _err(err)["error"] == "NonConvergenceError"
    code, _ = _run(capsys, "energy", "--out", tmp_path / "e.json", "field=file:/nonexistent")
    assert code == 2
    assert not os.path.exists(tmp_path / "g.csv")


def test_bad_values_rejected():
    for spec in ("linear:", "radial:a,b", "spiral:1"):
        with pytest.raises(ValueError):
            cli.parse_potential(spec)
    with pytest.raises(ValueError):
        cli.parse_grid("cart:9")
    with pytest.raises(ValueError):
        cli.parse_config("groundstate", None, ["allow_critical=maybe"], None, None)
    with pytest.raises(cli.ConfigError):
        cli.parse_config("groundstate", None, ["p=2.5"], None, "json")


def test_default_out_path():
    cfg = cli.parse_config("energy", None, ["s=0.4"], None, None)
    assert cfg.out_path == "energy.json" and cfg.params["s"] == 0.4
    assert cfg.params["grid"] == "cart:17:6"


def test_io_helpers(tmp_path):
    p = tmp_path / "sub" / "t.csv"
    write_csv_rows(str(p), ["a", "b"], [(1.0, 2), (0.1, 3)], ["note"])
    assert p.read_text().splitlines()[0] == "# note"
    header, rows = read_csv_table(str(p))
    assert header == ["a", "b"] and rows[1, 0] == 0.1
    atomic_write_text(str(p), "x\n")
    assert p.read_text() == "x\n"
    assert [f for f in os.listdir(p.parent) if f.startswith(".tmp-")] == []
    doc = to_jsonable({"a": np.float64(1.5), "b": np.arange(2), "c": 1 + 2j, "d": np.bool_(True)})
    assert json.loads(json.dumps(doc)) == {"a": 1.5, "b": [0, 1], "c": [1.0, 2.0], "d": True}
