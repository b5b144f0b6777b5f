"""Command-line front-end tests, run in-process against cli.main."""

import json
import os

import numpy as np
import pytest

from vesiclebif import cli
from vesiclebif.linear import characteristic_roots


def run(args):
    return cli.main(args)


def test_roots_verb_and_manifest(tmp_path, con):
    out = tmp_path / "r"
    assert run(["roots", "--out", str(out), "--l", "3"]) == 0
    rows = (out / "roots.csv").read_text().strip().splitlines()
    assert rows[0] == "l,root,crossing_slope"
    got = sorted(float(r.split(",")[1]) for r in rows[1:])
    expect = characteristic_roots(3, con)
    assert np.allclose(got, expect, atol=1e-12)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "roots"
    assert len(manifest["config_sha256"]) == 64
    assert "roots.csv" in manifest["outputs"]


def test_outputs_are_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert run(["mode-table", "--out", str(out), "--l", "2"]) == 0
    assert (out1 / "mode_table.csv").read_bytes() \
        == (out2 / "mode_table.csv").read_bytes()


def test_mode_table_contents(tmp_path):
    out = tmp_path / "m"
    assert run(["mode-table", "--out", str(out), "--l", "2"]) == 0
    rows = (out / "mode_table.csv").read_text().strip().splitlines()
    assert rows[0] == "l,root,sigma,tau,pitchfork,tangential,crossing_slope"
    for r in rows[1:]:
        fields = r.split(",")
        assert fields[0] == "2"
        assert float(fields[3]) == 0.0  # constant moduli: tau = 0
        assert fields[4] == "0"  # even degree: transcritical


def test_unknown_config_key_is_config_error(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"no_such_key": 1}))
    assert run(["roots", "--config", str(cfg),
                "--out", str(tmp_path / "x")]) == cli.EXIT_CONFIG


def test_bad_subgroup_is_config_error(tmp_path):
    assert run(["direction", "--subgroup", "K7",
                "--out", str(tmp_path / "x")]) == cli.EXIT_CONFIG


def test_invalid_continuation_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"continuation": {"ds": -1.0}}))
    assert run(["roots", "--config", str(cfg),
                "--out", str(tmp_path / "x")]) == cli.EXIT_CONFIG


def test_direction_emits_invariant_vector(tmp_path):
    out = tmp_path / "d"
    assert run(["direction", "--out", str(out), "--l", "4",
                "--subgroup", "OxZ2c", "--lmax", "8"]) == 0
    rep = json.loads((out / "direction.json").read_text())
    assert rep["dimension"] == 1
    comp = {m: v for (_, m, v) in rep["coefficients"]}
    assert comp[0] / comp[4] == pytest.approx(168.0, rel=1e-9)
    assert (out / "direction.obj").exists()


def test_direction_reports_non_one_dimensional_space(tmp_path):
    out = tmp_path / "d0"
    assert run(["direction", "--out", str(out), "--l", "2",
                "--subgroup", "T", "--lmax", "8"]) == 0
    rep = json.loads((out / "direction.json").read_text())
    assert rep["dimension"] != 1
    assert "coefficients" not in rep


def test_nodal_export_fails_without_direction(tmp_path):
    out = tmp_path / "n0"
    assert run(["nodal-export", "--out", str(out), "--l", "2",
                "--subgroup", "T", "--lmax", "8"]) == cli.EXIT_FAIL


def test_nodal_export_writes_mesh_and_table(tmp_path):
    out = tmp_path / "n"
    assert run(["nodal-export", "--out", str(out), "--l", "3",
                "--subgroup", "D6d", "--lmax", "8"]) == 0
    rows = (out / "nodal.csv").read_text().strip().splitlines()
    assert rows[0] == "theta,psi,value,sign"
    signs = {r.split(",")[3] for r in rows[1:]}
    assert {"-1", "1"} <= signs  # a genuine two-phase pattern
    obj = (out / "nodal.obj").read_text()
    assert obj.startswith("v ") and "\nf " in obj


def test_residual_check_passes(tmp_path):
    out = tmp_path / "rc"
    assert run(["residual-check", "--out", str(out), "--lmax", "8"]) == 0
    rows = (out / "residual_check.csv").read_text().strip().splitlines()
    assert len(rows) == 31
    worst = max(float(x) for r in rows[1:] for x in r.split(",")[1:])
    assert worst <= 1e-9


def test_continue_writes_branch_files(tmp_path):
    out = tmp_path / "c"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "l": [3], "l_max": 8,
        "continuation": {"max_points": 4, "t0": 1e-2}}))
    assert run(["continue", "--config", str(cfg), "--out", str(out)]) == 0
    files = sorted(os.listdir(out))
    assert "branch_l3_p_plus.csv" in files
    assert "branch_l3_p_minus.csv" in files
    assert "branch_l3_p_plus.jsonl" in files
    assert any(f.startswith("branch_l3_p_plus_point") and f.endswith(".obj")
               for f in files)
    rows = (out / "branch_l3_p_plus.csv").read_text().strip().splitlines()
    assert rows[0] == "s,lambda,amplitude,energy,min_J"
    assert len(rows) == 5  # header + max_points
    pts = [json.loads(line)
           for line in (out / "branch_l3_p_plus.jsonl").read_text()
           .strip().splitlines()]
    assert all(p["residual_norm"] < 1e-8 for p in pts)
    assert all(p["min_J"] > 0 for p in pts)


def test_selfcheck_passes_with_default_config(tmp_path, capsys):
    assert run(["selfcheck", "--out", str(tmp_path / "s")]) == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text
    assert "checks passed" in text


def test_load_config_merges_and_validates(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"l_max": 12, "subgroup": "O-"}))
    cfg = cli.load_config(str(cfg_file), {"seed": 3})
    assert cfg["l_max"] == 12
    assert cfg["subgroup"] == "O-"
    assert cfg["seed"] == 3
    with pytest.raises(cli.RunConfigError):
        cli.load_config(str(tmp_path / "missing.json"))
