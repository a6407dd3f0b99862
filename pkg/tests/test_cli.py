import json

import pytest

from pauli_torsion.cli import ConfigError, default_config_path, load_config, main

SMALL_DISK = """
[domain]
kind = "disk"
R = 1.0

[field]
B0 = 1.0

[grid]
spacing = 0.0625

[spectrum]
h = [0.4, 0.3]

[bounds]
h = [0.3]

[disk]
h = [0.2, 0.1]
m_max = 1
k_max = 1
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "disk.toml"
    path.write_text(SMALL_DISK)
    return path


def run(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("name", ["square", "disk", "triangle", "ellipse", "dumbbell", "verify"])
def test_shipped_configs_parse(name):
    cfg = load_config(default_config_path(name))
    assert cfg.spacing > 0
    assert len(cfg.digest) == 16


def test_potential_pipeline(cfg_file, tmp_path, capsys):
    out = tmp_path / "out"
    code, text, _ = run(["potential", cfg_file, "--out", out], capsys)
    assert code == 0
    assert "PASS closed-form psi_min" in text
    header = (out / "psi.csv").read_text().splitlines()[0]
    assert header.startswith("# config_sha256 ")
    doc = json.loads((out / "minimizers.json").read_text())
    assert len(doc["minimizers"]) == 1


def test_outputs_are_reproducible(cfg_file, tmp_path, capsys):
    for sub in ("a", "b"):
        assert run(["potential", cfg_file, "--out", tmp_path / sub], capsys)[0] == 0
    assert (tmp_path / "a" / "psi.csv").read_bytes() == (tmp_path / "b" / "psi.csv").read_bytes()


def test_overrides_change_the_hash(cfg_file):
    a = load_config(cfg_file)
    b = load_config(cfg_file, ["grid.spacing=0.125"])
    assert b.spacing == 0.125
    assert a.digest != b.digest
    assert load_config(cfg_file).digest == a.digest


def test_bounds_pipeline(cfg_file, tmp_path, capsys):
    code, text, _ = run(["bounds", cfg_file, "--out", tmp_path], capsys)
    assert code == 0, text
    doc = json.loads((tmp_path / "bounds.json").read_text())
    assert doc["ledgers"][0]["h"] == 0.3
    assert "FAIL" not in text


def test_spectrum_pipeline(cfg_file, tmp_path, capsys):
    code, text, _ = run(["spectrum", cfg_file, "--out", tmp_path], capsys)
    assert code == 0, text
    assert (tmp_path / "sweep_weighted_cr.csv").exists()


def test_spectrum_reports_unresolved_sweep(cfg_file, tmp_path, capsys):
    # too few resolvable h values: the rate check fails and the exit code says so
    code, text, _ = run(["spectrum", cfg_file, "--out", tmp_path, "--h", "0.05,0.04,0.03,0.02"], capsys)
    assert code == 1
    assert "FAIL weighted_cr exponential rate" in text


def test_disk_pipeline(cfg_file, tmp_path, capsys):
    code, text, _ = run(["disk", cfg_file, "--out", tmp_path], capsys)
    assert code == 0
    assert "Temple enclosure" in text
    rows = (tmp_path / "disk_channels.csv").read_text().splitlines()
    assert rows[2].startswith("m,k,h")
    assert len(rows) == 3 + 2 * 2 * 2


def test_malformed_toml_names_the_line(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[domain]\nkind = \"disk\"\nR = \n")
    code, _, err = run(["potential", bad, "--out", tmp_path], capsys)
    assert code == 2
    assert "line 3" in err


def test_bad_field_is_named(cfg_file, tmp_path, capsys):
    code, _, err = run(["potential", cfg_file, "--out", tmp_path, "--set", "grid.spacing=-1"], capsys)
    assert code == 2
    assert "[grid] spacing" in err
    code, _, err = run(["potential", cfg_file, "--out", tmp_path, "--set", 'domain.kind="hexagon"'], capsys)
    assert code == 2
    assert "[domain]" in err


def test_unknown_config_name(capsys):
    code, _, err = run(["potential", "no-such-config"], capsys)
    assert code == 2
    assert "not found" in err


def test_output_directory_from_environment(cfg_file, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PAULI_TORSION_OUT", str(tmp_path / "env"))
    assert run(["potential", cfg_file], capsys)[0] == 0
    assert (tmp_path / "env" / "psi.csv").exists()


def test_unwritable_output(cfg_file, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run(["potential", cfg_file, "--out", blocker / "sub"], capsys)
    assert code != 0
    assert err


def test_verify_subset(capsys):
    code, text, _ = run(["verify", "--only", "5,8"], capsys)
    assert code == 0
    assert "PASS criterion  5" in text and "PASS criterion  8" in text


def test_verify_reports_failure(capsys):
    code, text, _ = run(["verify", "--only", "4"], capsys)
    assert code == 1
    assert "FAIL criterion  4" in text
