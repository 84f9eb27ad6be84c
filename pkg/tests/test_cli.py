import json

import numpy as np
import pytest

from pairrelax.cli import ConfigError, main, parse_config_file, resolve_config


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def summary(path):
    return json.loads((path / "summary.json").read_text())


def test_solve_local_lattice(tmp_path, capsys):
    assert run(tmp_path, "solve", "--family", "local", "--lc", "0.1", "--n", "360") == 0
    s = summary(tmp_path)
    assert s["schema"] == 1 and s["results"]["kind"] == "DiracLattice"
    for name in ("relaxation.json", "decomposition.csv", "coefficients.csv", "atoms.csv"):
        assert name in s["artifacts"]
    assert len((tmp_path / "atoms.csv").read_text().splitlines()) == 11
    assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["kind"] == "DiracLattice"


def test_bad_parameter_exits_2(tmp_path, capsys):
    assert run(tmp_path, "solve", "--G", "-1") == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config"
    assert json.loads((tmp_path / "error.json").read_text())["exit_code"] == 2


def test_unknown_config_key_exits_2(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("bogus = 3\n")
    assert run(tmp_path, "solve", "--config", str(cfg)) == 2


def test_solver_failure_exits_3(tmp_path):
    assert run(tmp_path, "solve", "--n", "100", "--max_iter", "2") == 3
    assert json.loads((tmp_path / "error.json").read_text())["error"] == "solver"


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nfamily = local\nlc = 0.2   # trailing\nn = 50\n")
    parsed = parse_config_file(cfg)
    assert parsed == {"family": "local", "lc": "0.2", "n": "50"}
    merged = resolve_config("solve", parsed, {"n": "80", "lc": None})
    assert merged["n"] == 80 and merged["lc"] == 0.2 and merged["family"] == "local"
    with pytest.raises(ConfigError):
        resolve_config("solve", {"n": "many"}, {})
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign\n")
    with pytest.raises(ConfigError):
        parse_config_file(bad)


def test_content_hash_is_deterministic(tmp_path):
    args = ("solve", "--family", "morse1d", "--n", "120")
    assert run(tmp_path, *args) == 0
    first = summary(tmp_path)
    assert run(tmp_path, *args) == 0
    second = summary(tmp_path)
    assert first["content_hash"] == second["content_hash"]
    assert first["artifacts"] == second["artifacts"]


def test_tabulated_zero_potential(tmp_path):
    tab = tmp_path / "w.txt"
    tab.write_text("1 6\n0 0 0 0 0 0\n")
    out = tmp_path / "o"
    assert main(["solve", str(tab), "--out", str(out)]) == 0
    res = summary(out)["results"]
    assert res["E_R"] == 0.0 and res["kind"] == "Constant"


def test_recover_and_certify(tmp_path):
    args = ("--family", "local", "--lc", "0.1", "--n", "120")
    assert run(tmp_path / "r", "recover", *args) == 0
    assert "rho.csv" in summary(tmp_path / "r")["artifacts"]
    assert run(tmp_path / "c", "certify", *args) == 0
    cert = json.loads((tmp_path / "c" / "certificate.json").read_text())
    assert cert["alpha"] == pytest.approx(1.0)


def test_particles_command(tmp_path):
    assert run(tmp_path, "particles", "--N", "20", "--dt", "1", "--t_end", "20", "--n", "100") == 0
    res = summary(tmp_path)["results"]
    assert res["time"] == pytest.approx(20.0)
    assert "width" in res


def test_sweep_command(tmp_path):
    assert run(tmp_path, "sweep", "--n", "40", "--steps", "2") == 0
    s = summary(tmp_path)
    assert s["results"]["points"] == 4
    assert len((tmp_path / "table.jsonl").read_text().splitlines()) == 4


def test_threedelta_command(tmp_path):
    tab = tmp_path / "cos.txt"
    x = np.arange(32) / 32
    tab.write_text("1 32\n" + " ".join(repr(float(v)) for v in np.cos(2 * np.pi * x)) + "\n")
    out = tmp_path / "o"
    assert main(["threedelta", "--tabulated", str(tab), "--s_points", "16", "--out", str(out)]) == 0
    res = summary(out)["results"]
    assert res["s_star"] == 0.5 and res["E_star"] == pytest.approx(0.0, abs=1e-12)
