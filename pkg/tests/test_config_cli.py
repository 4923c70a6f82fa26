import json

import pytest

from discevo import acceptance, cli
from discevo.acceptance import CriterionResult
from discevo.config import ConfigError, load_config


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_ini_and_json(tmp_path):
    cfg = load_config(_write(tmp_path, "[operator]\nalpha = 1j ; comment\nwindow = -10, 10\n[time]\nT = 2\n"))
    assert cfg.operator.alpha == 1j and cfg.operator.window == (-10, 10) and cfg.T == 2
    cfg2 = load_config(_write(tmp_path, '{"operator": {"s": 2}, "probe": {"eps": 0.5}}', "run.json"))
    assert cfg2.operator.s == 2 and cfg2.eps == 0.5
    assert cfg.digest() != cfg2.digest()


@pytest.mark.parametrize("text,line", [
    ("seed = 1\n", 1),
    ("[experiment]\nseed = 1\nbogus = 2\n", 3),
    ("[operator]\n\nwindow = 5\n", 3),
    ("[operator]\ns = 1\ns = 2\n", 3),
    ("[time]\nsteps = 3\nT = -1\n", 3),
    ("[probe]\nexperiment = nope\n", 2),
])
def test_ini_errors_carry_line(tmp_path, text, line):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, text))
    assert info.value.line == line
    assert f"run.ini:{line}:" in str(info.value)


def test_json_errors(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, '{\n "operator": {\n  "zzz": 1\n }\n}', "bad.json"))
    assert info.value.line == 3
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "{oops", "broken.json"))


def test_missing_config_file(tmp_path, capsys):
    assert cli.main(["simulate", "--config", str(tmp_path / "none.ini"), "--out", str(tmp_path)]) == 1
    assert "cannot read config" in capsys.readouterr().err


def test_bad_usage_exit_code(tmp_path):
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 1
    assert cli.main(["simulate", "--tolerance-scale", "0", "--out", str(tmp_path)]) == 1


SMALL = "[operator]\nwindow = -24, 24\n[time]\nsteps = 3\n[favard]\nn_max = 6\n"


@pytest.mark.parametrize("command,files", [
    ("simulate", {"trajectory.csv", "report.json"}),
    ("models", {"heat_model.csv", "schrodinger_model.csv", "higher_model.csv", "report.json"}),
    ("eigen", {"eigenvectors.csv", "report.json"}),
    ("favard", {"families.json", "report.json"}),
    ("stationary", {"shells.csv", "report.json"}),
])
def test_subcommands_write_outputs(tmp_path, command, files):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert cli.main([command, "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    names = {p.name for p in out.iterdir()}
    assert files | {"manifest.json"} <= names
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_sha256"] and manifest["subcommand"] == command
    assert set(manifest["versions"]) >= {"numpy", "scipy", "python"}


@pytest.mark.parametrize("experiment", ["entire", "decay", "indicator", "sharpness"])
def test_probe_deterministic(tmp_path, experiment):
    cfg = _write(tmp_path, SMALL)
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert cli.main(["probe", "--experiment", experiment, "--config", str(cfg),
                         "--out", str(out), "--seed", "3", "--quiet"]) == 0
        outs.append(out)
    for name in ("report.json", "phi.csv"):
        a, b = outs[0] / name, outs[1] / name
        if a.exists():
            assert a.read_bytes() == b.read_bytes()
    doc = json.loads((outs[0] / "report.json").read_text())
    assert doc["experiment"] == experiment


def test_verify_exit_codes(tmp_path, monkeypatch, capsys):
    def fake(passed):
        return lambda seed=0, tol_scale=1.0, numbers=None: [
            CriterionResult(1, "a", True, {"x": 1.0}, 1.0, True, 0.0),
            CriterionResult(2, "b", passed, {"x": 2.0}, 1.0, True, 0.0)]

    monkeypatch.setattr(acceptance, "run_all", fake(True))
    assert cli.main(["verify", "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setattr(acceptance, "run_all", fake(False))
    assert cli.main(["verify", "--out", str(tmp_path / "b")]) == 2
    lines = capsys.readouterr().out.splitlines()
    assert any("FAIL" in line for line in lines)
    doc = json.loads((tmp_path / "b" / "verify.json").read_text())
    assert not doc["all_passed"] and doc["criteria"][-1]["criterion"] == 12
