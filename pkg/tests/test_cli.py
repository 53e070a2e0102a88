import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ensemble_rc import cli, config
from ensemble_rc.io import read_csv, write_csv

SMOKE = """
experiment: mc-esn
system: {type: esn, sigma: 0.01}
ensemble: {L: 20}
protocol: {washout: 100, train: 400, test: 400}
capacity: {tau_max: 5, surrogates: 10}
"""


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_validate_ok_and_errors(tmp_path, capsys):
    assert cli.main(["validate", str(_write(tmp_path, SMOKE))]) == 0
    assert json.loads(capsys.readouterr().out)["ensemble"]["L"] == 20
    assert cli.main(["validate", str(_write(tmp_path, "experiment: mc-esn\nbogus: 1\n"))]) == 2
    err = capsys.readouterr().err.strip().splitlines()[-1]
    rec = json.loads(err)
    assert rec["code"] == 2 and "bogus" in rec["message"]
    assert cli.main(["validate", str(_write(tmp_path, "ensemble: {L: -3}\n"))]) == 2
    assert cli.main(["validate", str(_write(tmp_path, "system: {type: esn, rho: fast}\n"))]) == 2
    assert cli.main(["validate", str(tmp_path / "missing.yaml")]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_scientific_notation_and_int_coercion():
    cfg = config.resolve(config.yaml.load("ensemble: {L: 1e3}\ncapacity: {ridge: 1e-6}\n",
                                          Loader=config._Loader))
    assert cfg["ensemble"]["L"] == 1000 and isinstance(cfg["ensemble"]["L"], int)
    assert cfg["capacity"]["ridge"] == 1e-6


def test_bundled_configs_validate():
    import ensemble_rc

    folder = Path(ensemble_rc.__file__).parent / "configs"
    files = sorted(folder.glob("*.yaml"))
    assert len(files) >= 10
    for f in files:
        config.load(f)


def test_run_plot_and_manifest(tmp_path, capsys, monkeypatch):
    out = tmp_path / "run"
    assert cli.main(["run", str(_write(tmp_path, SMOKE)), "-o", str(out)]) == 0
    man = json.loads((out / "run_manifest.json").read_text())
    for key in ("config", "artifact_version", "seed", "wall_clock_s", "timings_s", "backend", "outputs"):
        assert key in man
    assert "memory_curve.csv" in man["outputs"]
    header, rows = read_csv(out / "memory_curve.csv")
    assert header[:3] == ["tau", "erc", "erc_raw"]
    assert cli.main(["plot", str(out)]) == 0
    assert (out / "mf.png").stat().st_size > 1000
    # rerun from the manifest at a different thread budget
    monkeypatch.setenv("ENSEMBLE_RC_THREADS", "8")
    again = tmp_path / "again"
    assert cli.main(["run", str(out / "run_manifest.json"), "-o", str(again)]) == 0
    for name in man["outputs"]:
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ENSEMBLE_RC_THREADS", "lots")
    assert cli.main(["run", str(_write(tmp_path, SMOKE)), "-o", str(tmp_path / "x")]) == 2
    assert not (tmp_path / "x").exists()


def test_divergence_exit_code(tmp_path, capsys):
    text = """
experiment: mc-chaotic
system: {type: ode, kind: lorenz, dt: 0.5}
ensemble: {L: 4}
protocol: {washout: 10, train: 100, test: 100}
"""
    assert cli.main(["run", str(_write(tmp_path, text)), "-o", str(tmp_path / "d")]) == 3
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["kind"] == "divergence" and rec["step"] is not None and rec["trial"] is not None


def test_io_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", str(_write(tmp_path, SMOKE)), "-o", str(blocker / "sub")]) == 4
    assert cli.main(["plot", str(tmp_path / "nowhere")]) == 4


def test_plot_input_errors(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    assert cli.main(["plot", str(d)]) == 2
    (d / "memory_curve.csv").write_text("")
    assert cli.main(["plot", str(d)]) == 2
    write_csv(d / "memory_curve.csv", ["delay", "erc"], [(1, 0.5)])
    assert cli.main(["plot", str(d)]) == 2


def test_oracles(capsys):
    assert cli.main(["oracle", "list"]) == 0
    names = capsys.readouterr().out.split()
    assert "crc" in names and "tipc-example" in names
    for name in ("crc", "hamming", "narma-fixed-point", "rk4-linear", "sl-moments"):
        assert cli.main(["oracle", name]) == 0
    assert cli.main(["oracle", "nope"]) == 2


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "ensemble_rc.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()


def test_backend_env_selects_fallback():
    code = "from ensemble_rc import _backend; print(_backend.BACKEND)"
    r = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                       env={"ENSEMBLE_RC_BACKEND": "python", "PATH": ""})
    assert r.stdout.strip() == "python"


def test_csv_format(tmp_path):
    write_csv(tmp_path / "a.csv", ["a", "b"], [(0.1, 1), (np.float64(1 / 3), "x")])
    raw = (tmp_path / "a.csv").read_bytes()
    assert raw == b"a,b\n0.10000000000000001,1\n0.33333333333333331,x\n"
