import shutil
import subprocess
import sys

import pytest

from momsched.cli import main

CONFIG = """
seed = 5
eta = 0.01
mu = 0.3
rounds = 30
name = "cli"

[problem]
n = 5

[graph]
p = 0.7
"""


def _kv(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(CONFIG)
    return path


def test_run(cfg, tmp_path, capsys):
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "trace.csv").exists()
    assert "final_residual=" in capsys.readouterr().out


def test_run_seed_override(cfg, tmp_path):
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "9"])
    text = (tmp_path / "a" / "config.toml").read_text()
    assert "seed = 9" in text


def test_bound(cfg, capsys):
    assert main(["bound", "--config", str(cfg)]) == 0
    kv = _kv(capsys.readouterr().out)
    assert float(kv["eta_tau_bar"]) == float(kv["eta_bar"])
    assert kv["eta_within_bound"] in ("true", "false")


def test_oracle(cfg, capsys):
    assert main(["oracle", "--config", str(cfg)]) == 0
    kv = _kv(capsys.readouterr().out)
    xs = [float(kv[f"x_{i}"]) for i in range(5)]
    assert sum(xs) == pytest.approx(250)
    assert float(kv["dispersion"]) <= 1e-8


def test_plot(cfg, tmp_path, capsys):
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert main(["plot", "--trace", str(tmp_path / "o" / "trace.csv"), "--series", "momenta"]) == 0
    assert (tmp_path / "o" / "momenta.svg").exists()


def test_config_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("mu = 2.0\n")
    assert main(["run", "--config", str(bad)]) == 1
    assert "mu" in capsys.readouterr().err


def test_missing_file_exit_1(tmp_path):
    assert main(["bound", "--config", str(tmp_path / "nope.toml")]) == 1


def test_unknown_preset_exit_1(capsys):
    assert main(["preset", "fig99"]) == 1
    assert "unknown preset" in capsys.readouterr().err


def test_runtime_error_exit_2(tmp_path, capsys):
    (tmp_path / "t.csv").write_text("garbage\n")
    assert main(["plot", "--trace", str(tmp_path / "t.csv"), "--series", "residual"]) == 2


@pytest.mark.skipif(shutil.which("sched") is None, reason="console script not installed")
def test_console_script(cfg, tmp_path):
    out = subprocess.run(["sched", "oracle", "--config", str(cfg)], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("f_star=")


def test_module_entry(cfg):
    out = subprocess.run([sys.executable, "-m", "momsched.cli", "bound", "--config", str(cfg)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "eta_bar=" in out.stdout
