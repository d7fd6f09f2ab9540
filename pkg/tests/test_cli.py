import subprocess
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from condips import cli, harness
from condips.errors import StiffnessError
from condips.io import read_csv, read_snapshot

CONFIG = """
[model]
model = zero-range
b = 4

[run]
rho = 2
L = 10, 20
t_max = 1
obs = 0.5, 1
n_paths = 40
seed = 5
tagged_site = uniform

[meanfield]
grid_step = 0.05

[limit]
n_paths = 200

[oracle]
L = 3
N = 2
times = 0.5, 1

[coupling]
L = 10
n_paths = 30
t_max = 1

[coarsening]
times = 1, 2
t_max = 3
n_paths = 200
"""

COMMANDS = ["simulate-ips", "simulate-tagged", "solve-meanfield", "simulate-limit", "couple",
            "oracle", "convergence", "coarsening"]


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(CONFIG)
    return path


def run(config, out, command, *extra):
    return cli.main([command, "--config", str(config), "--out", str(out), "--jobs", "1", *extra])


def bodies(directory: Path) -> dict:
    return {p.relative_to(directory): p.read_bytes() for p in sorted(directory.rglob("*.csv"))}


@pytest.mark.parametrize("command", COMMANDS)
def test_subcommands_are_reproducible(config, tmp_path, command):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(config, a, command) == 0
    assert run(config, b, command) == 0
    first = bodies(a)
    assert first and first == bodies(b)
    assert (a / "meta.json").exists()
    for path in first:
        read_csv(a / path)


def test_expected_files(config, tmp_path):
    run(config, tmp_path / "ips", "simulate-ips")
    assert {p.name for p in (tmp_path / "ips" / "L_10").iterdir()} >= {"fk.csv", "moments.csv"}
    run(config, tmp_path / "mf", "solve-meanfield")
    names = {p.name for p in (tmp_path / "mf").iterdir()}
    assert names >= {"f.csv", "p.csv", "rates.csv", "moments.csv", "meta.json"}
    assert run(config, tmp_path / "lim", "simulate-limit", "--meanfield", str(tmp_path / "mf")) == 0
    assert (tmp_path / "lim" / "what_hist.csv").exists()
    cols = read_csv(tmp_path / "mf" / "moments.csv")
    assert np.max(np.abs(cols["m1"] - 2.0)) < 1e-8


def test_seed_flag_changes_output(config, tmp_path):
    run(config, tmp_path / "a", "simulate-tagged")
    run(config, tmp_path / "b", "simulate-tagged", "--seed", "6")
    assert bodies(tmp_path / "a") != bodies(tmp_path / "b")


def test_replay_seed(config, tmp_path):
    out = tmp_path / "r"
    assert run(config, out, "replay-seed", "--kind", "ips", "--index", "2") == 0
    header, times, counts = read_snapshot(out / "replay.csv")
    assert header["L"] == 10 and header["N"] == 20
    assert np.all(counts @ np.arange(counts.shape[1]) == 20)
    assert run(config, out, "replay-seed", "--kind", "couple", "--path-seed", "0x1234") == 0
    assert run(config, out, "replay-seed", "--kind", "tagged") == 2


def test_missing_config(tmp_path):
    assert run(tmp_path / "nope.ini", tmp_path / "o", "oracle") == 2


def test_bad_model(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text(CONFIG.replace("zero-range", "hopping"))
    assert run(path, tmp_path / "o", "oracle") == 2


def test_numerical_failure_exit_code(config, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise StiffnessError("too stiff")
    monkeypatch.setattr(cli, "solve_meanfield", boom)
    assert run(config, tmp_path / "o", "solve-meanfield") == 3


def test_invariant_violation_exit_code(config, tmp_path, monkeypatch, capsys):
    def broken(st, kernel, t_max, obs, rng, rho=None):
        obs = np.asarray(obs)
        return SimpleNamespace(W=np.ones(obs.size, int), wbar=np.ones(obs.size), violations=1,
                               saturated=False)
    monkeypatch.setattr(harness, "simulate_coupled", broken)
    assert run(config, tmp_path / "o", "couple") == 4
    assert "replay-seed" in capsys.readouterr().err


def test_module_entry_point(config, tmp_path):
    res = subprocess.run([sys.executable, "-m", "condips", "oracle", "--config", str(config),
                          "--out", str(tmp_path / "o"), "--t", "1"], capture_output=True)
    assert res.returncode == 0
    cols = read_csv(tmp_path / "o" / "exact_w.csv")
    assert cols["P_W"].sum() == pytest.approx(1.0)
