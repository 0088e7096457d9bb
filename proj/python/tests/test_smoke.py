import json
import os
import subprocess

import numpy as np
import pytest

import rwg

QUICK = os.path.join(os.path.dirname(__file__), "..", "..", "configs", "quick.yaml")


def test_version():
    assert rwg.__version__ == "1.0.0"


def test_mode_counts():
    assert rwg.modes(3.03, 5.84)["N"] == 64
    assert rwg.modes(4.08, 5.77)["N"] == 84
    t = rwg.modes(3.03, 5.84)
    assert np.all(np.diff(t["lambda"]) >= 0)
    assert set(np.unique(t["s"])) == {1, 2}


def test_analyze_small():
    r = rwg.analyze(1.3, 2.1, config=QUICK)
    assert len(r["S"]) == r["N"]
    assert r["L_eq"] > 0
    assert max(r["mid_residual"]) < 1e-6
    assert sum(r["U_o_diagonal"]) == pytest.approx(1.0)


def test_config_errors():
    with pytest.raises(rwg.ConfigError, match="geometry.L1"):
        rwg.resolved_config(yaml="geometry:\n  L1: -1\n")


def test_run_matches_cli(tmp_path):
    res = rwg.run("modes", str(tmp_path / "py"), config=QUICK)
    assert res["N"] > 0
    cli = os.environ.get("RWG_CLI")
    if not cli:
        pytest.skip("RWG_CLI not set")
    out = tmp_path / "cli"
    subprocess.run([cli, "--config", QUICK, "--out", str(out), "modes"], check=True, capture_output=True)
    assert (out / "modes.csv").read_text() == (tmp_path / "py" / "modes.csv").read_text()
    assert json.loads((out / "summary.json").read_text())["result"]["N"] == res["N"]
