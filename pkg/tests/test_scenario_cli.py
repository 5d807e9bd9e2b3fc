import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from corner_flow import scenario as sc
from corner_flow.cli import main
from corner_flow.errors import ConfigError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _write(tmp_path, text):
    path = tmp_path / "cfg.toml"
    path.write_text(text)
    return path


@pytest.mark.parametrize("text, fragment", [
    ('mode = "nonlinear"\nbogus = 1\n', "unknown top-level"),
    ('mode = "sideways"\n', "field mode"),
    ('[[data.bumps]]\ncenter = [0.3, 0.2]\nradius = 0.5\namplitude = 0.5\n', "amplitude"),
    ('[walls.wall1]\nepsilon = 0.2\npoly_coeffs = [1.0]\n', "epsilon"),
    ('[grid]\nh = -0.1\n', "positive"),
    ('mode = "linear"\n[grid\n', "line"),
])
def test_config_errors(tmp_path, text, fragment):
    with pytest.raises(ConfigError) as info:
        sc.load(_write(tmp_path, text))
    assert fragment in str(info.value)
    assert main(["run", str(_write(tmp_path, text)), "--out", str(tmp_path / "o")]) == 2


def test_missing_file_exits_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "o")]) == 2


def test_bump_images_are_double_even():
    b = sc.Bump((0.3, 0.2), 0.5, 1e-3)
    assert len(b.centers()) == 4
    z = np.linspace(0.0, 0.6, 7)
    v = b.evaluate(z[:, None], z[None, :])
    assert v.shape == (7, 7) and np.all(v >= 0)


def test_config_hash_tracks_content():
    a = sc.from_dict({"mode": "linear"}, source_text="a")
    b = sc.from_dict({"mode": "linear"}, source_text="b")
    assert a.config_hash != b.config_hash and len(a.config_hash) == 16


def test_zero_scenario_runs(tmp_path):
    assert main(["run", str(SCENARIOS / "zero.toml"), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "nonlinear.json").read_text())
    assert summary["trace"]["iterations"] == 1
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and len(lines) == 3


def test_convergence_study_order(tmp_path):
    assert main(["run", str(SCENARIOS / "oracle.toml"), "--out", str(tmp_path), "--refine", "3"]) == 0
    orders = json.loads((tmp_path / "convergence.json").read_text())["order"][1:]
    assert all(1.9 < o < 2.1 for o in orders)


def test_runs_are_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["run", str(SCENARIOS / "zero.toml"), "--out", str(tmp_path / name)]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "corner_flow.cli", "run", str(tmp_path / "missing.toml")],
                         capture_output=True, text=True)
    assert out.returncode == 2
