import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from punctured_robin.cli import main


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "-o", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_robin_field_punctured_disk(tmp_path):
    code, out = run(tmp_path, "robin-field", "--hole-center", "0.3,0", "--hole-radius", "0.1")
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["x", "y", "robin"]
    assert 0 < len(rows) <= 101 * 101
    assert np.all(np.hypot(rows[:, 0] - 0.3, rows[:, 1]) > 0.1)


def test_robin_field_ball_row_symmetric(tmp_path):
    code, out = run(tmp_path, "robin-field", "--set", "grid_size=41")
    assert code == 0
    _, rows = read_csv(out)
    row = rows[np.abs(rows[:, 1]) < 1e-12]
    order = np.argsort(row[:, 0])
    v = row[order, 2]
    assert len(v) > 10
    assert np.allclose(v, v[::-1], atol=1e-8)


def test_invalid_hole_leaves_no_file(tmp_path):
    code, out = run(tmp_path, "robin-field", "--hole-center", "0.95,0", "--hole-radius", "0.1")
    assert code == 2
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []


@pytest.mark.parametrize("args", [
    ["--set", "bogus=1"],
    ["--set", "domain.type=\"torus\""],
    ["--set", "grid_size=-3"],
    ["--config", "does-not-exist.json"],
])
def test_config_errors(tmp_path, args):
    code, out = run(tmp_path, "robin-field", *args)
    assert code == 2 and not out.exists()


def test_byte_identical_reruns(tmp_path):
    args = ["robin-field", "--hole-center", "0.2,0.1", "--hole-radius", "0.05", "--set", "grid_size=25"]
    for fmt in ("csv", "json"):
        _, a = run(tmp_path, *args, "--format", fmt, name=f"a.{fmt}")
        _, b = run(tmp_path, *args, "--format", fmt, name=f"b.{fmt}")
        assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["schema_version"] == 1 and "output" not in doc["config"]


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "robin-field", "grid_size": 11,
                               "hole": {"center": [0.0, 0.3], "radius": 0.1}}))
    code, out = run(tmp_path, "robin-field", "--config", str(cfg), "--set", "grid_size=15")
    assert code == 0
    _, rows = read_csv(out)
    assert len(np.unique(rows[:, 0])) <= 15
    cfg.write_text(json.dumps({"command": "ellipsoid-study"}))
    assert run(tmp_path, "robin-field", "--config", str(cfg), name="x")[0] == 2


def test_critical_points_punctured_disk(tmp_path):
    code, out = run(tmp_path, "critical-points", "--hole-center", "0.3,0", "--hole-radius", "0.01",
                    "--format", "json")
    assert code == 0
    report = json.loads(out.read_text())
    assert report["found_count"] == 2 and report["predicted_count"] == 2
    assert report["degenerate_ring"] is None


def test_critical_points_concentric(tmp_path):
    code, out = run(tmp_path, "critical-points", "--hole-center", "0,0", "--hole-radius", "0.1",
                    "--format", "json")
    assert code == 0
    report = json.loads(out.read_text())
    assert report["found"] == [] and report["predicted_count"] == "inf"
    assert report["degenerate_ring"]["radius"] == pytest.approx(0.50254898, abs=1e-7)


def test_validate_identities_subset(tmp_path):
    code, out = run(tmp_path, "validate-identities", "--set", "n_samples=2", "--set", "dims=[2]")
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 9
    assert all(r["passed"] == "true" for r in rows)


def test_ellipsoid_study_cli(tmp_path):
    code, out = run(tmp_path, "ellipsoid-study", "--format", "json")
    assert code == 0
    data = json.loads(out.read_text())
    assert data["schema_version"] == 1


def test_convergence_study_cli(tmp_path):
    code, out = run(tmp_path, "convergence-study", "--hole-center", "0.3,0",
                    "--set", "eps_list=[0.03, 0.01]", "--set", "n_angles=8", "--format", "json")
    assert code == 0
    data = json.loads(out.read_text())
    assert "robin_slope" in data


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "punctured_robin", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
