import json
from pathlib import Path

import pytest

from breather_lab.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL_SCAN = """[experiment]
name = quantize-scan
seed = 3
[parameters]
d = 50
K = 40
n_max = 2
points_per_quantum = 4
"""

SMALL_RESIDUAL = """[experiment]
name = residual
[parameters]
alpha = 0.3
levels = 12, 16, 20
t_extent = 3.14159
half_width = 3
dump_field = true
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_quantize_scan_minima(tmp_path, capsys):
    cfg = write(tmp_path, SMALL_SCAN)
    out = tmp_path / "out"
    assert main(["quantize-scan", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    rows = [line.split(",") for line in (out / "scan.csv").read_text().splitlines()[1:]]
    defect = [float(r[1]) for r in rows]
    quantized = [i for i, r in enumerate(rows) if r[3] == "1"]
    assert quantized == [0, 4, 8]
    for i in quantized[1:]:
        assert defect[i] < defect[i - 1] and defect[i] < min(defect[i + 1:i + 2] or [float("inf")])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] and manifest["config"]["seed"] == 3
    assert all({"name", "passed", "measured", "threshold"} <= set(a) for a in manifest["assertions"])
    assert "PASS quantize-scan:" in capsys.readouterr().out


def test_plane_wave_residual_passes(tmp_path):
    out = tmp_path / "out"
    code = main(["residual", "--config", str(CONFIGS / "plane_wave_residual.cfg"), "--out", str(out)])
    assert code == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert "negative_controls" in manifest["config"]["defaults_applied"]


def test_failed_assertion_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, SMALL_SCAN + "midpoint_factor = 1e12\n")
    code = main(["quantize-scan", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == EXIT_FAILED
    assert "FAIL quantize-scan:midpoint_defect_over_certificate" in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    bad = write(tmp_path, SMALL_SCAN + "typo_key = 1\n")
    assert main(["quantize-scan", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "typo_key" in capsys.readouterr().err
    assert main(["quantize-scan", "--config", str(tmp_path / "missing.cfg")]) == EXIT_USAGE
    good = write(tmp_path, SMALL_SCAN, "good.cfg")
    assert main(["residual", "--config", str(good)]) == EXIT_USAGE
    assert main(["quantize-scan", "--config", str(good), "--workers", "0"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["no-such-experiment", "--config", str(good)])
    assert info.value.code == EXIT_USAGE


def test_env_workers(tmp_path, monkeypatch):
    cfg = write(tmp_path, SMALL_SCAN)
    monkeypatch.setenv("BREATHER_LAB_WORKERS", "many")
    assert main(["quantize-scan", "--config", str(cfg), "--out", str(tmp_path / "a")]) == EXIT_USAGE
    monkeypatch.setenv("BREATHER_LAB_WORKERS", "3")
    assert main(["quantize-scan", "--config", str(cfg), "--out", str(tmp_path / "b")]) == EXIT_OK
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["workers"] == 3


def test_outputs_identical_across_worker_counts(tmp_path):
    cfg = write(tmp_path, SMALL_RESIDUAL)
    outputs = []
    for workers in ("1", "4"):
        out = tmp_path / f"w{workers}"
        assert main(["residual", "--config", str(cfg), "--out", str(out), "--workers", workers]) == EXIT_OK
        outputs.append(out)
    for name in ("convergence.csv", "field.brth"):
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()
    text = (outputs[0] / "convergence.csv").read_text().splitlines()
    assert text[0] == "level,h,linf,l2"
    assert "e" in text[1].split(",")[2]
