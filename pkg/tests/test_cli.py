import json
import subprocess
import sys

import numpy as np

from tt2cp.bench import gen_random_kt
from tt2cp.cli import main
from tt2cp.io import load_ktensor, save_tensor


def test_decompose_each_method(tmp_path):
    y = gen_random_kt(4, 4, 3, seed=2).full()
    save_tensor(tmp_path / "y.tnsr", y)
    for method in ("exact", "sequential", "fit"):
        out = tmp_path / method
        assert main(["decompose", "--input", str(tmp_path / "y.tnsr"), "--rank", "3",
                     "--method", method, "--output", str(out)]) == 0
        info = json.loads((out / "report.json").read_text())
        assert info["rel_error"] < 1e-6
        assert load_ktensor(out / "ktensor" / f"{method}.tnsr").rank == 3
        assert (out / "metrics.csv").read_text().startswith("trial,")


def test_run_command(tmp_path):
    cfg = {"order": 4, "extents": [4, 4, 4, 4], "rank": 2, "snr_db": [30], "trials": 2,
           "fit": {"max_sweeps": 20}, "dense_baseline": False}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["run", "--config", str(tmp_path / "cfg.json"), "--output", str(tmp_path / "out")]) == 0
    lines = (tmp_path / "out" / "metrics.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert {"config", "summary", "wall_time"} <= set(report)


def test_hilbert_command(tmp_path, capsys):
    assert main(["hilbert", "--order", "3", "--dim", "8", "--rank", "3", "--max-sweeps", "200",
                 "--output", str(tmp_path)]) == 0
    assert "relative error" in capsys.readouterr().out
    assert json.loads((tmp_path / "report.json").read_text())["rel_error"] < 1e-2


def test_bad_input_reports_error(tmp_path, capsys):
    (tmp_path / "junk.tnsr").write_bytes(b"nope")
    assert main(["decompose", "--input", str(tmp_path / "junk.tnsr"), "--rank", "2",
                 "--output", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "tt2cp.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "decompose" in res.stdout
