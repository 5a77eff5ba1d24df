import json
import subprocess
import sys

import numpy as np
import pytest

from heatsoe import io
from heatsoe.cli import main


def test_no_command_is_usage_error(capsys):
    assert main([]) == 1
    assert "subcommand" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["geometry", "--curve", "circle"],                 # missing --out
    ["geometry", "--curve", "square", "--out", "x.csv"],
    ["build-kernel", "--eps", "-1", "--out", "k.csv"],
    ["build-kernel", "--t0", "2", "--t1", "1", "--out", "k.csv"],
    ["solve", "--order", "7"],
    ["bench", "--sizes", "a,b"],
    ["validate", "--in", "does-not-exist.csv"],
    ["study", "--levels", "2"],
    ["solve", "--bogus"],
])
def test_usage_errors(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_validate_bundled_table5(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code = main(["validate", "--in", str(io.data_dir() / "table5_heat1d.csv"),
                 "--report", str(rep)])
    assert code == 0
    data = json.loads(rep.read_text())
    assert data["passed"] and data["max_weighted_error"] <= 1e-9
    assert set(data) == {"max_weighted_error", "stability_ratio_max",
                         "n_inner", "n_outer", "target", "passed"}
    assert "PASS" in capsys.readouterr().out
    assert (tmp_path / "r.json.manifest.json").exists()


def test_validate_truncated_sum_fails(tmp_path):
    src = (io.data_dir() / "table5_heat1d.csv").read_text().splitlines()
    body = [ln for ln in src if not ln.startswith("#")]
    meta = [ln for ln in src if ln.startswith("#")]
    # drop the largest half of the rows after the header
    cut = tmp_path / "cut.csv"
    cut.write_text("\n".join(meta + body[:1] + body[1:len(body) // 2]) + "\n")
    assert main(["validate", "--in", str(cut)]) == 2


def test_build_and_validate_kernel(tmp_path):
    out = tmp_path / "k.csv"
    assert main(["build-kernel", "--dim", "2", "--eps", "1e-6", "--t0", "1e-3",
                 "--t1", "1", "--out", str(out)]) == 0
    k = io.read_kernel(out)
    assert k.n_outer > 0
    assert main(["validate", "--in", str(out), "--nx", "20", "--nt", "200"]) == 0


def test_build_kernel_bundled_outer(tmp_path):
    out = tmp_path / "dlp.csv"
    assert main(["build-kernel", "--dim", "2", "--eps", "1e-9", "--dlp",
                 "--radius", "6.5", "--outer", "bundled", "--out", str(out)]) == 0
    assert io.read_kernel(out).n_outer == 22
    assert main(["build-kernel", "--dim", "3", "--outer", "bundled",
                 "--out", str(out)]) == 1


def test_geometry_columns(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["geometry", "--curve", "ellipse", "--n", "64",
                 "--out", str(out)]) == 0
    header = [ln for ln in out.read_text().splitlines()
              if not ln.startswith("#")][0]
    assert header.split(",") == ["x", "y", "nx", "ny", "kappa", "weight"]
    meta, _, rows = io.read_table(out)
    rows = np.asarray(rows)
    assert rows.shape == (64, 6)
    np.testing.assert_allclose(np.hypot(rows[:, 2], rows[:, 3]), 1.0, atol=1e-14)


def test_manifest_replay_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["geometry", "--curve", "hexagram", "--n", "96",
                 "--out", str(a)]) == 0
    manifest = tmp_path / "a.csv.manifest.json"
    assert main(["--config", str(manifest), "geometry", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    m = json.loads(manifest.read_text())
    assert m["artifacts"]["a.csv"] == io.sha256_file(a)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# geometry run\ncurve = crescent\nn = 80\n")
    out = tmp_path / "g.csv"
    assert main(["--config", str(cfg), "geometry", "--n", "64",
                 "--out", str(out)]) == 0
    meta, _, rows = io.read_table(out)
    assert meta["curve"] == "crescent" and len(rows) == 64
    cfg.write_text("colour = red\n")
    assert main(["--config", str(cfg), "geometry", "--out", str(out)]) == 1


def test_solve_report_and_plot_data(tmp_path):
    rep, plot = tmp_path / "s.json", tmp_path / "p.csv"
    assert main(["solve", "--n", "64", "--dt", "0.25", "--steps", "4",
                 "--report", str(rep), "--emit-plot-data", str(plot)]) == 0
    data = json.loads(rep.read_text())
    assert data["NT"] == 4 and data["E"] < 1e-2
    _, _, rows = io.read_table(plot)
    rows = np.asarray(rows)
    assert rows.shape[1] == 8 and rows.shape[0] == 4 * 20
    np.testing.assert_allclose(rows[:, 7], rows[:, 5] - rows[:, 6], atol=1e-15)


def test_study_is_deterministic(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert main(["study", "--n", "64", "--levels", "3", "--dt0", "0.25",
                     "--T", "0.5", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    _, _, rows = io.read_table(tmp_path / "a.csv")
    assert [int(r[1]) for r in rows] == [2, 4, 8]


def test_bench_small(tmp_path):
    rep = tmp_path / "b.json"
    assert main(["bench", "--sizes", "4,8", "--n", "32", "--report",
                 str(rep)]) == 0
    data = json.loads(rep.read_text())
    assert data["max_abs_diff"] <= data["tolerance"]
    assert len(data["rows"]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "heatsoe.cli", "geometry"],
                         capture_output=True, text=True)
    assert res.returncode == 1 and "--out" in res.stderr
