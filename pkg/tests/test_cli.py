import csv
import math

import numpy as np
import pytest

from thincpd.cli import main
from thincpd.io import read_points, write_points


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def pool_file(tmp_path):
    path = tmp_path / "pool.csv"
    write_points(path, np.random.default_rng(0).normal(size=(120, 3)))
    return path


class TestThin:
    def test_writes_subset_and_trace(self, pool_file, tmp_path, capsys):
        out = tmp_path / "thin.csv"
        assert main(["thin", str(pool_file), "--m", "30", "--out", str(out)]) == 0
        assert "objective_value" in capsys.readouterr().out
        pool, sub = read_points(pool_file), read_points(out)
        assert sub.shape == (30, 3)
        rows = {tuple(r) for r in pool.tolist()}
        assert len({tuple(r) for r in sub.tolist()}) == 30
        assert all(tuple(r) in rows for r in sub.tolist())
        trace = read_rows(tmp_path / "thin_trace.csv")
        assert [r["step"] for r in trace] == [str(i) for i in range(1, 31)]
        assert sub.tolist()[5] == pool[int(trace[5]["chosen_index"])].tolist()

    def test_deterministic_bytes(self, pool_file, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["thin", str(pool_file), "--m", "10", "--out", str(a)])
        main(["thin", str(pool_file), "--m", "10", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a_trace.csv").read_bytes() == (tmp_path / "b_trace.csv").read_bytes()

    def test_m_too_large(self, pool_file, tmp_path, capsys):
        assert main(["thin", str(pool_file), "--m", "500", "--out", str(tmp_path / "x.csv")]) == 2
        err = capsys.readouterr().err
        assert "500" in err and "120" in err

    def test_ragged_pool(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0,2.0\n3.0\n")
        assert main(["thin", str(bad), "--m", "2", "--out", str(tmp_path / "o.csv")]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["thin", str(tmp_path / "none.csv"), "--m", "2", "--out", str(tmp_path / "o.csv")]) == 2


class TestBench:
    def test_rows_and_columns(self, small_config, tmp_path, capsys):
        out = tmp_path / "r.csv"
        assert main(["bench", str(small_config), "--out", str(out)]) == 0
        rows = read_rows(out)
        assert len(rows) == 2
        assert [r["pool_mode"] for r in rows] == ["raw", "thinned"]
        assert list(rows[0]) == ["detector", "pool_mode", "target_arl", "b", "arl_hat", "arl_stderr",
                                 "edd_hat", "edd_stderr", "censored", "seed", "error"]
        for r in rows:
            assert r["error"] == ""
            for col in ("target_arl", "b", "arl_hat", "arl_stderr", "edd_hat", "edd_stderr", "censored"):
                assert r[col] == "NA" or math.isfinite(float(r[col]))
        assert "scanb" in capsys.readouterr().out

    def test_deterministic(self, small_config, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["bench", str(small_config), "--out", str(a)])
        main(["bench", str(small_config), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_failed_cell_is_recorded(self, small_config, tmp_path):
        # T^2 exists from t=2, so a target ARL of 1.5 cannot be calibrated;
        # the other cell must still run
        text = small_config.read_text().split("[scanb]")[0]
        text = text.replace('detectors = ["scanb"]', 'detectors = ["hotelling"]')
        small_config.write_text(text.replace("target_arl = [40]", "target_arl = [1.5, 40]"))
        out = tmp_path / "f.csv"
        assert main(["bench", str(small_config), "--out", str(out), "--trials", "5"]) == 0
        rows = read_rows(out)
        assert len(rows) == 4
        bad = [r for r in rows if r["target_arl"] == "1.5"]
        assert len(bad) == 2
        assert all("CalibrationError" in r["error"] and r["b"] == "NA" for r in bad)
        assert all(r["error"] == "" for r in rows if r["target_arl"] == "40.0")

    def test_bad_config_exit_code(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text("[experiment]\ntarget_arl = [10]\ndetectors = ['scanb']\nfoo = 1\n")
        assert main(["bench", str(path)]) == 2

    def test_calibrate_subcommand(self, small_config, tmp_path):
        out = tmp_path / "cal.csv"
        assert main(["calibrate", str(small_config), "--out", str(out), "--trials", "8"]) == 0
        rows = read_rows(out)
        assert len(rows) == 2 and "edd_hat" not in rows[0]
        assert all(0.9 * 40 <= float(r["arl_hat"]) <= 1.1 * 40 for r in rows)


class TestRun:
    def test_alarm_time(self, pool_file, tmp_path, capsys):
        stream = tmp_path / "s.csv"
        rng = np.random.default_rng(1)
        write_points(stream, np.vstack([rng.normal(size=(30, 3)), rng.normal(size=(30, 3)) + 6]))
        args = ["run", "--pool", str(pool_file), "--stream", str(stream), "--N", "2", "--B", "10"]
        assert main(["run", "--detector", "hotelling", "--pool", str(pool_file), "--stream", str(stream), "--b", "1e9"]) == 0
        assert capsys.readouterr().out.strip() == "61"
        assert main(args[:1] + ["--detector", "scanb"] + args[1:] + ["--b=-1e9"]) == 0
        assert capsys.readouterr().out.strip() == "10"
        assert main(["run", "--detector", "kcusum", "--pool", str(pool_file), "--stream", str(stream), "--b", "6"]) == 0
        t = int(capsys.readouterr().out.strip())
        assert t == 38  # S crosses 6 at t=38 on this stream

    def test_dimension_mismatch(self, pool_file, tmp_path):
        stream = tmp_path / "s.csv"
        write_points(stream, np.zeros((5, 2)))
        assert main(["run", "--detector", "kcusum", "--pool", str(pool_file), "--stream", str(stream), "--b", "1"]) == 2
