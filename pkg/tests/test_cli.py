import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from spectra.cli import main


def run(argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestVerify:
    def test_two_sizes(self, tmp_path):
        out = tmp_path / "v.json"
        assert run(["verify", "--n", "1,64", "--seeds", "1", "--out", out]) == 0
        reports = json.loads(out.read_text())
        assert len(reports) == 10 and all(r["passed"] for r in reports)

    def test_count(self, tmp_path):
        out = tmp_path / "v.json"
        assert run(["verify", "--n", "128", "--seeds", "1,2,3", "--out", out]) == 0
        assert len(json.loads(out.read_text())) == 5 * 1 * 3

    def test_zero_n_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run(["verify", "--n", "0"])
        assert exc.value.code == 2

    def test_garbage_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run(["verify", "--n", "a,b"])
        assert exc.value.code == 2

    def test_failure_exit_code(self, tmp_path):
        # an impossible tolerance turns passing checks into failures
        assert run(["verify", "--n", "8", "--tol-scale", "1e-30", "--out", tmp_path / "v.json"]) == 1

    def test_stdout_without_out(self, capsys):
        assert run(["verify", "--n", "2"]) == 0
        assert len(json.loads(capsys.readouterr().out)) == 5


class TestStieltjes:
    def test_header_and_bound(self, tmp_path):
        out = tmp_path / "s.csv"
        assert run(["stieltjes", "--n", "32", "--samples", "30", "--egrid=-2:2:1", "--imz", "0.2,0.05", "--out", out]) == 0
        rows = read_csv(out)
        assert rows[0] == ["E", "imz", "re_s", "im_s", "stderr_re", "stderr_im", "bound_ok"]
        assert len(rows) == 1 + 5 * 2
        assert all(r[6] == "true" for r in rows[1:])

    def test_far_field(self, tmp_path):
        out = tmp_path / "s.csv"
        run(["stieltjes", "--n", "32", "--samples", "40", "--egrid", "0:0:1", "--imz", "100", "--out", out])
        row = read_csv(out)[1]
        assert abs(float(row[3]) - 0.01) <= 3 * float(row[5]) + 1e-6

    def test_full_precision(self, tmp_path):
        out = tmp_path / "s.csv"
        run(["stieltjes", "--n", "8", "--samples", "3", "--egrid", "0:0:1", "--imz", "0.3", "--out", out])
        row = read_csv(out)[1]
        # %.17g: 0.3 is not representable, so all 17 digits show
        assert row[1] == "0.29999999999999999"
        assert all(c == "{:.17g}".format(float(c)) for c in row[:6])

    def test_bad_imz(self):
        with pytest.raises(SystemExit) as exc:
            run(["stieltjes", "--imz", "-1"])
        assert exc.value.code == 2


class TestDensity:
    def test_csv(self, tmp_path, capsys):
        out = tmp_path / "d.csv"
        code = run(["density", "--n", "64", "--samples", "30", "--boot", "50", "--out", out])
        assert code == 0
        rows = read_csv(out)
        assert rows[0] == ["x", "density", "ci"]
        x, f = np.array([[float(c) for c in r[:2]] for r in rows[1:]]).T
        assert abs(np.trapezoid(f, x) - 1) <= 0.01
        assert "margin" in capsys.readouterr().out

    def test_hankel_exploratory(self, tmp_path, capsys):
        run(["density", "--n", "32", "--samples", "10", "--boot", "50", "--ensemble", "hankel", "--out", tmp_path / "h.csv"])
        assert "exploratory" in capsys.readouterr().out

    def test_plot(self, tmp_path):
        out = tmp_path / "d.csv"
        run(["density", "--n", "16", "--samples", "10", "--boot", "50", "--plot", "--out", out])
        assert (tmp_path / "d.png").stat().st_size > 0

    @pytest.mark.parametrize("flag", [["--bandwidth", "0"], ["--boot", "10"]])
    def test_usage(self, flag):
        with pytest.raises(SystemExit) as exc:
            run(["density", *flag])
        assert exc.value.code == 2


class TestWegner:
    def test_scalar(self, tmp_path):
        out = tmp_path / "w.json"
        assert run(["wegner", "--scalar", "--out", out]) == 0
        assert json.loads(out.read_text())["scalar_selftest"]["passed"]

    def test_invalid_j(self):
        with pytest.raises(SystemExit) as exc:
            run(["wegner", "--n", "16", "--j", "17"])
        assert exc.value.code == 2

    def test_small_family(self, tmp_path):
        out = tmp_path / "w.json"
        assert run(["wegner", "--n", "8", "--j", "0,3", "--E", "0", "--delta", "0.05", "--plot", "--out", out]) == 0
        payload = json.loads(out.read_text())
        assert [f["j"] for f in payload["families"]] == [0, 3]
        assert (tmp_path / "w.png").exists()


def test_hw(tmp_path):
    out = tmp_path / "hw.json"
    assert run(["hw", "--out", out]) == 0
    payload = json.loads(out.read_text())
    assert payload["scaling"][0]["ratio"] == pytest.approx(4.0)


def test_moments(tmp_path):
    out = tmp_path / "m.json"
    assert run(["moments", "--n", "16", "--samples", "300", "--max-order", "4", "--out", out]) == 0
    orders = [c["order"] for c in json.loads(out.read_text())["checks"]]
    assert orders == [1, 2, 3, 4]


class TestManifest:
    def test_written(self, tmp_path):
        out = tmp_path / "v.json"
        run(["verify", "--n", "2", "--seeds", "5", "--out", out])
        man = json.loads((tmp_path / "v.json.manifest.json").read_text())
        assert man["command"] == "verify" and man["seed"] == [5] and man["output"] == "v.json"
        assert {"started", "finished", "versions", "parameters"} <= set(man)

    def test_utf8_lf(self, tmp_path):
        out = tmp_path / "s.csv"
        run(["stieltjes", "--n", "8", "--samples", "3", "--egrid", "0:1:1", "--imz", "0.3", "--out", out])
        raw = out.read_bytes()
        assert b"\r" not in raw and raw.decode("utf-8").endswith("\n")


class TestThreads:
    def test_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SPECTRA_THREADS", "2")
        out = tmp_path / "m.json"
        run(["moments", "--n", "8", "--samples", "20", "--out", out])
        man = json.loads((tmp_path / "m.json.manifest.json").read_text())
        assert man["parameters"]["threads"] is None

    def test_bad_env(self, monkeypatch):
        monkeypatch.setenv("SPECTRA_THREADS", "0")
        with pytest.raises(SystemExit) as exc:
            run(["moments", "--n", "8", "--samples", "2"])
        assert exc.value.code == 2

    @pytest.mark.parametrize(
        "argv",
        [
            ["stieltjes", "--n", "16", "--samples", "24", "--egrid=-1:1:0.5"],
            ["density", "--n", "16", "--samples", "24", "--boot", "50"],
            ["moments", "--n", "16", "--samples", "50"],
            ["verify", "--n", "4,8", "--seeds", "1,2"],
        ],
    )
    def test_byte_identical(self, tmp_path, argv):
        blobs = []
        for t in (1, 4, 8):
            out = tmp_path / f"o{t}.txt"
            run([*argv, "--threads", t, "--out", out])
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1] == blobs[2]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "spectra", "verify", "--n", "0"], capture_output=True)
    assert r.returncode == 2
    r = subprocess.run([sys.executable, "-m", "spectra", "hw", "--n", "8", "--seeds", "1"], capture_output=True)
    assert r.returncode == 0 and json.loads(r.stdout)["reports"][0]["passed"]
