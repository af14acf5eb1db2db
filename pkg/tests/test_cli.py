import json

import numpy as np
import pytest

from zeromatch.cli import UsageError, main, parse_args


@pytest.fixture
def circle_files(tmp_path):
    ang = np.linspace(0, 2 * np.pi, 10, endpoint=False)
    pts = np.c_[np.cos(ang), np.sin(ang)]
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    a.write_text(json.dumps({"points": pts.tolist()}))
    b.write_text(json.dumps({"points": pts.tolist()}))
    gt = tmp_path / "gt.json"
    gt.write_text(json.dumps({
        "inliersA": list(range(10)), "outliersA": [],
        "inliersB": list(range(10)), "outliersB": [],
        "tau": {str(i): i for i in range(10)}}))
    return a, b, gt


class TestParse:
    def test_match_command(self, circle_files):
        a, b, _ = circle_files
        cmd = parse_args(["match", "--a", str(a), "--b", str(b),
                          "--k", "10", "--method", "zac"])
        assert cmd.verb == "match" and cmd.k == 10 and cmd.method == "zac"

    def test_negative_k_usage_error(self, circle_files):
        a, b, _ = circle_files
        with pytest.raises(UsageError, match="--k"):
            parse_args(["match", "--a", str(a), "--b", str(b), "--k", "-3"])

    def test_bench_command(self):
        cmd = parse_args(["bench", "--suite", "outlier-sweep-rigid",
                          "--seed", "42", "--out", "r.csv"])
        assert cmd.verb == "bench"
        assert cmd.suite == "outlier-sweep-rigid"
        assert cmd.seed == 42 and cmd.out == "r.csv"

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(UsageError):
            parse_args(["match", "--nonsense", "1"])

    def test_missing_required_input(self):
        with pytest.raises(UsageError):
            parse_args(["match", "--a", "only.json"])

    def test_k_and_ratio_conflict(self, circle_files):
        a, b, _ = circle_files
        with pytest.raises(UsageError, match="either"):
            parse_args(["match", "--a", str(a), "--b", str(b),
                        "--k", "3", "--ratio", "0.5"])

    def test_canonical_round_trip(self, circle_files):
        a, b, gt = circle_files
        for argv in (
                ["match", "--a", str(a), "--b", str(b), "--k", "5",
                 "--method", "zacr", "--removal", "off", "--no-timing"],
                ["dgm", "--a", str(a), "--b", str(b), "--ratio", "0.5",
                 "--mode", "nonrigid", "--beta", "1.5"],
                ["bench", "--suite", "removal-precision", "--seed", "7",
                 "--trials", "3"],
                ["verify", "--seed", "3", "--max-disturb", "2"]):
            cmd = parse_args(argv)
            assert parse_args(cmd.canonical()) == cmd

    def test_seed_from_environment(self, monkeypatch):
        monkeypatch.setenv("ZEROMATCH_SEED", "99")
        cmd = parse_args(["bench", "--suite", "removal-precision"])
        assert cmd.seed == 99

    def test_usage_error_exit_code(self):
        assert main(["match", "--k", "1"]) == 1


class TestExecute:
    def test_match_perfect_recall(self, circle_files, tmp_path):
        a, b, gt = circle_files
        out = tmp_path / "report.json"
        status = main(["match", "--a", str(a), "--b", str(b), "--k", "10",
                       "--gt", str(gt), "--out", str(out), "--no-timing"])
        assert status == 0
        report = json.loads(out.read_text())
        assert report["metrics"]["recall"] == 1.0
        assert report["k"] == 10
        assert len(report["pairs"]) == 10
        assert "elapsedSeconds" not in report

    def test_match_ratio_flag(self, circle_files, tmp_path):
        a, b, _ = circle_files
        out = tmp_path / "report.json"
        status = main(["match", "--a", str(a), "--b", str(b),
                       "--ratio", "0.5", "--out", str(out), "--no-timing"])
        assert status == 0
        assert json.loads(out.read_text())["k"] == 5

    def test_nan_coordinate_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"points": [[0.0, 0.0], [NaN, 1.0]]}')
        good = tmp_path / "good.json"
        good.write_text('{"points": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]}')
        out = tmp_path / "r.json"
        status = main(["match", "--a", str(bad), "--b", str(good),
                       "--k", "1", "--out", str(out)])
        assert status == 2
        assert not out.exists()  # atomic: no partial artifact

    def test_malformed_json_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        status = main(["match", "--a", str(bad), "--b", str(bad), "--k", "1"])
        assert status == 2
        assert "error" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        status = main(["match", "--a", str(tmp_path / "no.json"),
                       "--b", str(tmp_path / "no.json"), "--k", "1"])
        assert status == 2

    def test_dgm_report(self, circle_files, tmp_path):
        a, b, gt = circle_files
        out = tmp_path / "dgm.json"
        status = main(["dgm", "--a", str(a), "--b", str(b), "--k", "10",
                       "--gt", str(gt), "--out", str(out), "--no-timing"])
        assert status == 0
        report = json.loads(out.read_text())
        assert report["transform"]["kind"] == "rigid"
        assert report["metrics"]["avgError"] < 1e-6
        assert report["metrics"]["recall"] == 1.0

    def test_verify_curve_csv(self, tmp_path):
        out = tmp_path / "curve.csv"
        status = main(["verify", "--seed", "1", "--inliers", "8",
                       "--outliers", "3", "--max-disturb", "3",
                       "--out", str(out), "--no-timing"])
        assert status == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "d,value"
        assert len(lines) == 5
        values = [float(line.split(",")[1]) for line in lines[1:]]
        assert values == sorted(values)  # non-decreasing for clean instances

    def test_bench_csv_and_json(self, tmp_path, capsys):
        out = tmp_path / "rp.csv"
        status = main(["bench", "--suite", "removal-precision", "--seed", "1",
                       "--trials", "2", "--inliers", "8", "--out", str(out),
                       "--no-timing"])
        assert status == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "experiment,config-id,trial,seed,metric-name,value,elapsed-ms"
        assert len(lines) == 1 + 2 * 2
        mirror = json.loads((tmp_path / "rp.json").read_text())
        assert len(mirror["rows"]) == 4
        assert "precision_removal" in capsys.readouterr().out

    def test_byte_identical_reruns(self, circle_files, tmp_path):
        a, b, gt = circle_files
        outs = []
        for name in ("r1.json", "r2.json"):
            out = tmp_path / name
            assert main(["match", "--a", str(a), "--b", str(b), "--k", "10",
                         "--seed", "5", "--out", str(out), "--no-timing"]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
