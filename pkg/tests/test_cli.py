"""End-to-end CLI coverage over temporary files."""
import json
import math

import pytest

from spectra import cli, pencil
from spectra import contains_point

from conftest import unit_disk


def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr().out
    return code, out


def write_disk(tmp_path):
    path = tmp_path / "disk.json"
    pencil.save(unit_disk(), path)
    return str(path)


class TestConvertAndCheck:
    def test_ellipsoid_convert_and_member(self, tmp_path, capsys):
        src = tmp_path / "ell.json"
        src.write_text(json.dumps({"c": [0.0, 0.0], "Q": [[1.0, 0.0], [0.0, 1.0]]}))
        out = tmp_path / "disk.json"
        code, _ = run_cli(["convert", "ellipsoid", "--in", f"@{src}", "--out", str(out)], capsys)
        assert code == 0
        code, text = run_cli(["check", "member", str(out), "--point", "[0.5, 0.5]"], capsys)
        assert code == 0 and json.loads(text)["member"] is True
        code, text = run_cli(["check", "member", str(out), "--point", "[1.5, 0.0]"], capsys)
        assert code == 1 and json.loads(text)["member"] is False

    def test_ball_and_bounded(self, tmp_path, capsys):
        out = tmp_path / "ball.json"
        code, _ = run_cli(["convert", "ball", "--dim", "2", "--p", "3/2",
                           "--out", str(out)], capsys)
        assert code == 0
        code, text = run_cli(["check", "bounded", str(out)], capsys)
        assert code == 0 and json.loads(text)["bounded"] is True

    def test_empty_check_exit_codes(self, tmp_path, capsys):
        src = tmp_path / "poly.json"
        src.write_text(json.dumps({"A": [[1.0], [-1.0]], "b": [-1.0, -1.0]}))
        out = tmp_path / "empty.json"
        run_cli(["convert", "hpoly", "--in", f"@{src}", "--out", str(out)], capsys)
        code, text = run_cli(["check", "empty", str(out)], capsys)
        assert code == 0 and json.loads(text)["empty"] is True


class TestOps:
    def test_sum_and_translate_pipeline(self, tmp_path, capsys):
        disk = write_disk(tmp_path)
        shifted = tmp_path / "shifted.json"
        code, _ = run_cli(["op", "translate", disk, "-b", "[2.0, 0.0]",
                           "--out", str(shifted)], capsys)
        assert code == 0
        summed = tmp_path / "sum.json"
        code, _ = run_cli(["op", "sum", disk, str(shifted), "--out", str(summed)], capsys)
        assert code == 0
        result = pencil.load(summed)
        assert contains_point(result, [3.9, 0.0]).contains
        assert not contains_point(result, [4.1, 0.0]).contains

    def test_lpsum_and_hull_report_exactness(self, tmp_path, capsys):
        disk = write_disk(tmp_path)
        out = tmp_path / "out.json"
        code, text = run_cli(["op", "convhull", disk, disk, "--out", str(out)], capsys)
        assert code == 0 and json.loads(text.splitlines()[0])["exact"] is True
        code, _ = run_cli(["op", "lpsum", disk, disk, "--p", "3/2",
                           "--out", str(out)], capsys)
        assert code == 0

    def test_cone_of_shifted_disk(self, tmp_path, capsys):
        disk = write_disk(tmp_path)
        shifted = tmp_path / "shifted.json"
        run_cli(["op", "translate", disk, "-b", "[2.0, 0.0]", "--out", str(shifted)], capsys)
        out = tmp_path / "cone.json"
        code, text = run_cli(["op", "cone", str(shifted), "--out", str(out)], capsys)
        assert code == 0 and json.loads(text.splitlines()[0])["exact"] is True
        cone = pencil.load(out)
        assert contains_point(cone, [1.0, 0.5]).contains
        assert not contains_point(cone, [1.0, 0.7]).contains

    def test_map_with_inline_matrix(self, tmp_path, capsys):
        disk = write_disk(tmp_path)
        out = tmp_path / "flat.json"
        code, _ = run_cli(["op", "map", disk, "-T", "[[2.0, 0.0], [0.0, 1.0]]",
                           "--out", str(out)], capsys)
        assert code == 0
        result = pencil.load(out)
        assert contains_point(result, [1.9, 0.0]).contains
        assert not contains_point(result, [0.0, 1.1]).contains


class TestReduceVolumePlot:
    def test_reduce_poly(self, tmp_path, capsys):
        disk = write_disk(tmp_path)
        out = tmp_path / "poly.json"
        code, _ = run_cli(["reduce", "--in", disk, "--strategy", "poly",
                           "--target-size", "8", "--out", str(out)], capsys)
        assert code == 0
        assert pencil.load(out).size == 8

    def test_volume_json(self, tmp_path, capsys):
        disk = write_disk(tmp_path)
        code, text = run_cli(["volume", "--in", disk, "--dirs", "128"], capsys)
        assert code == 0
        report = json.loads(text)
        assert report["volume"] == pytest.approx(math.pi, rel=0.02)

    def test_plot_csv(self, tmp_path, capsys):
        disk = write_disk(tmp_path)
        out = tmp_path / "pts.csv"
        code, _ = run_cli(["plot", "--in", disk, "--dirs", "12", "--out", str(out)], capsys)
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "x,y" and len(lines) == 13


class TestHarnessCommands:
    def test_estimate_random_system(self, tmp_path, capsys):
        log = tmp_path / "log.jsonl"
        code, _ = run_cli(["estimate", "--random-dim", "2", "--horizon", "6",
                           "--reduce-every", "3", "--seed", "4", "--out", str(log)], capsys)
        assert code == 0
        records = [json.loads(line) for line in log.read_text().splitlines()]
        assert len(records) == 7
        assert all(rec["containment_checks"] == 1 for rec in records[1:])

    def test_estimate_explicit_system(self, tmp_path, capsys):
        sys_file = tmp_path / "sys.json"
        sys_file.write_text(json.dumps({
            "A": [[0.9, 0.1], [0.0, 0.9]],
            "B": [[1.0, 0.0], [0.0, 1.0]],
            "L": [[0.2, 0.0], [0.0, 0.2]],
            "C": [[1.0, 0.0], [0.0, 1.0]],
            "F": [[0.5, 0.0], [0.0, 0.5]],
        }))
        log = tmp_path / "log.jsonl"
        code, _ = run_cli(["estimate", "--system", f"@{sys_file}", "--horizon", "4",
                           "--seed", "7", "--out", str(log)], capsys)
        assert code == 0
        records = [json.loads(line) for line in log.read_text().splitlines()]
        assert len(records) == 5
        assert all(rec["containment_checks"] == 1 for rec in records[1:])

    def test_estimate_volume_logging(self, tmp_path, capsys):
        log = tmp_path / "log.jsonl"
        code, _ = run_cli(["estimate", "--random-dim", "2", "--horizon", "3",
                           "--seed", "2", "--log-volume", "--out", str(log)], capsys)
        assert code == 0
        records = [json.loads(line) for line in log.read_text().splitlines()]
        assert all(rec["volume_estimate"] > 0 for rec in records)

    def test_reach_config(self, tmp_path, capsys):
        config = tmp_path / "reach.json"
        config.write_text(json.dumps({
            "A": [[0.9, 0.1], [-0.1, 0.9]],
            "B": [[0.5, 0.0], [0.0, 0.5]],
            "x_bar0": [0.0, 0.0],
            "u_bar": [0.0, 0.0],
            "Q_list": [[[1.0, 0.0], [0.0, 1.0]], [[0.5, 0.0], [0.0, 0.25]]],
            "U_list": [[[0.25, 0.0], [0.0, 0.25]]],
            "p1": "3",
            "p2": "3/2",
            "horizon": 3,
        }))
        log = tmp_path / "log.jsonl"
        sets_dir = tmp_path / "sets"
        code, _ = run_cli(["reach", "--config", f"@{config}", "--out", str(log),
                           "--sets-dir", str(sets_dir)], capsys)
        assert code == 0
        records = [json.loads(line) for line in log.read_text().splitlines()]
        assert len(records) == 4
        assert records[-1]["set_bytes"] > records[0]["set_bytes"]
        stored = pencil.load(sets_dir / "X_3.json")
        assert stored.n == 2

    def test_error_reporting(self, tmp_path, capsys):
        disk = write_disk(tmp_path)
        code = cli.main(["op", "translate", disk, "-b", "[1.0, 2.0, 3.0]", "--out", "-"])
        err = capsys.readouterr().err
        assert code == 2 and "error:" in err
