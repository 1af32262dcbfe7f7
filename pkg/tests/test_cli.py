import csv
import json

import numpy as np
import pytest

from clustergrape.cli import (
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_USAGE,
    RunConfig,
    UsageError,
    build_parser,
    main,
    parse_tgrid,
    resolve_config,
)


def read_csv(path):
    header = {}
    lines = path.read_text(encoding="utf-8").splitlines()
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            header[key] = value
    body = list(csv.reader(line for line in lines if not line.startswith("#")))
    return header, body[0], body[1:]


def test_parse_tgrid():
    assert parse_tgrid("0.5:1.0:0.25") == [0.5, 0.75, 1.0]
    assert parse_tgrid("0.77, 1.0") == [0.77, 1.0]
    for bad in ("", "1:0:0.1", "0:1:0", "a,b"):
        with pytest.raises(UsageError):
            parse_tgrid(bad)


def test_reduce_k3(tmp_path):
    out = tmp_path / "k3.csv"
    assert main(["reduce", "--graph", "K3", "--out", str(out)]) == EXIT_OK
    header, columns, rows = read_csv(out)
    assert header["d"] == "2"
    assert float(header["overlap"]) == pytest.approx(0.2)
    assert columns == ["block", "row", "col", "re", "im"]
    drift = {(int(r[1]), int(r[2])): float(r[3]) for r in rows if r[0] == "drift"}
    assert drift[(1, 1)] == pytest.approx(3 * np.pi / 2, abs=1e-10)
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["d"] == 2
    assert "wall_time" in summary


def test_reduce_grid_and_local(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["reduce", "--graph", "G2x3", "--out", str(out)]) == EXIT_OK
    assert read_csv(out)[0]["d"] == "14"
    assert main(["reduce", "--graph", "K3", "--control", "local", "--out", str(out)]) == EXIT_OK
    assert read_csv(out)[0]["d"] == "8"


def test_reduce_edge_list_file(tmp_path):
    path = tmp_path / "path.txt"
    path.write_text("# three-qubit chain\nn=3\n0 1\n1 2\n")
    out = tmp_path / "l.csv"
    assert main(["reduce", "--graph", str(path), "--out", str(out)]) == EXIT_OK
    assert read_csv(out)[0]["d"] == "3"


def test_usage_errors(tmp_path, capsys):
    assert main(["reduce", "--graph", "Q7"]) == EXIT_USAGE
    assert main(["curve", "--graph", "K3", "--tgrid", ""]) == EXIT_USAGE
    assert main(["curve", "--graph", "K3"]) == EXIT_USAGE
    assert main(["pulses", "--graph", "K3"]) == EXIT_USAGE
    assert main(["reduce", "--slices", "0"]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_curve_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["curve", "--graph", "K3", "--tgrid", "0.6,0.77,1.0", "--slices", "40", "--restarts", "4"]
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    header, columns, rows = read_csv(a)
    assert header["time_unit"] == "1/(2J)"
    assert columns[0] == "T[1/(2J)]"
    fids = [float(r[1]) for r in rows]
    assert fids[0] < 0.995
    assert fids[1] >= 0.999 and fids[2] >= 0.999


def test_table_partial_failure(tmp_path):
    out = tmp_path / "t.csv"
    code = main(["table", "K3", "Q9", "--slices", "30", "--restarts", "4", "--out", str(out)])
    assert code == EXIT_FAILURE
    _, columns, rows = read_csv(out)
    assert columns[3] == "t_min[1/(2J)]"
    assert rows[0][0] == "K3" and rows[0][-1] == "ok"
    assert 0.72 <= float(rows[0][3]) <= 0.78
    assert rows[1][0] == "Q9" and rows[1][-1].startswith("failed")
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["rows"][1]["status"].startswith("failed")


def test_analytic(tmp_path):
    out = tmp_path / "an.csv"
    assert main(["analytic", "--out", str(out)]) == EXIT_OK
    header, _, rows = read_csv(out)
    assert float(header["T[1/(2J)]"]) == pytest.approx(0.7698, abs=1e-4)
    assert float(header["verify_fidelity"]) >= 1 - 1e-9
    assert min(float(r[2]) for r in rows) == pytest.approx(0.7698, abs=1e-4)
    _, cols, traj = read_csv(tmp_path / "an_trajectory.csv")
    assert cols == ["t[1/J]", "x", "y", "z"]
    xyz = np.array([[float(v) for v in r[1:]] for r in traj])
    np.testing.assert_allclose(np.linalg.norm(xyz, axis=1), 1.0, atol=1e-9)


def test_pulses_zero_pulse_trivial(tmp_path):
    out = tmp_path / "p.csv"
    code = main(["pulses", "--graph", "K3", "--T", "1.0", "--slices", "1", "--zero-pulse", "--out", str(out)])
    assert code == EXIT_OK
    header, columns, rows = read_csv(out)
    assert float(header["achieved_fidelity"]) == pytest.approx(1.0, abs=1e-12)
    assert "warning" not in header
    assert columns == ["slice_start[1/J]", "duration[1/J]", "u1"]
    assert rows == [["0.0", "0.5", "0.0"]]


def test_pulses_hard_pulse_signature(tmp_path):
    out = tmp_path / "p.csv"
    args = ["pulses", "--graph", "K3", "--T", "0.77", "--slices", "50", "--restarts", "8", "--out", str(out)]
    assert main(args) == EXIT_OK
    header, _, rows = read_csv(out)
    assert float(header["achieved_fidelity"]) >= 0.999
    amps = np.abs([float(r[2]) for r in rows])
    # the closing hard rotation shows up as the largest amplitudes near the end
    assert np.argmax(amps) >= len(amps) - 5
    assert amps.max() > 5 * np.median(amps)


def test_pulses_local_symmetric_zero_init(tmp_path):
    out = tmp_path / "p.csv"
    args = ["pulses", "--graph", "K3", "--control", "local", "--T", "0.77", "--slices", "20",
            "--init", "zero", "--method", "gradient", "--max-iterations", "300", "--out", str(out)]
    assert main(args) == EXIT_OK
    _, columns, rows = read_csv(out)
    assert len(columns) == 2 + 6
    amps = np.array([[float(v) for v in r[2:]] for r in rows])
    x, y = amps[:, 0::2], amps[:, 1::2]
    np.testing.assert_allclose(x[:, 0], x[:, 1], atol=1e-8)
    np.testing.assert_allclose(x[:, 0], x[:, 2], atol=1e-8)
    np.testing.assert_allclose(y, 0.0, atol=1e-8)
    assert np.abs(x).max() > 0


def test_bad_method():
    assert main(["reduce", "--method", "newton"]) == EXIT_USAGE


def test_pulses_below_threshold_warns(tmp_path):
    out = tmp_path / "p.csv"
    args = ["pulses", "--graph", "K3", "--T", "0.3", "--slices", "10", "--restarts", "1", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert "warning" in read_csv(out)[0]


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "run.json"
    cfg_file.write_text(json.dumps({"graph": "K4", "slices": 7, "seed": 3}))
    args = build_parser().parse_args(["reduce", "--config", str(cfg_file), "--slices", "9"])
    cfg = resolve_config(args)
    assert cfg.graph == "K4"
    assert cfg.seed == 3
    assert cfg.slices == 9
    assert cfg.restarts == RunConfig().restarts


def test_config_unknown_key(tmp_path):
    cfg_file = tmp_path / "run.json"
    cfg_file.write_text(json.dumps({"colour": "blue"}))
    assert main(["reduce", "--config", str(cfg_file)]) == EXIT_USAGE


def test_header_echoes_config(tmp_path):
    out = tmp_path / "k4.csv"
    assert main(["reduce", "--graph", "K4", "--seed", "5", "--out", str(out)]) == EXIT_OK
    header = read_csv(out)[0]
    assert header["graph"] == "K4"
    assert header["seed"] == "5"
    assert header["control"] == "global"
