import json
import math
import subprocess
import sys

import numpy as np
import pytest

from percolab import cli
from percolab.fit import StriatedDataset, synthetic_dataset
from reference_tables import STRIATED_TABLE


def call(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_cardy_values(capsys):
    assert call(capsys, "cardy", "--r", "1", "--format", "pretty")[1].strip() == "0.5000000000"
    assert call(capsys, "cardy", "--z", "0", "--format", "pretty")[1].strip() == "0"
    assert call(capsys, "cardy", "--r", "1.4878048780487805", "--format", "pretty")[1].startswith("0.3003")
    code, out, _ = call(capsys, "cardy", "--r", "1.488")
    assert code == 0 and out.splitlines()[-1] == "0.3002432886"


@pytest.mark.parametrize("argv", [["cardy"], ["cardy", "--r", "1", "--z", "0.5"], ["cardy", "--z", "2"],
                                  ["cardy", "--r", "-1"]])
def test_cardy_usage_errors(capsys, argv):
    code, out, err = call(capsys, *argv)
    assert code == 2 and out == ""
    doc = json.loads(err)
    assert doc["error"]["type"] == "usage" and doc["error"]["message"]


@pytest.mark.parametrize("argv", [["rect-table", "--rows", "99"], ["annulus", "10", "5"],
                                  ["torus", "1"], ["parallelogram", "--alpha", "1.2"],
                                  ["cylinder", "3", "10"], ["rect-table", "--n", "0"],
                                  ["rect-table", "--p", "1.5"], ["rect-table", "--bogus"],
                                  ["annulus-exponent", "--ratios", "2"], ["rect-table", "--workers", "0"]])
def test_invalid_parameters_exit_two(capsys, argv):
    code, _, err = call(capsys, *argv)
    assert code == 2
    assert "error" in json.loads(err)


def test_rect_table_single_sample(capsys):
    code, out, _ = call(capsys, "rect-table", "--n", "1", "--rows", "0,8", "--scale", "0.05", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    tab = doc["tables"]["rectangles"]
    assert tab["columns"] == ["width", "height", "r", "pi_h_cft", "pi_h", "pi_v", "pi_hv", "ci95"]
    for row in tab["rows"]:
        assert all(row[k] in (0.0, 1.0) for k in (4, 5, 6))
    assert [row[:2] for row in tab["rows"]] == [[50, 50], [61, 41]]


def test_json_round_trip_equals_memory():
    cfg = cli.resolve(["rect-table", "--n", "200", "--rows", "0,3", "--scale", "0.05", "--seed", "4"])
    doc = cli.run(cfg)
    assert json.loads(cli.render(doc, "json")) == doc
    cfg = cli.resolve(["torus", "16", "--n", "100"])
    doc = cli.run(cfg)
    assert json.loads(cli.render(doc, "json")) == doc


def test_csv_layout_and_determinism(capsys):
    argv = ["annulus", "8", "30", "--n", "300", "--seed", "9"]
    _, a, _ = call(capsys, *argv)
    _, b, _ = call(capsys, *argv, "--workers", "4")
    _, c, _ = call(capsys, *argv, "--workers", "4")
    assert b == c
    lines = a.splitlines()
    assert lines[0].startswith("# config: ")
    config = json.loads(lines[0][len("# config: "):])
    assert config["seed"] == 9 and config["params"]["r1"] == 8
    assert lines[1] == "# table: annulus"
    assert lines[2] == "event,successes,trials,p_hat,ci95"
    assert [ln.split(",")[0] for ln in lines[3:9]] == ["h_int", "h_ext", "v_int", "v_ext", "hv_int", "hv_ext"]
    # only the workers count differs between the runs
    assert a.splitlines()[2:] == b.splitlines()[2:]


def test_torus_tally_rows(capsys):
    code, out, _ = call(capsys, "torus", "12", "--n", "200", "--format", "json")
    rows = json.loads(out)["tables"]["torus"]["rows"]
    names = [r[0] for r in rows]
    assert names[0] == "H" and names[-1] == "0"
    assert sum(r[1] for r in rows) == 200


def test_every_subcommand_runs(capsys, tmp_path):
    runs = [
        ["parallelogram", "--alpha", "0.25", "--r", "1,1.5", "--sites", "900", "--rotation", "0,1/12"],
        ["annulus-exponent", "--r1", "6", "--ratios", "2,4"],
        ["cylinder", "20", "24"],
        ["exterior", "6", "20"],
        ["branched", "--alpha", "0.5", "--r", "1", "--sites", "2000"],
        ["torus", "8", "--Ly", "6"],
    ]
    for argv in runs:
        code, out, err = call(capsys, *argv, "--n", "50", "--format", "pretty")
        assert code == 0, err
        assert out.strip()


def test_out_file(capsys, tmp_path):
    dest = tmp_path / "res.json"
    code, out, _ = call(capsys, "cardy", "--z", "0.5", "--format", "json", "--out", str(dest))
    assert code == 0 and out == ""
    assert json.loads(dest.read_text())["tables"]["cardy"]["rows"] == [[pytest.approx(0.5, abs=1e-14)]]


def test_config_file_merges_under_flags(tmp_path):
    conf = tmp_path / "run.yaml"
    conf.write_text("seed: 17\nn: 40\nrect-table:\n  scale: 0.05\n  rows: [1, 2]\n  lattice: triangular\n")
    cfg = cli.resolve(["rect-table", "--config", str(conf), "--n", "60"])
    assert cfg.seed == 17 and cfg.n == 60
    assert cfg.params["scale"] == 0.05 and cfg.params["rows"] == [1, 2]
    assert cfg.params["lattice"] == "triangular"
    bad = tmp_path / "bad.yaml"
    bad.write_text("rect-table:\n  widht: 3\n")
    with pytest.raises(cli.UsageError):
        cli.resolve(["rect-table", "--config", str(bad)])


def test_missing_config_is_usage_error(capsys, tmp_path):
    code, _, err = call(capsys, "cardy", "--r", "1", "--config", str(tmp_path / "nope.yaml"))
    assert code == 2 and json.loads(err)["error"]["exception"] == "FileNotFoundError"


def test_striated_fit_from_synthetic_csv(capsys, tmp_path):
    ratios = [r for r, *_ in STRIATED_TABLE]
    data = synthetic_dataset(1.2, 0.45 * math.pi, ratios)
    r, h, v = data.arrays()
    path = tmp_path / "synthetic.csv"
    body = "".join(f"{a!r},{b!r},{c!r}\n" for a, b, c in zip(r.tolist(), h.tolist(), v.tolist()))
    path.write_text("r,pi_h,pi_v\n" + body)
    code, out, err = call(capsys, "striated", "--dataset", str(path), "--format", "json")
    assert code == 0, err
    tab = json.loads(out)["tables"]["fit"]
    fitted = dict(zip(tab["columns"], tab["rows"][0]))
    assert fitted["a"] == pytest.approx(1.2, abs=1e-3)
    assert fitted["theta_over_pi"] == pytest.approx(0.45, abs=1e-3)
    assert fitted["residual"] == pytest.approx(fitted["residual_alt"], rel=1e-9, abs=1e-15)


def test_striated_simulation_output_feeds_back(capsys, tmp_path):
    dest = tmp_path / "striated.csv"
    code, _, err = call(capsys, "striated", "--scale", "0.02", "--rows", "0,5,10,15", "--n", "300",
                        "--out", str(dest))
    assert code == 0, err
    data = StriatedDataset.from_csv(dest.read_text())
    assert len(data) == 4
    assert np.all(np.diff(data.arrays()[0]) > 0)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "percolab", "cardy", "--r", "1", "--format", "pretty"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.5000000000"
