import csv
import io
import json

import numpy as np
import pytest

from weylwalk.cli import run


def out_of(capsys, argv):
    code = run(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_covariance_pair(capsys):
    code, out, _ = out_of(capsys, ["covariance", "--group", "A1xA1", "--no-timestamp"])
    assert code == 0
    S = np.array([[float(x) for x in row] for row in csv.reader(io.StringIO(out))])
    assert np.allclose(S, np.eye(2) / 6, atol=1e-12)


def test_timestamp_header(capsys):
    _, out, _ = out_of(capsys, ["covariance"])
    assert out.startswith("# generated ")


def test_ns_curve_rho_one(capsys):
    code, out, _ = out_of(capsys, ["ns-curve", "--rho", "1", "--n", "4,8", "--no-timestamp"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [float(r["tv"]) for r in rows] == [0.0, 0.0]
    assert "seconds" not in rows[0]


def test_unknown_subcommand(capsys):
    code, _, err = out_of(capsys, ["badcommand"])
    assert code == 1 and "UnknownSubcommand" in err
    assert run([]) == 1


def test_bad_flag_value(capsys):
    assert run(["covariance", "--lazy", "1.5"]) == 1
    assert run(["ns-curve", "--rho", "0"]) == 1
    assert "RhoZeroInExactNS" in capsys.readouterr().err


def test_config_unknown_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "group": "A1",\n  "colour": 3\n}\n')
    code, _, err = out_of(capsys, ["covariance", "--config", str(cfg)])
    assert code == 1
    assert "line 3" in err and "colour" in err


def test_config_bad_json(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "group": "A1",\n  "lazy": \n}\n')
    code, _, err = out_of(capsys, ["covariance", "--config", str(cfg)])
    assert code == 1 and "line 4" in err


def test_config_wrong_type(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"lazy": "a third"}')
    code, _, err = out_of(capsys, ["covariance", "--config", str(cfg)])
    assert code == 1 and "lazy" in err


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"group": "A1", "lazy": 0.5}')
    _, a, _ = out_of(capsys, ["covariance", "--config", str(cfg), "--no-timestamp"])
    _, b, _ = out_of(capsys, ["covariance", "--config", str(cfg), "--lazy", "1/3", "--no-timestamp"])
    assert float(a) == pytest.approx(0.25 / 2)
    assert float(b) == pytest.approx(1 / 6)


def test_deterministic_output(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"o{i}.csv"
        assert run(["ns-curve", "--mode", "monte-carlo", "--samples", "2000", "--rho", "0.3",
                    "--n", "4", "--seed", "9", "--no-timestamp", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_group_info(capsys):
    code, out, _ = out_of(capsys, ["group-info", "--group", "C2", "--radius", "2", "--no-timestamp"])
    info = json.loads(out)
    assert code == 0 and info["weyl_order"] == 8 and info["rank"] == 2


def test_convolve_exact(capsys):
    _, out, _ = out_of(capsys, ["convolve", "--n", "2", "--exact", "--no-timestamp"])
    rows = dict(csv.reader(io.StringIO(out)))
    assert rows["element"] == "weight"
    assert "1/3" in rows.values() and "2/9" in rows.values()


def test_hessian_and_scan(capsys):
    assert run(["hessian-check", "--group", "C2", "--no-timestamp"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]
    assert run(["spectral-scan", "--grid", "16", "--no-timestamp"]) == 0


def test_zm_study_cli(capsys):
    code, out, _ = out_of(capsys, ["zm-study", "--n", "100", "--rho", "1", "--no-timestamp"])
    assert code == 0 and out.splitlines()[1] == "1,100,0"


def test_sigma_invariance_cli(capsys):
    code, out, _ = out_of(capsys, ["sigma-invariance", "--rho", "0.5", "--no-timestamp"])
    assert code == 0 and json.loads(out)["passed"]


def test_selftest_exit_codes(capsys):
    code, out, err = out_of(capsys, ["selftest", "--only", "1,3", "--no-timestamp"])
    assert code == 0
    assert err.count("[PASS]") == 2
    assert len(json.loads(out)) == 2
