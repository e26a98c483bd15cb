"""End-to-end CLI: config validation, outputs, exit codes, determinism."""

import json
import os

import pytest

from driftpam import cli


def write_cfg(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


BENCH = {"kappa": 1.0, "h": 1.0, "seed": 0,
         "potential": {"variant": "two_point", "a": 1.0, "q": 0.5}}


def run(args):
    return cli.main(args)


def test_unknown_keys_exit_1(tmp_path, capsys):
    cfg = dict(BENCH)
    cfg["kapa"] = 2.0
    cfg["potential"] = dict(BENCH["potential"], qq=0.1)
    path = write_cfg(tmp_path, "bad.json", cfg)
    rc = run(["quenched", "--config", path, "--out", str(tmp_path / "o")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "kapa" in err and "qq" in err


def test_missing_config_exit_1(tmp_path):
    rc = run(["quenched", "--config", str(tmp_path / "none.json"),
              "--out", str(tmp_path / "o")])
    assert rc != 0


def test_invalid_parameter_exit_1(tmp_path):
    cfg = dict(BENCH, kappa=-1.0)
    path = write_cfg(tmp_path, "bad2.json", cfg)
    rc = run(["quenched", "--config", path, "--out", str(tmp_path / "o")])
    assert rc == 1


def test_numerical_failure_exit_2(tmp_path, monkeypatch):
    from driftpam.errors import NumericalFailure

    def boom(*a, **k):
        raise NumericalFailure("synthetic")

    monkeypatch.setattr(cli.qn, "lambda_quenched", boom)
    path = write_cfg(tmp_path, "ok.json", BENCH)
    rc = run(["quenched", "--config", path, "--out", str(tmp_path / "o")])
    assert rc == 2


def test_quenched_end_to_end(tmp_path):
    cfg = dict(BENCH)
    cfg["quenched"] = {"n_beta": 11, "alphas": [0.8, 1.0, 1.5],
                       "variational": True}
    path = write_cfg(tmp_path, "q.json", cfg)
    out = tmp_path / "q"
    assert run(["quenched", "--config", path, "--out", str(out)]) == 0
    result = json.loads((out / "quenched_result.json").read_text())
    assert result["schema_version"] == 1
    assert result["lambda0"]["value"] == pytest.approx(-0.3819660, abs=1e-5)
    assert result["phase"]["case"] == "A"
    assert result["lambda0_variational"] == pytest.approx(-0.3819660,
                                                          abs=1e-3)
    assert (out / "L_curve.csv").exists()
    assert (out / "legendre.csv").exists()


def test_quenched_deterministic_reruns(tmp_path):
    cfg = dict(BENCH)
    cfg["quenched"] = {"n_beta": 7}
    path = write_cfg(tmp_path, "q.json", cfg)
    o1, o2 = tmp_path / "r1", tmp_path / "r2"
    assert run(["quenched", "--config", path, "--out", str(o1)]) == 0
    assert run(["quenched", "--config", path, "--out", str(o2)]) == 0
    for name in ("quenched_result.json", "L_curve.csv"):
        assert (o1 / name).read_bytes() == (o2 / name).read_bytes()


def test_annealed_end_to_end(tmp_path):
    cfg = dict(BENCH)
    cfg["annealed"] = {"p_grid": [1.0, 2.0], "continuity": True}
    path = write_cfg(tmp_path, "a.json", cfg)
    out = tmp_path / "a"
    assert run(["annealed", "--config", path, "--out", str(out)]) == 0
    result = json.loads((out / "annealed_result.json").read_text())
    assert result["lambda_p"]["1"] == pytest.approx(-0.2928932, abs=1e-6)
    assert result["maxdrift"]["2"] == pytest.approx(
        result["lambda_p"]["2"], abs=1e-8)
    assert result["continuity_at_zero"]["shrinking"] is True
    assert (out / "lambda_p.csv").exists()


def test_simulate_end_to_end(tmp_path):
    cfg = dict(BENCH)
    cfg["simulate"] = {"t": 8.0, "n_paths": 2000}
    path = write_cfg(tmp_path, "s.json", cfg)
    out = tmp_path / "s"
    assert run(["simulate", "--config", path, "--out", str(out)]) == 0
    result = json.loads((out / "simulate_result.json").read_text())
    fk = result["feynman_kac"]
    assert abs(fk["mc_mean"] - fk["pde_u0"]) < 5 * fk["mc_stderr"]
    assert result["mass_identity"]["abs_diff"] < 1e-8
    assert (out / "gibbs_hist.csv").exists()


def test_simulate_time_reversal_written_for_h_lt_1(tmp_path):
    cfg = dict(BENCH, h=0.6)
    cfg["simulate"] = {"t": 6.0, "n_paths": 500}
    path = write_cfg(tmp_path, "s.json", cfg)
    out = tmp_path / "s"
    assert run(["simulate", "--config", path, "--out", str(out)]) == 0
    result = json.loads((out / "simulate_result.json").read_text())
    assert result["time_reversal"]["abs_diff"] < 1e-8


def test_sweep_and_report(tmp_path):
    cfg = dict(BENCH)
    cfg["sweep"] = {"parameter": "h", "values": [0.8, 0.9, 1.0], "p": 1.0}
    path = write_cfg(tmp_path, "w.json", cfg)
    out = tmp_path / "w"
    assert run(["sweep", "--config", path, "--out", str(out)]) == 0
    assert (out / "sweep.csv").exists()
    assert run(["report", "--config", path, "--out", str(out)]) == 0
    svg = (out / "sweep.svg").read_text()
    assert svg.startswith("<svg") or "<svg" in svg


def test_report_without_inputs_exits_1(tmp_path):
    path = write_cfg(tmp_path, "r.json", BENCH)
    out = tmp_path / "empty"
    os.makedirs(out)
    assert run(["report", "--config", path, "--out", str(out)]) == 1


def test_csv_format_output(tmp_path):
    cfg = dict(BENCH)
    cfg["quenched"] = {"n_beta": 5}
    path = write_cfg(tmp_path, "q.json", cfg)
    out = tmp_path / "c"
    assert run(["quenched", "--config", path, "--out", str(out),
                "--format", "csv"]) == 0
    text = (out / "quenched_result.csv").read_text()
    assert text.splitlines()[0] == "key,value"
    assert "lambda0.value" in text


def test_seed_override(tmp_path):
    cfg = dict(BENCH, h=0.9)
    cfg["quenched"] = {"n_sites": 5000, "n_beta": 5}
    path = write_cfg(tmp_path, "q.json", cfg)
    o1, o2 = tmp_path / "s1", tmp_path / "s2"
    assert run(["quenched", "--config", path, "--out", str(o1),
                "--seed", "1"]) == 0
    assert run(["quenched", "--config", path, "--out", str(o2),
                "--seed", "2"]) == 0
    r1 = json.loads((o1 / "quenched_result.json").read_text())
    r2 = json.loads((o2 / "quenched_result.json").read_text())
    assert r1["seed"] == 1 and r2["seed"] == 2
    assert r1["lambda0"]["value"] != r2["lambda0"]["value"]
