import json
import subprocess
import sys

import numpy as np
import pytest

from bpicdsc.harness import io as csvio
from bpicdsc.harness.cli import main, make_config
from bpicdsc.harness.sim import (ConfigError, SimConfig, pearson, run_ber_approx, run_ber_sim,
                                 run_complexity, run_correlation, run_fer_sim, wilson_halfwidth)


def _cli(tmp_path, *args):
    out = tmp_path / "out.csv"
    code = main([*args, "--out", str(out)])
    return code, out


def test_wilson_halfwidth():
    assert wilson_halfwidth(0, 0) == 0.0
    assert wilson_halfwidth(50, 100) == pytest.approx(0.096168, abs=1e-5)
    assert wilson_halfwidth(0, 1000) > 0


def test_pearson_null_guard():
    assert pearson(np.ones(5), np.arange(5.0)) is None
    assert pearson(np.arange(5.0), 2 * np.arange(5.0)) == pytest.approx(1.0)


def test_csv_schema_and_round_trip(tmp_path):
    code, out = _cli(tmp_path, "ber-sim", "--n", "8", "--k", "2", "--snr", "0,5", "--trials", "200",
                     "--detector", "b-pic-dsc,mmse", "--chunk", "50")
    assert code == 0
    text = out.read_text().splitlines()
    assert text[0] == f"# schema={csvio.SWEEP_SCHEMA}"
    schema, rows = csvio.read_csv(out)
    assert schema == csvio.SWEEP_SCHEMA
    assert len(rows) == 4
    assert {r["detector"] for r in rows} == {"b-pic-dsc", "mmse"}
    for r in rows:
        assert int(r["bit_errors"]) / (int(r["trials"]) * 4) == pytest.approx(float(r["ber"]))


@pytest.mark.parametrize("experiment,extra", [
    ("ber-sim", ["--detector", "b-pic-dsc,ib-pic-dsc,ml", "--trials", "300", "--max-errors", "20"]),
    ("fer-sim", ["--trials", "12", "--code-spec", "CODE", "--list-size", "4"]),
    ("correlation", ["--trials", "200"]),
])
def test_byte_identical_across_workers(tmp_path, experiment, extra):
    spec = tmp_path / "code.json"
    spec.write_text(json.dumps({"eta": 32, "kappa": 22, "crc_len": 6, "crc_poly_hex": "0x21"}))
    extra = [str(spec) if e == "CODE" else e for e in extra]
    base = [experiment, "--n", "8", "--k", "2", "--snr", "2", "--chunk", "37", "--seed", "5", *extra]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main([*base, "--workers", "1", "--out", str(a)]) == 0
    assert main([*base, "--workers", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_errors_exit_two(tmp_path, capsys):
    assert main(["ber-sim", "--n", "2", "--k", "4"]) == 2
    assert main(["ber-sim", "--detector", "zf"]) == 2
    assert main(["ber-sim", "--mod", "8"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["ber-sim", "--trials", "x"]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 8, "bogus": 1}))
    assert main(["ber-sim", "--config", str(cfg)]) == 2
    assert main(["ber-sim", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["fer-sim", "--n", "8", "--k", "3", "--trials", "1"]) == 2


def test_json_config_and_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 16, "k": 4, "detector": "mmse,b-pic-dsc", "snr": [1, 2],
                               "max-errors": 0, "trials": 10}))
    c = make_config(["ber-sim", "--config", str(cfg), "--k", "2"])
    assert (c.n, c.k, c.detectors, c.snr, c.max_errors) == (16, 2, ["mmse", "b-pic-dsc"], [1, 2], 0)


def test_negative_snr_syntax():
    assert make_config(["ber-sim", "--snr=-4,-3.5"]).snr == [-4.0, -3.5]


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "bpicdsc", "complexity", "--n", "128", "--k", "64",
                          "--detector", "B-PIC-DSC,MMSE"], capture_output=True, text=True)
    assert out.returncode == 0
    lines = out.stdout.splitlines()
    assert lines[0] == f"# schema={csvio.COMPLEXITY_SCHEMA}"
    assert "337088" in out.stdout


def test_complexity_rows():
    rows = run_complexity(SimConfig(experiment="complexity", n=128, k=64,
                                    detectors=["B-PIC-DSC", "D-EP", "EP"], t_values=[10]))
    assert [r.detector for r in rows] == ["B-PIC-DSC", "EP"]
    rows = run_complexity(SimConfig(experiment="complexity", n=128, k=64, detectors=["D-EP"],
                                    nc=32, clusters=4, t_values=[10]))
    assert rows[0].multiplications == 3346560


def test_noiseless_ber_is_zero():
    res = run_ber_sim(SimConfig(n=16, k=4, snr=[200.0], trials=300, chunk=100,
                                detectors=["b-pic-dsc", "ib-pic-dsc", "ml", "mmse"]))
    assert all(r.bit_errors == 0 for r in res.rows)


def test_early_stop_is_a_prefix_of_the_full_run():
    base = dict(n=8, k=4, snr=[0.0], trials=2000, chunk=100, seed=3, detectors=["mmse"])
    stopped = run_ber_sim(SimConfig(max_errors=150, **base)).rows[0]
    assert stopped.trials < 2000 and stopped.trials % 100 == 0
    full = run_ber_sim(SimConfig(max_errors=0, **{**base, "trials": stopped.trials})).rows[0]
    assert (stopped.bit_errors, stopped.frame_errors) == (full.bit_errors, full.frame_errors)


def test_detectors_share_draws():
    base = dict(n=8, k=2, snr=[3.0], trials=400, chunk=100, max_errors=0, seed=11)
    joint = run_ber_sim(SimConfig(detectors=["mmse", "b-pic-dsc"], **base))
    alone = run_ber_sim(SimConfig(detectors=["b-pic-dsc"], **base))
    assert joint.select("b-pic-dsc")[0] == alone.rows[0]


def test_ber_approx_rows():
    res = run_ber_approx(SimConfig(experiment="ber-approx", n=128, k=32, snr=[0.0, 6.0],
                                   detectors=["b-pic-dsc", "ib-pic-dsc"], alpha=[0.25, 0.5]))
    assert len(res.rows) == 8
    assert res.metadata["fixed_point_failures"] == 0
    b = [r for r in res.rows if r.detector == "b-pic-dsc" and r.k == 32]
    assert b[1].ber < b[0].ber


def test_noiseless_fer_is_zero(tmp_path):
    spec = tmp_path / "code.json"
    spec.write_text(json.dumps({"eta": 64, "kappa": 38, "crc_len": 6, "crc_poly_hex": "0x21"}))
    res = run_fer_sim(SimConfig(experiment="fer-sim", n=16, k=4, snr=[60.0], trials=20,
                                code_spec=str(spec), decoders=["sc", "scs", "seq"], list_size=4))
    assert {r.detector for r in res.rows} == {"b-pic-dsc+sc", "b-pic-dsc+scs", "b-pic-dsc+seq"}
    assert all(r.frame_errors == 0 for r in res.rows)
    seq = [r for r in res.rows if r.detector.endswith("seq")][0]
    assert seq.avg_flops_mul == 0
    assert seq.avg_iterations == 64


def test_correlation_rows():
    rows = run_correlation(SimConfig(experiment="correlation", n=16, k=4, snr=[5.0], trials=200,
                                     chunk=50))
    assert rows[0].iteration == 2
    for r in rows:
        for v in (r.corr_estimates, r.corr_errors):
            assert v is None or -1.0 <= v <= 1.0


def test_config_validation_direct():
    with pytest.raises(ConfigError):
        SimConfig(experiment="ber-sim", trials=0).validate()
    with pytest.raises(ConfigError):
        SimConfig(psi=1.0).validate()


def test_per_detector_tmax(tmp_path):
    c = make_config(["ber-sim", "--tmax", "8,pic-dsc=2"])
    assert (c.tmax, c.t_max_for("pic-dsc"), c.t_max_for("b-pic-dsc")) == (8, 2, 8)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"tmax": "pic-dsc=3"}))
    c = make_config(["ber-sim", "--config", str(cfg)])
    assert (c.tmax, c.t_max_for("pic-dsc")) == (10, 3)
    assert main(["ber-sim", "--tmax", "pic-dsc=0"]) == 2
    assert main(["ber-sim", "--tmax", "zf=3"]) == 2
    base = dict(n=16, k=8, snr=[4.0], trials=200, chunk=100, max_errors=0, seed=2, detectors=["pic-dsc"])
    one = run_ber_sim(SimConfig(tmax_per_detector={"pic-dsc": 1}, **base)).rows[0]
    assert one.avg_iterations == 1
    many = run_ber_sim(SimConfig(**base)).rows[0]
    assert many.avg_iterations > 1
