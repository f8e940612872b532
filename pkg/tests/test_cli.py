import csv
import io
import json
import math
import subprocess
import sys

import jsonschema
import pytest

from frontspeed.cli import RESULT_SCHEMA, ConfigError, RunConfig, parse_config, run


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), stdout=out)
    return code, out.getvalue()


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def test_speed_constant(tmp_path):
    prefix = str(tmp_path / "out")
    code, text = call("speed", "--medium", "constant", "--out", prefix)
    assert code == 0
    assert "c* = 2.000000" in text and "closed form = 2.000000" in text
    assert text.startswith("[minimal speed")
    row = read_csv(prefix + ".csv")[0]
    assert float(row["c_star"]) == pytest.approx(2.0, rel=1e-6)
    doc = json.loads(open(prefix + ".json", encoding="utf-8").read())
    jsonschema.validate(doc, RESULT_SCHEMA)
    assert doc["medium"]["name"] == "constant"


def test_sweep_epsilon_csv(tmp_path):
    prefix = str(tmp_path / "eps")
    code, text = call("sweep", "--medium", "shear", "--regime", "epsilon", "--points", "1,0.25",
                      "--grid", "64", "--out", prefix)
    assert code == 0
    assert "small-diffusion limit" in text
    rows = read_csv(prefix + ".csv")
    assert [r["parameter"] for r in rows] == ["eps", "eps"]
    assert float(rows[0]["theory_limit"]) == pytest.approx(2 * math.sqrt(1.5))


def test_sweep_csv_is_deterministic(tmp_path):
    texts = []
    for i in range(2):
        prefix = str(tmp_path / f"run{i}")
        assert call("sweep", "--medium", "cosine1d", "--regime", "beta", "--points", "0.5,1,2",
                    "--grid", "32", "--out", prefix, "--format", "csv")[0] == 0
        texts.append(open(prefix + ".csv", "rb").read())
    assert texts[0] == texts[1]
    assert not (tmp_path / "run0.json").exists()


def test_simulate_matches_library(tmp_path, media):
    from frontspeed.frontsim import measure_spreading_speed
    prefix = str(tmp_path / "sim")
    code, text = call("simulate", "--medium", "constant", "--T", "20", "--W", "40", "--m", "16",
                      "--out", prefix)
    assert code == 0
    meas, _ = measure_spreading_speed(media["constant"], 20.0, 0.5, 40, 16)
    assert f"measured speed = {meas.speed:.6f}" in text
    rows = read_csv(prefix + ".csv")
    assert float(rows[-1]["position"]) == pytest.approx(meas.positions[-1], rel=1e-15)


def test_simulate_refuses_shear():
    assert call("simulate", "--medium", "shear")[0] == 2


def test_usage_errors(tmp_path):
    assert call("speed")[0] == 64
    assert call("bogus")[0] == 64
    assert call("speed", "--medium", "no-such-medium")[0] == 64
    assert call("sweep", "--medium", "shear", "--points", "1")[0] == 64
    bad = tmp_path / "m.json"
    bad.write_text(json.dumps({"periods": [-1.0], "fields": {"a": {"kind": "constant", "params": [1]}},
                               "zeta": {"kind": "constant", "params": [1]}}))
    code = subprocess.run([sys.executable, "-m", "frontspeed", "speed", "--medium", str(bad)],
                          capture_output=True, text=True)
    assert code.returncode == 64
    assert "medium.periods[0]" in code.stderr


def test_refusals_exit_2():
    assert call("sweep", "--medium", "layered1d", "--regime", "diffusion", "--points", "1,2")[0] == 2
    assert call("sweep", "--medium", "shear_flow", "--regime", "reaction", "--points", "1,2")[0] == 2


def test_zero_average_waiver(tmp_path):
    doc = {"geometry": "shear", "periods": [1.0],
           "fields": {"alpha": {"kind": "constant", "params": [1]}, "d": {"kind": "constant", "params": [1]}},
           "zeta": {"kind": "constant", "params": [1]}, "q1": {"kind": "constant", "params": [-0.5]}}
    path = tmp_path / "drift.json"
    path.write_text(json.dumps(doc))
    assert call("speed", "--medium", str(path), "--grid", "16")[0] == 64
    code, text = call("speed", "--medium", str(path), "--grid", "16", "--waive-zero-average")
    assert code == 0
    assert "c* = 2.500000" in text


def test_validate_exit_codes(media):
    assert call("validate", "--medium", "cell")[0] == 0


def test_config_defaults_and_override(tmp_path):
    cfg = parse_config({"command": "speed", "medium": "constant"}, None)
    assert isinstance(cfg, RunConfig)
    assert (cfg.tol, cfg.mode, cfg.T, cfg.W, cfg.format) == (1e-6, "to-infinity", 40.0, 60, "both")
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"medium": "constant.json", "tol": 1e-3}))
    code, text = call("speed", "--config", str(path), "--tol", "1e-8")
    assert code == 0


def test_config_errors():
    with pytest.raises(ConfigError, match="colour"):
        parse_config({"command": "speed", "medium": "constant", "colour": 1}, None)
    with pytest.raises(ConfigError, match="lambda"):
        parse_config({"command": "speed", "medium": "constant", "lambda_min": 1.0}, None)
    with pytest.raises(ConfigError, match="regime"):
        parse_config({"command": "sweep", "medium": "constant", "points": [1.0]}, None)


def test_threads_do_not_change_output(tmp_path, monkeypatch):
    out = []
    for threads in ("1", "4"):
        monkeypatch.setenv("FRONTSPEED_THREADS", threads)
        prefix = str(tmp_path / f"t{threads}")
        assert call("sweep", "--medium", "shear_flow", "--regime", "period", "--points", "0.5,1,2",
                    "--grid", "32", "--out", prefix, "--format", "csv")[0] == 0
        out.append(open(prefix + ".csv", "rb").read())
    assert out[0] == out[1]
