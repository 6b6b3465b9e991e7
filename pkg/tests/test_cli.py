import json

import numpy as np
import pytest

from yoccoz.cli import RunConfig, main
from yoccoz.errors import InvalidArgument

AIRPLANE = "-1.7548776662466927"


def read(path):
    return json.loads(path.read_text())


@pytest.mark.parametrize("data", [{"bogus": 1}, {"resolution": -2}, {"n_theta": 1.5},
                                  {"c": "-1", "fibonacci_bits": 200}, {"suite": ["nope"]},
                                  {"h0": 0}])
def test_config_rejects(data):
    with pytest.raises(InvalidArgument):
        RunConfig.from_dict(data)


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"resolution": 64, "annulus": {"kind": "round", "r": 0.5, "R": 1.0}}))
    assert main(["modulus", "--config", str(cfg), "--resolution", "128", "--deterministic",
                 "--out", str(tmp_path / "m")]) == 0
    rep = read(tmp_path / "m" / "modulus.json")
    assert rep["meta"]["resolution"] == 128 and rep["result"]["resolution"] == 256
    assert rep["result"]["value"] == pytest.approx(np.log(2) / (2 * np.pi), rel=1e-3)


def test_deterministic_reports_are_identical(tmp_path):
    out = tmp_path / "m" / "modulus.json"
    runs = []
    for _ in range(2):
        main(["modulus", "--resolution", "64", "--deterministic", "--out", str(tmp_path / "m")])
        runs.append(out.read_bytes())
    assert runs[0] == runs[1]
    assert b"timestamp" not in runs[0]


def test_verify_passes(tmp_path):
    code = main(["verify", "--suite", "round,grotzsch", "--resolutions", "128,256",
                 "--out", str(tmp_path)])
    rep = read(tmp_path / "verify.json")
    assert code == 0 and rep["summary"]["pass"]
    assert rep["meta"]["resolutions"] == [128, 256]
    assert all("pass" in c for c in rep["checks"])


def test_verify_fixture_failure(tmp_path):
    n = 64
    x = (np.arange(n) + 0.5) / n * 2.1 - 1.05
    z = x[None, :] + 1j * x[:, None]
    np.savez(tmp_path / "touch.npz", outer=np.abs(z) < 1, inner=np.abs(z - 0.5) < 0.5)
    code = main(["verify", "--suite", "round", "--resolutions", "64,128",
                 "--fixture", str(tmp_path / "touch.npz"), "--out", str(tmp_path / "v")])
    rep = read(tmp_path / "v" / "verify.json")
    assert code == 3
    assert rep["summary"]["failed_clauses"] == ["annulus-gap"]


def test_trace_ray_output(tmp_path):
    assert main(["trace-ray", "--c=-2", "--angle", "1/3", "--angle", "0", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "rays.jsonl").read_text().splitlines()
    land = [json.loads(s)["landing"] for s in lines]
    assert land[0] == pytest.approx([-1, 0], abs=1e-6)
    assert land[1] == pytest.approx([2, 0], abs=1e-6)


def test_render_writes_png(tmp_path):
    assert main(["render", "--c=-2", "--render-size", "64", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "render.png").read_bytes()[:4] == b"\x89PNG"


def test_airplane_nest_refused(tmp_path):
    code = main(["build-nest", "--c", AIRPLANE, "--horizon", "400", "--n-pc", "200",
                 "--resolution", "256", "--out", str(tmp_path)])
    assert code == 4
    rep = read(tmp_path / "nest.json")
    assert rep["renormalization"][0]["verdict"] == "RENORMALIZABLE-AT-HORIZON"
    assert rep["renormalization"][0]["period"] == 3


def test_zero_level_nest_is_header_only(tmp_path):
    code = main(["build-nest", "--fibonacci-bits", "400", "--horizon", "2000", "--n-pc", "2000",
                 "--levels", "0", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "nest_golden.csv").read_text() == "n,nu,p\n"
    assert len(read(tmp_path / "nest.json")["levels"]) == 1


def test_nest_stopping_at_horizon_exits_2(tmp_path):
    code = main(["build-nest", "--fibonacci-bits", "400", "--horizon", "2000", "--n-pc", "2000",
                 "--levels", "1", "--no-measure", "--out", str(tmp_path)])
    assert code == 2
    assert read(tmp_path / "nest.json")["stopped"]
