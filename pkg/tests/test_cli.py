import csv
import json

import numpy as np
import pytest

from rfmap.cli import main
from rfmap.io import read_map_csv
from rfmap.pointprocess import Region, sample_ppp, stream_seed


def _run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


def test_density_anchors(capsys):
    code, out, _ = _run(capsys, "density", "--beta", 0.5)
    assert code == 0 and "94.2897" in out
    code, out, _ = _run(capsys, "density", "--beta", 0.9, "--area-km2", 108.47)
    assert code == 0 and "313.224" in out and "33975.4" in out


def test_density_fixed_radius(capsys):
    code, out, _ = _run(capsys, "density", "--beta", 0.5, "--r-km", 0.04846)
    assert code == 0
    assert float(out.split("=")[1].split()[0]) == pytest.approx(94.0, rel=0.01)


def test_density_monte_carlo(capsys):
    code, out, _ = _run(capsys, "density", "--beta", 0.5, "--mc-trials", 20, "--seed", 1)
    assert code == 0
    p = float(out.split("coverage =")[1].split()[0])
    assert abs(p - 0.5) < 0.02


def test_density_sweeps(tmp_path, capsys):
    code, out, _ = _run(capsys, "density", "--sweep-beta", "0.1:0.9:9")
    rows = list(csv.reader(out.splitlines()))
    assert code == 0 and rows[0] == ["beta", "lambda_s_per_km2"] and len(rows) == 10
    assert float(rows[5][1]) == pytest.approx(94.28971132304593, rel=1e-12)
    path = tmp_path / "f.csv"
    code, _, _ = _run(capsys, "density", "--sweep-freq", "1e8:6e9:12", "--out", path)
    rows = list(csv.reader(open(path)))
    lam = [float(r[1]) for r in rows[1:]]
    assert code == 0 and rows[0][0] == "f_hz" and np.all(np.diff(lam) > 0)


def test_density_bad_beta(capsys):
    code, _, err = _run(capsys, "density", "--beta", 1.5)
    assert code == 2 and "beta" in err


def test_density_bad_range_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["density", "--sweep-beta", "0.9:0.1"])
    assert exc.value.code == 2


def _simulate(tmp_path, capsys, name="sim", *extra):
    out = tmp_path / name
    code, stdout, err = _run(capsys, "simulate", "--lambda-s", 94, "--seed", 11, "--out", out, *extra)
    return code, out, stdout, err


def test_simulate_artifacts(tmp_path, capsys):
    code, out, stdout, _ = _simulate(tmp_path, capsys)
    assert code == 0 and "MSE" in stdout
    for name in ("truth.csv", "truth.json", "truth.pgm", "recon.csv", "recon.json",
                 "recon.pgm", "sites.json", "records.jsonl", "manifest.json"):
        assert (out / name).exists(), name
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 11 and man["config"]["lambda_s"] == 94.0
    assert man["streams"]["sensors"] == stream_seed(11, "sensors")
    assert set(man["artifacts"]) >= {"recon.csv", "records.jsonl"}
    n_lines = sum(1 for _ in open(out / "records.jsonl"))
    assert n_lines == man["n_sensors"]
    assert read_map_csv(out / "truth.csv").shape == (100, 100)


def test_simulate_is_reproducible(tmp_path, capsys):
    _, a, _, _ = _simulate(tmp_path, capsys, "a")
    _, b, _, _ = _simulate(tmp_path, capsys, "b")
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["artifacts"] == mb["artifacts"]
    assert ma["config_sha256"] != "" and ma["mse_db2"] == mb["mse_db2"]


def test_simulate_from_config(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"lambda_t": 2, "lambda_s": 200, "seed": 4,
                               "grid_nx": 30, "grid_ny": 20}))
    code, stdout, _ = _run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "o", "--no-pgm")
    assert code == 0
    assert read_map_csv(tmp_path / "o" / "recon.csv").shape == (20, 30)
    assert not (tmp_path / "o" / "recon.pgm").exists()
    # command-line flags win over the file
    code, _, _ = _run(capsys, "simulate", "--config", cfg, "--seed", 5, "--out", tmp_path / "p")
    assert json.loads((tmp_path / "p" / "manifest.json").read_text())["seed"] == 5


@pytest.mark.parametrize("text, needle", [
    ('{"lambda_t": 3, "lambda_s": 94}', "'seed'"),
    ('{"lambda_t": 3, "lambda_s": 94, "seed": 1,\n "colour": 2}', ":2: unknown key"),
    ('{"lambda_t": 3, "lambda_s": -94, "seed": 1}', "lambda_s"),
])
def test_simulate_config_errors(tmp_path, capsys, text, needle):
    cfg = tmp_path / "bad.json"
    cfg.write_text(text)
    code, _, err = _run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "o")
    assert code == 2 and needle in err


def test_simulate_missing_config_is_io_error(tmp_path, capsys):
    code, _, err = _run(capsys, "simulate", "--config", tmp_path / "nope.json")
    assert code == 4 and "nope.json" in err


def test_simulate_degenerate_seed(tmp_path, capsys):
    seed = next(s for s in range(1000)
                if len(sample_ppp(Region.square(), 1.0, stream_seed(s, "sensors"))) < 3)
    code, _, err = _run(capsys, "simulate", "--lambda-s", 1, "--seed", seed, "--out", tmp_path)
    assert code == 3 and "degenerate" in err


def test_simulate_ensemble(tmp_path, capsys):
    code, _, stdout, _ = _simulate(tmp_path, capsys, "ens", "--seeds", 4)
    assert code == 0 and "ensemble mean MSE over 4 seeds" in stdout
    rows = list(csv.DictReader(open(tmp_path / "ens" / "mse_per_seed.csv")))
    assert [int(r["seed"]) for r in rows] == [11, 12, 13, 14]
    mean = np.mean([float(r["mse_db2"]) for r in rows])
    man = json.loads((tmp_path / "ens" / "manifest.json").read_text())
    assert man["ensemble_mean_mse_db2"] == pytest.approx(mean, rel=1e-12)


def test_map_rebuilds_simulated_reconstruction(tmp_path, capsys):
    _, sim, _, _ = _simulate(tmp_path, capsys)
    code, stdout, _ = _run(capsys, "map", sim / "records.jsonl", "--band", 999e6, 1001e6,
                           "--region", 0, 1, 0, 1, "--out", tmp_path / "m")
    assert code == 0 and "0 records dropped" in stdout
    assert (tmp_path / "m" / "map.csv").read_bytes() == (sim / "recon.csv").read_bytes()


def test_map_from_latlon_records(tmp_path, capsys):
    recs = tmp_path / "r.jsonl"
    with open(recs, "w") as fh:
        for i, (lat, lon, p) in enumerate([(41.70, -86.24, -120.0), (41.71, -86.24, -125.0),
                                           (41.70, -86.22, -118.0), (41.71, -86.23, -130.0)]):
            fh.write(json.dumps({"sensor_id": f"n{i}", "timestamp": 100.0 + i, "lat": lat,
                                 "lon": lon, "f_start_hz": 915e6, "bin_hz": 1e4,
                                 "psd_dbm_per_hz": [p] * 16, "gain_db": 0.0}) + "\n")
    code, stdout, _ = _run(capsys, "map", recs, "--band", 915e6, 915.2e6, "--grid", 20, 10,
                           "--out", tmp_path / "m", "--fill", "nearest")
    assert code == 0 and "4 sites" in stdout
    vals = read_map_csv(tmp_path / "m" / "map.csv")
    assert vals.shape == (10, 20) and np.isfinite(vals).all()


def test_map_errors(tmp_path, capsys):
    empty = tmp_path / "e.jsonl"
    empty.write_text("\n")
    code, _, err = _run(capsys, "map", empty, "--band", 1, 2)
    assert code == 2
    bad = tmp_path / "b.jsonl"
    bad.write_text('{"sensor_id": "a"}\nnot json\n')
    code, _, err = _run(capsys, "map", bad, "--band", 1, 2)
    assert code == 2 and "b.jsonl:" in err
    code, _, _ = _run(capsys, "map", tmp_path / "missing.jsonl", "--band", 1, 2)
    assert code == 4


def test_map_collinear_sites(tmp_path, capsys):
    recs = tmp_path / "c.jsonl"
    with open(recs, "w") as fh:
        for i in range(3):
            fh.write(json.dumps({"sensor_id": f"c{i}", "timestamp": 0.0, "x_km": 0.1 * i,
                                 "y_km": 0.1 * i, "f_start_hz": 1e9, "bin_hz": 1e3,
                                 "psd_dbm_per_hz": [-100.0]}) + "\n")
    code, _, err = _run(capsys, "map", recs, "--band", 0.9e9, 1.1e9, "--region", 0, 1, 0, 1)
    assert code == 3 and "degenerate" in err


def test_welch_u8(tmp_path, capsys):
    rng = np.random.default_rng(0)
    raw = np.clip(np.round(127.5 + 30 * rng.standard_normal(2 * 8192)), 0, 255).astype(np.uint8)
    iq = tmp_path / "x.cu8"
    raw.tofile(iq)
    out = tmp_path / "psd.json"
    code, stdout, _ = _run(capsys, "welch", iq, "--format", "u8", "--rate", 2.048e6,
                           "--center", 1e9, "--band", 1e9 - 1.024e6, 1e9 + 1.024e6, "--out", out)
    assert code == 0
    d = json.loads(out.read_text())
    assert len(d["psd_dbm_per_hz"]) == 256 and d["window"] == "hann"
    # per-component variance (30/127.5)^2, two components
    want = 10 * np.log10(2 * (30 / 127.5) ** 2)
    assert d["band_power_dbm"] == pytest.approx(want, abs=0.25)


def test_welch_errors(tmp_path, capsys):
    iq = tmp_path / "x.cf32"
    np.zeros(64, "<f4").tofile(iq)
    code, _, err = _run(capsys, "welch", iq, "--format", "f32", "--rate", 1e6)
    assert code == 2 and "256" in err
    code, _, _ = _run(capsys, "welch", iq, "--format", "f32", "--rate", 1e6, "--segment", 24)
    assert code == 2
    code, _, _ = _run(capsys, "welch", tmp_path / "none.cf32", "--format", "f32", "--rate", 1e6)
    assert code == 4
