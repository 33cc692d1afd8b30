import json
import math
import os

import numpy as np
import pytest

from ffl.cli import main


def write_config(path, payload):
    path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
    return str(path)


def dyadic_scan_config(tmp_path, **scan_overrides):
    scan = {"xi_min": 1.0, "xi_max": 16.0, "points": 16, "tol": 1e-7,
            "method": "exact"}
    scan.update(scan_overrides)
    return write_config(tmp_path / "cfg.json", {
        "system": {"kind": "named", "name": "dyadic-uniform"},
        "scan": scan,
        "seed": 3,
    })


def read_rows(path):
    lines = [l for l in path.read_text().splitlines() if l and not l.startswith("#")]
    return [l.split(",") for l in lines[1:]]


def test_scan_integer_frequencies_vanish(tmp_path):
    cfg = dyadic_scan_config(tmp_path)
    out = tmp_path / "out"
    assert main(["fourier-scan", "--config", cfg, "--out", str(out)]) == 0
    for row in read_rows(out / "scan.csv"):
        xi, mag = float(row[0]), float(row[3])
        if abs(xi - round(xi)) < 1e-12:
            assert mag <= 1e-6


def test_round_trip_byte_identical(tmp_path):
    cfg = dyadic_scan_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["fourier-scan", "--config", cfg, "--out", str(a)]) == 0
    assert main(["fourier-scan", "--config", cfg, "--out", str(b)]) == 0
    assert (a / "scan.csv").read_bytes() == (b / "scan.csv").read_bytes()
    # JSON artifacts are byte-identical across reruns too
    assert main(["verify", "--config", cfg, "--out", str(a)]) == 0
    assert main(["verify", "--config", cfg, "--out", str(b)]) == 0
    assert (a / "verify.json").read_bytes() == (b / "verify.json").read_bytes()


def test_headers_carry_hash_and_seed(tmp_path):
    cfg = dyadic_scan_config(tmp_path)
    out = tmp_path / "out"
    main(["fourier-scan", "--config", cfg, "--out", str(out)])
    head = (out / "scan.csv").read_text().splitlines()[:3]
    assert head[0] == "# ffl fourier-scan"
    assert head[1].startswith("# config_sha256: ") and len(head[1].split()[-1]) == 64
    assert head[2] == "# seed: 3"


def test_unknown_keys_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.json", {
        "system": {"kind": "named", "name": "cantor", "bogus": 1},
        "scan": {"xi_min": 1, "xi_max": 2, "points": 4},
    })
    code = main(["fourier-scan", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"]["kind"] == "validation"
    assert "bogus" in err["error"]["message"]


def test_budget_exhaustion_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", {
        "system": {"kind": "affine1d",
                   "maps": [{"ratio": 0.5, "translate": 0.0},
                            {"ratio": 1 / 3, "translate": 2 / 3}],
                   "weights": [0.5, 0.5]},
        "scan": {"xi_min": 1e6, "xi_max": 1e6, "points": 1, "tol": 1e-12,
                 "method": "exact"},
    })
    code = main(["fourier-scan", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--budget", "100"])
    assert code == 3
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"]["kind"] == "budget"


def test_missing_config_is_validation_error(tmp_path, capsys):
    assert main(["fourier-scan", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)]) == 2


def test_env_overrides(tmp_path, monkeypatch):
    cfg = dyadic_scan_config(tmp_path)
    out = tmp_path / "env_out"
    monkeypatch.setenv("FFL_SEED", "99")
    monkeypatch.setenv("FFL_OUT", str(out))
    assert main(["fourier-scan", "--config", cfg]) == 0
    assert "# seed: 99" in (out / "scan.csv").read_text()


def test_report_generates_deterministic_svg(tmp_path):
    cfg = dyadic_scan_config(tmp_path)
    out = tmp_path / "out"
    main(["fourier-scan", "--config", cfg, "--out", str(out)])
    assert main(["report", "--config", cfg, "--out", str(out)]) == 0
    first = (out / "scan.svg").read_bytes()
    assert main(["report", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "scan.svg").read_bytes() == first
    assert first.startswith(b"<svg")


def test_verify_passes_on_fresh_scan(tmp_path):
    cfg = dyadic_scan_config(tmp_path)
    out = tmp_path / "out"
    main(["fourier-scan", "--config", cfg, "--out", str(out)])
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "verify.json").read_text())
    assert doc["result"]["checked"] >= 1
    assert doc["result"]["failures"] == []


def test_verify_catches_corruption(tmp_path):
    cfg = dyadic_scan_config(tmp_path)
    out = tmp_path / "out"
    main(["fourier-scan", "--config", cfg, "--out", str(out)])
    path = out / "scan.csv"
    lines = path.read_text().splitlines()
    parts = lines[4].split(",")
    parts[1] = "0.77"  # corrupt one real part
    lines[4] = ",".join(parts)
    path.write_text("\n".join(lines) + "\n")
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 2


def test_pushforward_scan(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", {
        "system": {"kind": "named", "name": "cantor"},
        "map": {"expr": "(pow x 2)"},
        "scan": {"xi_min": 1.0, "xi_max": 32.0, "points": 8, "tol": 1e-5},
    })
    out = tmp_path / "out"
    assert main(["pushforward-scan", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(out / "pushforward.csv")
    assert len(rows) == 8
    assert all(float(r[3]) <= 1.0 + float(r[4]) for r in rows)


def test_disintegrate_subcommands(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", {
        "system": {"kind": "affine1d",
                   "maps": [{"ratio": 0.5, "translate": 0.0},
                            {"ratio": 1 / 3, "translate": 2 / 3}],
                   "weights": [0.5, 0.5]},
        "disintegrate": {"block_length": 2, "xis": [1.0, 5.0],
                         "n_sequences": 300, "prefix_length": 64,
                         "alpha": 0.9, "xi": 100.0},
        "seed": 5,
    })
    out = tmp_path / "out"
    assert main(["disintegrate", "classes", "--config", cfg, "--out", str(out)]) == 0
    classes = json.loads((out / "classes.json").read_text())["result"]
    assert sum(c["size"] for c in classes["classes"]) == 16
    assert math.fsum(c["weight"] for c in classes["classes"]) == pytest.approx(1.0)
    assert main(["disintegrate", "sample", "--config", cfg, "--out", str(out)]) == 0
    assert main(["disintegrate", "consistency", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "consistency.json").read_text())["result"]
    assert all(e["passed"] for e in rep["entries"])
    assert main(["disintegrate", "membership", "--config", cfg, "--out", str(out)]) == 0
    assert main(["disintegrate", "ek", "--config", cfg, "--out", str(out)]) == 0
    ek = json.loads((out / "ek.json").read_text())["result"]
    assert ek["n_eff"] >= 1


def test_equidist_subcommands(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", {
        "system": {"kind": "named", "name": "dyadic-uniform"},
        "equidist": {"base": 2, "gamma": 0.0, "rate": "(div 1 (mul 2 n))",
                     "horizon": 2000, "seeds": 5, "epsilon": 1.0},
        "seed": 11,
    })
    out = tmp_path / "out"
    assert main(["equidist", "count", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(out / "count.csv")
    assert len(rows) == 5
    summary = json.loads((out / "count_summary.json").read_text())["result"]
    assert 0.0 <= summary["pass_fraction_unit_band"] <= 1.0
    assert main(["equidist", "weyl", "--config", cfg, "--out", str(out)]) == 0
    assert main(["equidist", "digits", "--config", cfg, "--out", str(out)]) == 0


def test_decay_subcommands(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", {
        "system": {"kind": "named", "name": "cantor"},
        "decay": {"band_base": 3.0, "band_min": 2, "band_max": 6,
                  "samples_per_band": 64, "method": "exact", "tol": 1e-5,
                  "family_base": 3.0, "count": 8, "limit": 81.0,
                  "exponent": 0.1, "grid_step": 0.25},
        "seed": 2,
    })
    out = tmp_path / "out"
    assert main(["decay", "fit", "--config", cfg, "--out", str(out)]) == 0
    fit = json.loads((out / "decay_fit.json").read_text())["result"]
    assert abs(fit["eta_hat"]) <= 0.1
    assert (out / "decay_fit.svg").exists()
    assert main(["decay", "sparse", "--config", cfg, "--out", str(out)]) == 0
    assert main(["decay", "probe", "--config", cfg, "--out", str(out)]) == 0
    mags = [float(r[3]) for r in read_rows(out / "probe.csv")]
    assert max(mags) - min(mags) <= 2e-5


def test_conjugate_subcommand(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", {
        "system": {"kind": "affine1d",
                   "maps": [{"ratio": 0.25, "translate": 0.0},
                            {"ratio": 0.25, "translate": 0.75}],
                   "weights": [0.5, 0.5]},
        "map": {"expr": "(pow x 2)", "inverse": "(pow x 0.5)",
                "draws": 40000, "ks_tol": 0.02},
        "seed": 4,
    })
    out = tmp_path / "out"
    assert main(["conjugate", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "conjugate.json").read_text())["result"]
    assert doc["ks_statistic"] <= 0.02
    assert len(doc["maps"]) == 2


def test_fibre_product_config(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", {
        "system": {"kind": "fibre_product",
                   "base": [{"id": "L", "ratio": 0.5, "translate": 0.0},
                            {"id": "R", "ratio": 0.5, "translate": 0.5}],
                   "fibres": [
                       {"base": "L", "id": "a", "ratio": 1 / 3, "translate": 0.0,
                        "weight": 1 / 3},
                       {"base": "L", "id": "b", "ratio": 1 / 3, "translate": 2 / 3,
                        "weight": 1 / 3},
                       {"base": "R", "id": "c", "ratio": 1 / 3, "translate": 1 / 3,
                        "weight": 1 / 3}]},
        "disintegrate": {"block_length": 2, "alpha": 0.2},
    })
    out = tmp_path / "out"
    assert main(["disintegrate", "classes", "--config", cfg, "--out", str(out)]) == 0
    classes = json.loads((out / "classes.json").read_text())["result"]
    assert classes["fold"] == 1
    assert sum(c["size"] for c in classes["classes"]) == 9


def test_threaded_scan_matches_serial(tmp_path):
    cfg = dyadic_scan_config(tmp_path)
    serial, threaded = tmp_path / "s", tmp_path / "t"
    assert main(["fourier-scan", "--config", cfg, "--out", str(serial),
                 "--threads", "1"]) == 0
    assert main(["fourier-scan", "--config", cfg, "--out", str(threaded),
                 "--threads", "4"]) == 0
    assert (serial / "scan.csv").read_bytes() == (threaded / "scan.csv").read_bytes()


def test_decay_bands_with_pushforward_method(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", {
        "system": {"kind": "named", "name": "cantor"},
        "map": {"expr": "(pow x 2)"},
        "decay": {"band_base": 3.0, "band_min": 3, "band_max": 6,
                  "samples_per_band": 64, "method": "pushforward", "tol": 1e-3},
        "seed": 1,
    })
    out = tmp_path / "out"
    assert main(["decay", "bands", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "decay_bands.json").read_text())["result"]
    peaks = [b["peak"] for b in doc["bands"]]
    assert len(peaks) == 4 and all(0 < p <= 1.01 for p in peaks)
