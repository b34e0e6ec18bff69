from __future__ import annotations

import csv
import json

import pytest

from contraction_dos.cli import ConfigError, load_config, main

NSA_CFG = {"model": {"family": "nsa", "g": 1.0, "B": 4.0}, "windows": [4, 8], "seeds": [0, 1, 2],
           "functions": [[1], [0, 0, 0, 1]], "tol": 1e-8, "moments": 4}
BAND_CFG = {"model": {"family": "band", "alpha": 1, "beta": 0, "gamma": 0, "delta": 0.25},
            "windows": [4, 8], "seeds": {"master_seed": 5, "count": 16},
            "functions": [[1], [0, 0, 1], {"name": "cube", "coefficients": [0, 0, 0, 1]}]}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def read_checks(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("bad", [
    {"windows": [8, 4]},
    {"windows": [4, 4]},
    {"seeds": []},
    {"functions": []},
    {"tol": 0.5},
    {"tol": 0},
    {"colour": "blue"},
    {"checks": ["no_such_check"]},
    {"model": {"family": "nsa", "g": 1.0, "B": -1.0}},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        load_config({**NSA_CFG, **bad})


def test_seed_block_is_deterministic():
    a, b = load_config(BAND_CFG), load_config(BAND_CFG)
    assert a.seeds == b.seeds and len(a.seeds) == 16 and len(set(a.seeds)) == 16


def test_bad_config_exit_code(tmp_path, capsys):
    p = write_cfg(tmp_path, {**NSA_CFG, "seeds": []})
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_spectrum_outputs(tmp_path):
    p = write_cfg(tmp_path, NSA_CFG)
    out = tmp_path / "o"
    assert main(["spectrum", "--config", str(p), "--out", str(out)]) == 0
    assert (out / "spectrum_n8_seed2.csv").exists() and (out / "spectrum_n8_seed2.svg").exists()
    rows = list(csv.reader(open(out / "spectrum_n8_seed2.csv")))
    assert rows[0] == ["re", "im"] and len(rows) == 18
    assert all(abs(float(im)) < 1e-8 for _, im in rows[1:])
    assert "<polyline" in (out / "spectrum_n4_seed0.svg").read_text()
    radii = read_checks(out / "spectral_radius.csv")
    assert len(radii) == 6


def test_band_ring(tmp_path):
    p = write_cfg(tmp_path, BAND_CFG)
    out = tmp_path / "o"
    assert main(["spectrum", "--config", str(p), "--out", str(out)]) == 0
    for row in read_checks(out / "spectral_radius.csv"):
        assert abs(float(row["spr"]) - 0.5) < 1e-10
    assert all(r["passed"] == "true" for r in read_checks(out / "spectrum_checks.csv")
               if r["check"] == "band_closed_form")


def test_dos_outputs(tmp_path):
    p = write_cfg(tmp_path, BAND_CFG)
    out = tmp_path / "o"
    assert main(["dos", "--config", str(p), "--out", str(out), "--threads", "3"]) == 0
    rep = json.loads((out / "dos_n8.json").read_text())
    assert rep["L_values"]["1"] == [1.0, 0.0]
    assert rep["quad_values"]["1"][0] == pytest.approx(1)
    assert rep["pairing_values"]["1"] == [1.0, 0.0]
    assert rep["mc_mean"]["1"][0] == pytest.approx(1)
    checks = read_checks(out / "dos_checks.csv")
    assert any(c["check"] == "mc_zero" and "cube" in c["context"] for c in checks)
    assert all(c["passed"] in ("true", "false") for c in checks)
    header = next(csv.reader(open(out / "psi_n4.csv")))
    assert header == ["t_or_re", "im_of_arg", "re_val", "im_val"]


def test_dos_nsa_psi_real(tmp_path):
    p = write_cfg(tmp_path, NSA_CFG)
    out = tmp_path / "o"
    assert main(["dos", "--config", str(p), "--out", str(out)]) == 0
    assert any(c["check"] == "psi_real_axis" for c in read_checks(out / "dos_checks.csv"))


def test_converge_single_window(tmp_path):
    p = write_cfg(tmp_path, {**NSA_CFG, "windows": [8]})
    out = tmp_path / "o"
    assert main(["converge", "--config", str(p), "--out", str(out)]) == 0
    rows = read_checks(out / "converge.csv")
    assert len(rows) == 2 and {r["n"] for r in rows} == {"8"}
    assert json.loads((out / "converge.json").read_text())["trend_flags"] == {}


def test_converge_trend_flags(tmp_path):
    p = write_cfg(tmp_path, {**NSA_CFG, "windows": [4, 8, 16]})
    out = tmp_path / "o"
    main(["converge", "--config", str(p), "--out", str(out)])
    flags = json.loads((out / "converge.json").read_text())["trend_flags"]
    assert any(k.startswith("trend_spr_approach") for k in flags)
    assert any(k.startswith("trend_diff_decreasing") for k in flags)


def test_requested_trend_gates_exit(tmp_path):
    # seed 0 does not give a monotone |L - Ltilde| for z^3 at these windows
    cfg = {**NSA_CFG, "windows": [8, 16, 32, 64], "seeds": [0], "functions": [[0, 0, 0, 1]],
           "checks": ["trend_diff_decreasing"]}
    p = write_cfg(tmp_path, cfg)
    assert main(["converge", "--config", str(p), "--out", str(tmp_path / "o")]) == 1


def test_kernels_nsa(tmp_path):
    p = write_cfg(tmp_path, {**NSA_CFG, "seeds": list(range(8))})
    out = tmp_path / "o"
    assert main(["kernels", "--config", str(p), "--out", str(out)]) == 0
    names = {c["check"] for c in read_checks(out / "kernels_checks.csv")}
    assert {"herglotz", "psi_g_two_route", "poisson_positivity", "uniform_circle_psi",
            "nsa_moments_vs_dk", "bergman_reproducing"} <= names
    assert (out / "psi_g.csv").exists() and (out / "borel.csv").exists()


def test_kernels_band(tmp_path):
    p = write_cfg(tmp_path, BAND_CFG)
    out = tmp_path / "o"
    assert main(["kernels", "--config", str(p), "--out", str(out)]) == 0
    assert (out / "psi_r.csv").exists()


def test_validate_deterministic(tmp_path):
    p = write_cfg(tmp_path, BAND_CFG)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["validate", "--config", str(p), "--out", str(a)]) == 0
    assert main(["validate", "--config", str(p), "--out", str(b), "--threads", "4"]) == 0
    for name in ("validate_checks.csv", "validate.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_tol_flag_overrides(tmp_path):
    p = write_cfg(tmp_path, NSA_CFG)
    out = tmp_path / "o"
    assert main(["dos", "--config", str(p), "--out", str(out), "--tol", "1e-3"]) == 0
    thresholds = {c["threshold"] for c in read_checks(out / "dos_checks.csv")
                  if c["check"] == "three_route_pairing"}
    assert thresholds == {"0.001"}
    assert main(["dos", "--config", str(p), "--out", str(out), "--tol", "1"]) == 2
