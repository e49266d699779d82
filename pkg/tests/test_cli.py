import json
import math

import numpy as np
import pytest

from robinsector.cli import (
    DEFAULTS, config_hash, parse_range, read_pgm, resolve_config, run, write_pgm,
)

SMALL = ["--n-r", "40", "--n-theta", "4", "--grading", "1.05", "--max-level", "1"]


def read_csv(path):
    text = path.read_bytes()
    assert b"\r" not in text
    lines = text.decode().splitlines()
    return lines[0].split(","), [l.split(",") for l in lines[1:]]


def test_interval_table(tmp_path):
    assert run(["interval", "--gamma", "1", "--L", "1", "--out", str(tmp_path)]) == 0
    cols, rows = read_csv(tmp_path / "interval.csv")
    assert cols[-1] == "config_hash"
    rec = dict(zip(cols, rows[0]))
    assert float(rec["m"]) == pytest.approx(1.199678640257734, abs=1e-15)
    assert float(rec["E2"]) == 0.0
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["config_hash"] == rec["config_hash"]


def test_interval_scan_range(tmp_path):
    assert run(["interval", "--scan-L", "3:8", "--out", str(tmp_path), "--formats", "csv"]) == 0
    _, rows = read_csv(tmp_path / "interval.csv")
    assert [float(r[0]) for r in rows] == [3, 4, 5, 6, 7, 8]
    assert not (tmp_path / "interval.json").exists()


def test_zero_coupling_row(tmp_path):
    assert run(["interval", "--gamma", "0", "--out", str(tmp_path)]) == 0
    cols, rows = read_csv(tmp_path / "interval.csv")
    assert float(dict(zip(cols, rows[0]))["E2"]) == pytest.approx(math.pi**2 / 4)


def test_deterministic_bytes(tmp_path):
    outs = []
    for jobs in ("1", "2"):
        assert run(["scan", "--alphas", "0.6,0.9", "--jobs", jobs, "--out", str(tmp_path)] + SMALL) in (0, 3)
        outs.append([(tmp_path / f).read_bytes() for f in ("scan.csv", "scan.json", "config.json")])
    assert outs[0] == outs[1]


def test_config_precedence(tmp_path):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps({"gamma": 2.0, "L": 0.5}))
    cfg = resolve_config(["interval", "--config", str(cfgfile)])
    assert (cfg["gamma"], cfg["L"]) == (2.0, 0.5)
    cfg = resolve_config(["interval", "--config", str(cfgfile), "--gamma", "3"])
    assert (cfg["gamma"], cfg["L"]) == (3.0, 0.5)
    assert resolve_config(["interval"])["gamma"] == DEFAULTS["gamma"]


def test_hash_ignores_output_location():
    a = resolve_config(["interval", "--out", "x", "--jobs", "3"])
    b = resolve_config(["interval", "--out", "y", "--formats", "json"])
    c = resolve_config(["interval", "--gamma", "1.5"])
    assert config_hash(a) == config_hash(b) != config_hash(c)


def test_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert run(["interval", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert run(["interval", "--formats", "xyz", "--out", str(tmp_path)]) == 2
    assert run(["fit", "--alphas", "0.3,0.5", "--out", str(tmp_path)]) == 2
    assert run(["sector", "--alpha", "2.0", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        run(["sector", "--alpha", "wide"])
    assert exc.value.code == 2
    assert "robinsector:" in capsys.readouterr().err


def test_parse_range():
    assert parse_range("0.1, 0.2") == [0.1, 0.2]
    assert parse_range("2:4") == [2.0, 3.0, 4.0]
    np.testing.assert_allclose(parse_range("0.04:0.16:geometric:3"), [0.04, 0.08, 0.16])
    np.testing.assert_allclose(parse_range("0:1:linear:3"), [0, 0.5, 1])
    with pytest.raises(Exception):
        parse_range("0:1:cubic:3")


def test_sector_outputs(tmp_path):
    code = run(["sector", "--alpha", "0.7853981633974483", "--formats", "csv,json,pgm", "--dump-pencil",
                "--out", str(tmp_path)] + SMALL)
    assert code in (0, 3)
    cols, rows = read_csv(tmp_path / "sector.csv")
    rec = dict(zip(cols, rows[0]))
    assert float(rec["E"]) == pytest.approx(-2.0, rel=1e-2)
    assert int(rec["count_below_threshold"]) == 1
    img = read_pgm(tmp_path / "sector_eigenfunction.pgm")
    assert img.dtype == np.dtype(">u2") and img.max() == 65535
    assert (tmp_path / "sector_K.txt").exists()


def test_scan_svg(tmp_path):
    run(["scan", "--alphas", "0.5,0.8", "--formats", "svg", "--log-alpha", "--out", str(tmp_path)] + SMALL)
    svg = (tmp_path / "scan.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_certify(tmp_path):
    assert run(["certify", "--alpha", "0.9", "--n-r", "60", "--out", str(tmp_path)]) == 0
    cols, rows = read_csv(tmp_path / "certify.csv")
    rec = dict(zip(cols, rows[0]))
    assert float(rec["enclosure_lo"]) <= float(rec["dense_E"]) <= float(rec["enclosure_hi"])


def test_count(tmp_path):
    assert run(["count", "--alphas", "0.1,0.2", "--out", str(tmp_path)]) == 0
    cols, rows = read_csv(tmp_path / "count.csv")
    assert [int(r[1]) for r in rows] == [8, 4]


def test_stargraph_small(tmp_path):
    code = run(["stargraph", "--angles", "0,1.5707963267948966", "--r-max", "40", "--n-r", "40",
                "--n-theta", "32", "--grading", "1.05", "--out", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "stargraph.json").read_text())
    assert rep["sector_counts"] == [1, 0]


def test_pgm_round_trip(tmp_path):
    img = np.outer(np.arange(5), np.arange(7)).astype(float)
    write_pgm(tmp_path / "x.pgm", img)
    back = read_pgm(tmp_path / "x.pgm")
    assert back.shape == (5, 7)
    np.testing.assert_array_equal(back, np.round(img / img.max() * 65535))
