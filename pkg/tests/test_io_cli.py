import json

import numpy as np
import pytest

from topoproj.calculus import jet
from topoproj.cli import main, parse_beta, parse_length, parse_sweep
from topoproj.grid import Boundary, GridSpec
from topoproj.io import dump_jet, read_field, sidecar_path, write_field, write_pgm


def test_field_round_trip(tmp_path, rng):
    g = GridSpec(7, 5, 0.25, Boundary.CLAMPED)
    v = rng.random(g.shape)
    p = tmp_path / "f.raw"
    write_field(p, v, g)
    assert p.stat().st_size == 7 * 5 * 8
    assert json.loads(sidecar_path(p).read_text()) == {"nx": 7, "ny": 5, "dx": 0.25, "boundary": "clamped"}
    back, g2 = read_field(p)
    assert np.array_equal(back, v) and g2 == g
    # row-major, y outer, little-endian
    assert np.frombuffer(p.read_bytes()[:8], "<f8")[0] == v[0, 0]
    assert np.frombuffer(p.read_bytes()[8:16], "<f8")[0] == v[0, 1]


def test_read_errors_name_the_file(tmp_path):
    with pytest.raises(OSError, match="missing.raw"):
        read_field(tmp_path / "missing.raw")
    g = GridSpec(4, 4)
    p = tmp_path / "short.raw"
    write_field(p, np.zeros(g.shape), g)
    p.write_bytes(b"\0" * 8)
    with pytest.raises(ValueError, match="short.raw"):
        read_field(p)


def test_dump_jet(tmp_path, rng):
    g = GridSpec(6, 6, 0.5)
    paths = dump_jet(tmp_path / "j", jet(rng.random(g.shape), g), g)
    assert [p.suffix for p in paths] == [".val", ".dx", ".dy", ".dxx", ".dxy", ".dyy"]
    assert all(sidecar_path(p).exists() for p in paths)


def test_pgm(tmp_path):
    p = tmp_path / "x.pgm"
    write_pgm(p, np.array([[0.0, 1.0], [0.6, 0.4]]))
    data = p.read_bytes()
    assert data.startswith(b"P5\n2 2\n255\n")
    assert list(data[-4:]) == [255, 0, 0, 255]


def test_parsers():
    assert parse_beta("inf") == float("inf") and parse_beta("64") == 64.0
    assert parse_length("0.5px", 0.1) == pytest.approx(0.05) and parse_length("0.02", 0.1) == 0.02
    assert parse_sweep("0:1:3").tolist() == [0.0, 0.5, 1.0]
    assert parse_sweep("0.1,0.2").tolist() == [0.1, 0.2]


@pytest.fixture
def field_file(tmp_path, rng):
    g = GridSpec(24, 24, 1 / 24)
    p = tmp_path / "rho.raw"
    write_field(p, rng.random(g.shape), g)
    return p


def test_cli_project_homogenize_ruler(tmp_path, field_file, capsys):
    out = tmp_path / "hat.raw"
    assert main(["project", "--in", str(field_file), "--method", "ssp2", "--beta", "inf", "--eta", "0.5",
                 "--rhat", "0.5px", "--radius", "3", "--out", str(out)]) == 0
    assert "gray pixels" in capsys.readouterr().out
    hat, _ = read_field(out)
    assert hat.min() >= 0 and hat.max() <= 1
    tj = tmp_path / "t.json"
    assert main(["homogenize", "--structure", str(out), "--k1", "1e-4", "--k2", "1.0", "--out", str(tj)]) == 0
    t = json.loads(tj.read_text())
    assert set(t) == {"xx", "xy", "yy", "residuals"} and len(t["residuals"]) == 3
    assert main(["ruler", "--structure", str(out), "--phase", "both"]) == 0
    r = json.loads(capsys.readouterr().out)
    assert set(r) == {"solid_px", "void_px"}


def test_cli_synthetic(tmp_path):
    csv = tmp_path / "s.csv"
    assert main(["synthetic", "cassini", "--sweep", "0.9:1.1:21", "--csv", str(csv)]) == 0
    assert csv.read_text().splitlines()[0] == "e,ssp1,ssp2,ssp2_d1,ssp2_d2"
    assert main(["synthetic", "parabola", "--sweep", "0.4,0.5,0.6", "--csv", str(csv)]) == 0


def test_cli_optimize_and_bench(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("n_seeds = 1\nmax_outer = 3\nkernel_radius_px = 2.5\n[grid]\nnx = 15\n"
                   "[materials]\nkappa1 = 0.1\nkappa2 = 1.0\n")
    assert main(["optimize", "--config", str(cfg), "--method", "ssp1", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "run_ssp1_0.csv").exists() and (tmp_path / "o" / "final.pgm").exists()
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "summary.json").exists()


def test_cli_errors_exit_nonzero(tmp_path, capsys):
    assert main(["homogenize", "--structure", str(tmp_path / "nope.raw")]) != 0
    bad = tmp_path / "bad.toml"
    bad.write_text("n_seeds = 0\n")
    assert main(["bench", "--config", str(bad)]) != 0
    bad.write_text("not toml [[[\n")
    assert main(["bench", "--config", str(bad)]) != 0
    assert main(["bench", "--config", str(tmp_path / "absent.toml")]) != 0
    assert "error" in capsys.readouterr().err
