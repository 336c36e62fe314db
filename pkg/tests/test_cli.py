import numpy as np
import pytest

from kecollapse.acceptance import fixture_path
from kecollapse.cli import main, parse_t


@pytest.fixture
def line_poly(tmp_path):
    path = tmp_path / "line.txt"
    path.write_text("# 1 + z1 + z2\n1 0 0 0 0\n1 0 0 1 0\n1 0 0 0 1\n")
    return path


def run(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_t():
    assert parse_t("e-5") == pytest.approx(np.exp(-5))
    assert parse_t("0.25") == 0.25


def test_solve_ma_outputs(tmp_path, capsys):
    out = tmp_path / "sol.csv"
    code, text, _ = run(["solve-ma", "--dim", 1, "--resolution", 32, "--out", out], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x1,phi,res"
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (31, 3)
    assert "phi_at_barycenter" in text
    assert (tmp_path / "sol.summary.txt").read_text() == text
    assert b"\r" not in out.read_bytes()


def test_solve_ma_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(["solve-ma", "--dim", 2, "--resolution", 16, "--out", path], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("args", [
    ["solve-ma", "--dim", 5],
    ["solve-ma", "--dim", 1, "--resolution", 4],
    ["solve-ma", "--dim", 1, "--kappa", -1],
    ["no-such-command"],
    ["amoeba", "--poly", "missing.txt", "--t", "e-5", "--region", "-2,2"],
])
def test_invalid_input_exit_code(args, tmp_path, capsys):
    code, _, _ = run(args + ["--out", tmp_path / "x"] if args[0] == "solve-ma" else args, capsys)
    assert code == 2


def test_worker_env_validated(monkeypatch, capsys):
    monkeypatch.setenv("KECOLLAPSE_MAX_WORKERS", "zero")
    assert run(["dual-complex", "--fixture", fixture_path("square_trivial.txt")], capsys)[0] == 2


def test_dual_complex(tmp_path, capsys):
    out = tmp_path / "c.txt"
    code, text, _ = run(["dual-complex", "--fixture", fixture_path("square_2x2.txt"), "--out", out], capsys)
    assert code == 0
    assert "f_vector = 3,3,1" in text and "duality = pass" in text
    code, _, err = run(["dual-complex", "--fixture", fixture_path("square_concave.txt"), "--out", out], capsys)
    assert code == 2 and "error" in err


def test_tropical_command(tmp_path, line_poly, capsys):
    out = tmp_path / "locus.csv"
    code, text, _ = run(["tropical", "--poly", line_poly, "--region", "-2,2,-2,2", "--out", out], capsys)
    assert code == 0
    assert text.count("ray") == 3 and "vertex (0,0)" in text
    pts = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.all(np.abs(pts) <= 2 + 1e-12)


def test_amoeba_command(tmp_path, line_poly, capsys):
    out = tmp_path / "cloud.csv"
    args = ["amoeba", "--poly", line_poly, "--t", "e-10", "--region", "-2,2,-2,2",
            "--res", 50, "--angles", 4, "--out", out]
    code, text, _ = run(args, capsys)
    assert code == 0
    assert out.read_text().splitlines()[0] == "x1,x2,witness_residual"
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data[:, 2].max() <= 1e-9
    first = out.read_bytes()
    run(args, capsys)
    assert out.read_bytes() == first


def test_collapse_report(tmp_path, capsys):
    out = tmp_path / "report.txt"
    code, text, _ = run(["collapse-report", "--dim", 1, "--resolution", 64, "--pairs", 10,
                         "--t-list", "e-5,e-10", "--out", out], capsys)
    assert code == 0
    assert "ricci_residual" in text
    rows = [line for line in out.read_text().splitlines() if line[:1].isdigit()]
    assert len(rows) == 2
    scaled = [float(r.split(",")[2]) for r in rows]
    assert scaled[0] == pytest.approx(scaled[1], rel=1e-9)
    for name in ("diameter", "diameter_scaled", "gh_discrepancy"):
        assert len((tmp_path / f"report_{name}.dat").read_text().splitlines()) == 2


def test_accept_subset(tmp_path, capsys):
    code, text, _ = run(["accept", "--only", "2,8", "--skip-determinism", "--out-dir", tmp_path], capsys)
    assert code == 0
    assert "2/2 criteria passed" in text
    assert (tmp_path / "summary.txt").exists()
