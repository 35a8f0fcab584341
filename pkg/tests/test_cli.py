import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fiberbind import pair_force, preset_spectrum
from fiberbind.cli import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, run

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def read(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_pair_force_from_flags(tmp_path, capsys):
    out = tmp_path / "f.csv"
    code = run(["pair-force", "--preset", "square", "--mmax", "10", "--dmax", "4",
                "--samples", "2000", "-o", str(out)])
    assert code == EXIT_OK
    assert "2000 rows" in capsys.readouterr().out
    header, rows = read(out)
    assert header == ["d", "d_over_lambda1", "F"]
    d = np.array([float(r[0]) for r in rows])
    f = np.array([float(r[2]) for r in rows])
    assert d[-1] == pytest.approx(8 * np.pi)
    np.testing.assert_array_equal(f, pair_force(d, preset_spectrum("square", 10)))
    raw = out.read_bytes()
    assert b"\r" not in raw
    assert rows[1][0] == format(d[1], ".17g")


def test_output_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    scenario = str(SCENARIOS / "fig2_potential_d.yaml")
    assert run(["pair-potential", "-s", scenario, "-o", str(a)]) == EXIT_OK
    assert run(["pair-potential", "-s", scenario, "-o", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_flags_override_file(tmp_path):
    out = tmp_path / "f.csv"
    assert run(["pair-force", "-s", str(SCENARIOS / "fig2_force_triangle.yaml"),
                "--samples", "11", "--preset", "lorentz_comb", "-o", str(out)]) == EXIT_OK
    _, rows = read(out)
    assert len(rows) == 11
    assert float(rows[0][2]) == pytest.approx(np.sum(1.0 - np.arange(10) / 10.0))


def test_simulate_three_particles(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    assert run(["simulate", "-s", str(SCENARIOS / "fig3_three_particles.yaml"), "-o", str(out)]) == EXIT_OK
    header, rows = read(out)
    assert header == ["time", "x1", "x2", "x3", "v1", "v2", "v3"]
    x = np.array(rows[-1][1:4], dtype=float)
    np.testing.assert_allclose(np.diff(x) / (2 * np.pi), 0.78, atol=0.01)
    assert "converged=True" in capsys.readouterr().out


def test_minimize_ranking(tmp_path):
    out = tmp_path / "rank.csv"
    assert run(["minimize", "-s", str(SCENARIOS / "fig6_minimize.yaml"), "--threads", "2",
                "-o", str(out)]) == EXIT_OK
    header, rows = read(out)
    assert header == ["rank", "assignment", "energy"]
    assert len(rows) == 252
    assert rows[0][:2] == ["1", "1 2 3 9 10"]


@pytest.mark.parametrize("command,scenario,flags,lines", [
    ("landscape", "fig7_landscape.yaml", ["--particle", "2"], 401),
    ("field", None, ["--positions", "0 1.5 4", "--zeta", "0.2+0.01j", "--wavenumber", "1.3"], 3),
    ("force-exact", None, ["--positions", "0 3", "--preset", "triangle", "--broadened",
                           "--zeta", "0.001"], 2),
    ("design", None, ["--target", "square", "--mmax", "10"], 10),
    ("presets", None, ["--preset", "square", "--mmax", "4"], 8),
])
def test_other_subcommands(tmp_path, command, scenario, flags, lines):
    out = tmp_path / "o.csv"
    args = [command, "-o", str(out)] + flags
    if scenario:
        args += ["-s", str(SCENARIOS / scenario)]
    assert run(args) == EXIT_OK
    _, rows = read(out)
    assert len(rows) == lines


def test_design_profile_output(tmp_path):
    scenario = tmp_path / "d.yaml"
    profile = tmp_path / "profile.csv"
    scenario.write_text(f"design: {{target: triangle, m_max: 6}}\noutput: {{profile_path: {profile}}}\n")
    assert run(["design", "-s", str(scenario), "-o", str(tmp_path / "lines.csv")]) == EXIT_OK
    header, rows = read(profile)
    assert header == ["d", "d_over_lambda1", "target", "achieved"]


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("spectrum:\n  preset: {name: square}\n  colour: red\n")
    assert run(["pair-force", "-s", str(bad), "-o", str(tmp_path / "x.csv")]) == EXIT_VALIDATION
    assert "error[validation]" in capsys.readouterr().err
    assert run(["pair-force", "-s", str(tmp_path / "none.yaml")]) == EXIT_IO
    err = capsys.readouterr().err
    assert "error[io]" in err and "none.yaml" in err
    assert run(["pair-force", "--preset", "square", "-o", str(tmp_path)]) == EXIT_IO
    quad = tmp_path / "q.yaml"
    quad.write_text("spectrum:\n  lines:\n    - {intensity: 1.0, wavenumber: 1.0, linewidth: 0.5}\n"
                    "particles: {positions: [0.0, 30.0]}\n"
                    "quadrature: {max_depth: 1, nodes: 2, rtol: 1.0e-15, atol: 0.0}\n")
    assert run(["force-exact", "-s", str(quad), "-o", str(tmp_path / "y.csv")]) == EXIT_NUMERICAL
    assert "error[numerical]" in capsys.readouterr().err


def test_check_subcommand(capsys):
    assert run(["check", "-s", str(SCENARIOS / "fig3_two_particles.yaml")]) == EXIT_OK
    assert "ok" in capsys.readouterr().out


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fiberbind", "pair-force", "--preset", "triangle",
                           "--samples", "3", "-o", str(tmp_path / "t.csv")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("pair-force: 3 rows")
