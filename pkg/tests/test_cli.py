import csv
import json
import os

import numpy as np
import pytest

import transbem as tb
from transbem.cli import main
from transbem.config import ConfigError, load_config

from conftest import canonical_config_text, manufactured_config_text

MINIMAL = """
[outer]
shape = circle
radius = 2

[inner]
shape = circle
radius = 1

[transmission]
f1 = "z1"
f2 = "-z2"
df1_dz1 = "1"
df2_dz2 = "-1"
f_o = "x1/2"
"""

DIVERGENT = """
[outer]
shape = circle
radius = 2

[inner]
shape = circle
radius = 1

[transmission]
f1 = "z1 + 0.2*z1^2"
f2 = "-z2 + 0.2*z2^2"
df1_dz1 = "1 + 0.4*z1"
df2_dz2 = "-1 + 0.4*z2"
f_o = "8*x1"

[solver]
method = picard
max_iter = 10
"""

ZERO_DATA_DILATION = """
[outer]
shape = circle
radius = 2

[inner]
shape = circle
radius = 1

[transmission]
f1 = "z1"
f2 = "-z2"
df1_dz1 = "1"
df2_dz2 = "-1"
f_o = "0"

[shape]
dx = "s*cos(t)"
dy = "s*sin(t)"
dx_dt = "-s*sin(t)"
dy_dt = "s*cos(t)"
s_max = 0.1
steps = 5
interior_probes = 0.2 0.1
exterior_probes = 1.5 0.0

[output]
write_figures = false
"""


def write(tmp_path, text, name="problem.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_load_config_defaults(tmp_path):
    config = load_config(write(tmp_path, MINIMAL))
    assert config.n == 64
    assert config.method == "hybrid"
    assert config.tol == 1e-10
    assert config.max_iter == 100
    assert config.family is None
    assert config.field_grid == 40
    assert config.write_figures


def test_load_config_collects_errors_with_lines(tmp_path):
    bad = MINIMAL.replace('f1 = "z1"', 'f1 = "z3"') + "\n[discretization]\nn = 65\n"
    with pytest.raises(ConfigError) as err:
        load_config(write(tmp_path, bad))
    problems = err.value.problems
    assert any("z3" in p and "line" in p for p in problems)
    assert any("even" in p for p in problems)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "absent.ini"))


def test_load_config_probe_containment(tmp_path):
    bad = canonical_config_text().replace("interior_probes = 0.3 0.2",
                                          "interior_probes = 1.5 0.0")
    with pytest.raises(ConfigError, match="not inside"):
        load_config(write(tmp_path, bad))


def test_cli_config_error_exit_code(tmp_path, capsys):
    rc = main(["solve", str(tmp_path / "absent.ini"),
               "--out-dir", str(tmp_path)])
    assert rc == 1
    assert "configuration error" in capsys.readouterr().err


def test_solve_manufactured_probes(tmp_path):
    cfg = write(tmp_path, manufactured_config_text())
    out = tmp_path / "out"
    rc = main(["solve", cfg, "--out-dir", str(out), "--quiet"])
    assert rc == 0
    for name in ("densities.json", "trace.csv", "field.csv", "probes.json",
                 "field.png", "trace.png"):
        assert (out / name).exists()
    probes = json.loads((out / "probes.json").read_text())
    case = tb.manufactured_affine_case()
    assert probes["u_i_probe0"] == pytest.approx(
        case.u_i(np.array([[0.3, 0.2]]))[0], abs=1e-8)
    assert probes["u_o_probe0"] == pytest.approx(
        case.u_o(np.array([[1.5, 0.0]]))[0], abs=1e-8)


def test_solve_field_regions(tmp_path):
    cfg = write(tmp_path, manufactured_config_text(n=64))
    out = tmp_path / "out"
    assert main(["solve", cfg, "--out-dir", str(out), "--quiet"]) == 0
    header, rows = read_csv(out / "field.csv")
    assert header == ["x", "y", "region", "value"]
    regions = {r[2] for r in rows}
    # grid corners fall outside the outer boundary and are skipped
    assert regions == {"outer", "inner", "skip"}
    for r in rows:
        if r[2] == "skip":
            assert r[3] == ""
        else:
            float(r[3])


def test_solve_divergent_exits_partial(tmp_path):
    cfg = write(tmp_path, DIVERGENT)
    out = tmp_path / "out"
    rc = main(["solve", cfg, "--out-dir", str(out), "--quiet"])
    assert rc == 2
    assert (out / "trace.csv").exists()
    assert not (out / "densities.json").exists()


def test_perturb_canonical(tmp_path):
    cfg = write(tmp_path, canonical_config_text())
    out = tmp_path / "out"
    rc = main(["perturb", cfg, "--out-dir", str(out), "--quiet"])
    assert rc == 0
    header, rows = read_csv(out / "branch.csv")
    assert header[:4] == ["s", "residual_norm", "rho_o", "rho_i"]
    assert len(rows) == 21
    assert max(float(r[1]) for r in rows) <= 1e-10
    assert (out / "branch.png").exists()

    sh, srows = read_csv(out / "smoothness.csv")
    assert sh == ["probe", "order", "center", "s", "d_h", "d_2h", "d_4h",
                  "ratio"]
    low_order = [float(r[7]) for r in srows if r[1] in ("1", "2")]
    assert low_order
    assert all(3.0 <= ratio <= 5.0 for ratio in low_order)


def test_perturb_containment_violation_partial(tmp_path):
    text = canonical_config_text().replace(
        "dx = \"s*cos(3*t)*cos(t)\"", "dx = \"-s*cos(3*t)*cos(t)\"").replace(
        "dy = \"s*cos(3*t)*sin(t)\"", "dy = \"-s*cos(3*t)*sin(t)\"").replace(
        "dx_dt = \"s*(-3*sin(3*t)*cos(t) - cos(3*t)*sin(t))\"",
        "dx_dt = \"-s*(-3*sin(3*t)*cos(t) - cos(3*t)*sin(t))\"").replace(
        "dy_dt = \"s*(-3*sin(3*t)*sin(t) + cos(3*t)*cos(t))\"",
        "dy_dt = \"-s*(-3*sin(3*t)*sin(t) + cos(3*t)*cos(t))\"").replace(
        "interior_probes = 0.3 0.2", "interior_probes = 0.95 0.0")
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    rc = main(["perturb", cfg, "--out-dir", str(out), "--quiet"])
    assert rc == 2
    _, rows = read_csv(out / "branch.csv")
    assert 1 <= len(rows) < 21
    assert not (out / "smoothness.csv").exists()


def test_perturb_zero_data_constant_branch(tmp_path):
    cfg = write(tmp_path, ZERO_DATA_DILATION)
    out = tmp_path / "out"
    rc = main(["perturb", cfg, "--out-dir", str(out), "--quiet"])
    assert rc == 0
    _, rows = read_csv(out / "branch.csv")
    assert len(rows) == 6
    for r in rows:
        assert abs(float(r[4])) <= 1e-12
        assert abs(float(r[5])) <= 1e-12
    # too short for the three-spacing probe, and figures are disabled
    assert not (out / "smoothness.csv").exists()
    assert not (out / "branch.png").exists()


def test_verify_passes(tmp_path, capsys):
    cfg = write(tmp_path, canonical_config_text())
    out = tmp_path / "out"
    rc = main(["verify", cfg, "--out-dir", str(out)])
    assert rc == 0
    report = json.loads((out / "verify.json").read_text())
    assert report["all_passed"]
    names = [c["name"] for c in report["checks"]]
    assert "jump_identity" in names and "homogeneous_uniqueness" in names
    assert all(c["status"] == "passed" for c in report["checks"])
    assert "verify: jump_identity: passed" in capsys.readouterr().out


def test_verify_tamper_hook(tmp_path, monkeypatch):
    monkeypatch.setenv("TRANSBEM_VERIFY_TAMPER", "jump_identity")
    cfg = write(tmp_path, canonical_config_text())
    out = tmp_path / "out"
    rc = main(["verify", cfg, "--out-dir", str(out), "--quiet"])
    assert rc == 4
    report = json.loads((out / "verify.json").read_text())
    assert not report["all_passed"]
    failed = [c for c in report["checks"] if c["status"] == "failed"]
    assert [c["name"] for c in failed] == ["jump_identity"]


def test_verify_skips_circle_checks_off_circle(tmp_path):
    text = canonical_config_text().replace(
        "[outer]\nkind = builtin\nshape = circle\nradius = 2",
        "[outer]\nkind = builtin\nshape = ellipse\na = 2.5\nb = 2")
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    rc = main(["verify", cfg, "--out-dir", str(out), "--quiet"])
    assert rc == 0
    report = json.loads((out / "verify.json").read_text())
    by_name = {c["name"]: c for c in report["checks"]}
    assert by_name["fourier_trace_outer"]["status"] == "skipped"
    assert by_name["wstar_average_outer"]["status"] == "skipped"
    assert by_name["fourier_trace_inner"]["status"] == "passed"


def test_convergence_manufactured(tmp_path):
    cfg = write(tmp_path, manufactured_config_text(n=256))
    out = tmp_path / "out"
    rc = main(["convergence", cfg, "--out-dir", str(out), "--quiet"])
    assert rc == 0
    header, rows = read_csv(out / "convergence.csv")
    assert header[0] == "n" and header[1] == "runtime"
    assert [int(r[0]) for r in rows] == [16, 32, 64, 128, 256]
    deltas = {int(r[0]): [float(v) for v in r[2:]] for r in rows}
    assert max(deltas[256]) == 0.0
    assert max(deltas[128]) <= 1e-10
    assert (out / "convergence.png").exists()


def test_convergence_single_level(tmp_path):
    # N = 8 meshes the radius-2 circle too coarsely for a radius-1
    # inclusion, so shrink the inclusion and move the interior probe
    text = manufactured_config_text(n=128).replace("n = 128", "n = 8") \
        .replace("[inner]\nshape = circle\nradius = 1",
                 "[inner]\nshape = circle\nradius = 0.4") \
        .replace("interior_probes = 0.3 0.2", "interior_probes = 0.1 0.1")
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    rc = main(["convergence", cfg, "--out-dir", str(out), "--quiet"])
    assert rc == 0
    _, rows = read_csv(out / "convergence.csv")
    assert len(rows) == 1 and int(rows[0][0]) == 8
    assert all(v == "" for v in rows[0][2:])


def test_outputs_byte_deterministic(tmp_path):
    cfg = write(tmp_path, manufactured_config_text(n=64))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["solve", cfg, "--out-dir", str(out1), "--quiet"]) == 0
    assert main(["solve", cfg, "--out-dir", str(out2), "--quiet"]) == 0
    for name in ("densities.json", "trace.csv", "field.csv", "probes.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
