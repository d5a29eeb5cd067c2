import math
import os
from pathlib import Path

import numpy as np
import pytest

from qdemon.cli import main
from qdemon.sweep import (
    ROW_FIELDS,
    evaluate_point,
    load_run_config,
    read_matrix,
    read_rows,
    zero_contour,
)
from qdemon.thermo import NotDefined

DEMOS = Path(__file__).resolve().parents[1] / "demos" / "configs"

LEADS = """
[left]
beta = 0.1
mu = 0.0
gamma0 = 0.5
eps_center = 5.0
delta_width = 5.0
omega_min = 0.0
omega_max = 20.0

[right]
beta = 0.1
mu = 10.0
gamma0 = 0.5
eps_center = -1.0
delta_width = 5.0
omega_min = 0.0
omega_max = 20.0

[feedback]
delta = 1.0
"""

GRID = """
[grid]
V_min = -20.0
V_max = 20.0
V_steps = 5
tau_min = 0.05
tau_max = 3.0
tau_steps = 4
bias_center = 5.0
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.fixture
def grid_cfg(tmp_path):
    return write(tmp_path, LEADS + GRID)


def test_grid_outputs_and_round_trip(tmp_path, grid_cfg):
    out = tmp_path / "out"
    assert main(["grid", "--config", grid_cfg, "--out", str(out)]) == 0
    rows = read_rows(out / "grid.csv")
    assert list(rows[0]) == list(ROW_FIELDS)
    assert len(rows) == 20
    for name in ("P", "Q", "Q_L", "Q_R", "eta", "dE_fb"):
        taus, Vs, vals = read_matrix(out / f"{name}_delta+1.dat")
        assert vals.shape == (4, 5)
        flat = [float(r[name]) if r[name] else math.nan for r in rows]
        assert np.array_equal(vals.ravel(), np.array(flat), equal_nan=True)
    # the display range of the gain is a matrix-file concern only
    _, _, G = read_matrix(out / "G_delta+1.dat")
    raw = [r["G"] for r in rows]
    for g, r in zip(G.ravel(), raw):
        if r == "" or not 0 < float(r) < 40:
            assert math.isnan(g)
        else:
            assert g == float(r)
    zero_v = [r for r in rows if float(r["V"]) == 0.0]
    assert all(float(r["P"]) == 0.0 for r in zero_v)
    assert (out / "P_zero_delta+1.dat").exists() and (out / "Q_zero_delta+1.dat").exists()


def test_grid_deterministic_and_parallel_identical(tmp_path, grid_cfg):
    outs = []
    for k, workers in enumerate(("1", "1", "2")):
        out = tmp_path / f"o{k}"
        assert main(["grid", "--config", grid_cfg, "--out", str(out), "--workers", workers]) == 0
        outs.append(out)
    for f in sorted(os.listdir(outs[0])):
        data = [(o / f).read_bytes() for o in outs]
        assert data[0] == data[1] == data[2], f


def test_sentinels_are_empty_fields(tmp_path, grid_cfg):
    out = tmp_path / "out"
    main(["grid", "--config", grid_cfg, "--out", str(out)])
    rows = read_rows(out / "grid.csv")
    wasting = [r for r in rows if float(r["P"]) <= 0]
    assert wasting and all(r["G"] == "" for r in wasting)


def test_tau_scan_solvers_and_statuses(tmp_path):
    cfg = write(tmp_path, LEADS + """
[tau_scan]
tau_min = 1e-5
tau_max = 1.0
steps = 3
deltas = [0.0, 1.0]
""")
    out = tmp_path / "out"
    assert main(["tau-scan", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(out / "tau_scan.csv")
    assert len(rows) == 2 * 3 * 3
    assert {r["solver"] for r in rows} == {"dcg", "zeno", "bms"}
    first = [r for r in rows if float(r["tau"]) == 1e-5 and r["status"] == "zeno_fallback"]
    assert len(first) == 2  # one per delta for the dcg rows
    assert all(r["smallness"] for r in rows if r["solver"] == "zeno")


def test_evaluate_point_failure_status(fb):
    from dataclasses import replace
    broken = replace(fb, max_intervals=3)
    row = evaluate_point(broken, -10.0, 0.5, 1.0)
    assert row.status == "failed:QuadratureFailure"
    assert row.cells()[ROW_FIELDS.index("P")] == ""


def test_failure_budget_exit_code(tmp_path):
    cfg = write(tmp_path, LEADS + GRID + "\n[numerics]\nmax_intervals = 3\n")
    assert main(["grid", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert (tmp_path / "o" / "grid.csv").exists()


@pytest.mark.parametrize("extra", ["\n[grid]\ncolour = 1\n", "\n[run]\nsolver = 'magic'\n"])
def test_config_errors(tmp_path, extra):
    cfg = write(tmp_path, LEADS + extra)
    assert main(["grid", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_missing_section_and_bad_toml(tmp_path):
    assert main(["grid", "--config", write(tmp_path, "[left]\nmu = 1\n"), "--out",
                 str(tmp_path / "o")]) == 1
    assert main(["grid", "--config", write(tmp_path, "[left\n", "b.toml"), "--out",
                 str(tmp_path / "o")]) == 1


def test_exact_solver_not_offered_for_grid(tmp_path, grid_cfg):
    assert main(["grid", "--config", grid_cfg, "--out", str(tmp_path / "o"),
                 "--solver", "exact"]) == 1


def test_io_error(tmp_path, grid_cfg):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["grid", "--config", grid_cfg, "--out", str(blocker / "sub")]) == 3
    assert main(["grid", "--config", str(tmp_path / "nope.toml"), "--out",
                 str(tmp_path / "o")]) == 3


def test_trace_beyond_horizon_is_config_error(tmp_path):
    cfg = write(tmp_path, LEADS + "\n[trace]\nt_max = 50.0\nsteps = 3\nN = 20\nsolvers = ['exact']\n")
    assert main(["trace", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_trace_zero_coupling_constant(tmp_path):
    cfg = write(tmp_path, LEADS.replace("gamma0 = 0.5", "gamma0 = 0.0")
                + "\n[trace]\nt_max = 5.0\nsteps = 4\nN = 50\np_filled = 0.3\n")
    out = tmp_path / "o"
    assert main(["trace", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == "t,n_dcg,n_exact,n_bms"
    for line in lines[1:]:
        assert [float(x) for x in line.split(",")[1:]] == pytest.approx([0.3] * 3)


def test_zeno_check_output(tmp_path):
    cfg = write(tmp_path, LEADS + "\n[zeno_check]\ntaus = [1e-2]\n")
    out = tmp_path / "o"
    assert main(["zeno-check", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(out / "zeno_check.csv")
    dn = [r for r in rows if r["quantity"] == "dn_R"][0]
    assert float(dn["rel_diff"]) < 1e-2


def test_demo_configs_parse():
    for p in DEMOS.glob("*.toml"):
        for mode in ("grid", "tau_scan", "trace"):
            load_run_config(p, mode)


def test_zero_contour_interpolation():
    taus = np.array([1.0, math.e])
    Vs = np.array([-1.0, 1.0])
    vals = np.array([[-1.0, 1.0], [-1.0, 3.0]])
    pts = zero_contour(taus, Vs, vals)
    assert pts == [(0.0, 1.0), (-0.5, math.e)]
