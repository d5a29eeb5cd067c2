"""Run configurations, per-point evaluation and file output for traces, tau scans and grids."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError, DegenerateFixedPoint, DemonError
from .exact import ExactModel, exact_feedback, occupation_trace
from .feedback import feedback_cycle
from .kernel import bms_liouvillian, build_cg_liouvillian, expm2
from .model import E, SETConfig, config_from_mapping
from .thermo import NotDefined, ThermoReport, report_from_cycle
from .zeno import smallness, zeno_coefficients, zeno_moments, zeno_occupation, zeno_report

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

MODES = ("trace", "tau_scan", "grid", "zeno_check", "benchmark")
SOLVER_CHOICES = ("dcg", "bms", "zeno", "exact")
ZENO_FALLBACK_TAU = 1e-4
FAILURE_BUDGET = 0.05
GAIN_DISPLAY = (0.0, 40.0)
CONSERVATION_TOL = 1e-9


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    mode: str
    physics: SETConfig
    solver: str | None = None
    workers: int = 1
    seed: int = 0
    trace: dict = field(default_factory=dict)
    tau_scan: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    zeno_check: dict = field(default_factory=dict)
    benchmark: dict = field(default_factory=dict)


_SECTION_KEYS = {
    "trace": {"t_max", "steps", "solvers", "N", "p_filled"},
    "tau_scan": {"tau_min", "tau_max", "steps", "deltas", "solvers"},
    "grid": {"V_min", "V_max", "V_steps", "tau_min", "tau_max", "tau_steps", "deltas",
             "bias_center"},
    "zeno_check": {"taus", "deltas"},
    "benchmark": {"trace_N", "trace_t_max", "steady_t", "gamma0", "tau", "periods", "N",
                  "delta"},
}


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def run_config_from_mapping(data: Mapping[str, Any], mode: str) -> RunConfig:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    physics = config_from_mapping(data)
    run = dict(data.get("run", {}))
    sections = {}
    for name, allowed in _SECTION_KEYS.items():
        sec = dict(data.get(name, {}))
        unknown = set(sec) - allowed
        if unknown:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
        sections[name] = sec
    solver = run.get("solver")
    if solver is not None and solver not in SOLVER_CHOICES:
        raise ConfigError(f"unknown solver {solver!r}")
    workers = int(run.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return RunConfig(mode, physics, solver, workers, int(run.get("seed", 0)), **sections)


def load_run_config(path, mode: str) -> RunConfig:
    return run_config_from_mapping(load_toml(path), mode)


def _positive_int(sec, key, default):
    v = int(sec.get(key, default))
    if v < 1:
        raise ConfigError(f"{key} must be >= 1")
    return v


def _tau_axis(sec, lo_key, hi_key, n_key, defaults):
    lo = float(sec.get(lo_key, defaults[0]))
    hi = float(sec.get(hi_key, defaults[1]))
    n = _positive_int(sec, n_key, defaults[2])
    if not 0 < lo <= hi:
        raise ConfigError(f"need 0 < {lo_key} <= {hi_key}")
    return np.geomspace(lo, hi, n) if n > 1 else np.array([lo])


def _solvers(sec, default, allowed):
    s = list(sec.get("solvers", default))
    bad = [x for x in s if x not in allowed]
    if bad:
        raise ConfigError(f"solvers {bad} not available here (allowed: {allowed})")
    return s


# ---------------------------------------------------------------------------
# one grid point

ROW_FIELDS = ("V", "tau", "delta", "I_m", "P", "dE_fb", "G", "Q_L", "Q_R", "Q", "dS_sys",
              "dS_res", "info", "eta", "n_s", "phi2", "solver", "status", "smallness")


@dataclass(frozen=True)
class SweepRow:
    V: float
    tau: float
    delta: float
    I_m: Any = None
    P: Any = None
    dE_fb: Any = None
    G: Any = None
    Q_L: Any = None
    Q_R: Any = None
    Q: Any = None
    dS_sys: Any = None
    dS_res: Any = None
    info: Any = None
    eta: Any = None
    n_s: Any = None
    phi2: Any = None
    solver: str = "dcg"
    status: str = "ok"
    smallness: Any = None

    @property
    def ok(self) -> bool:
        return not self.status.startswith("failed")

    def cells(self) -> list[str]:
        return [_fmt(getattr(self, f)) for f in ROW_FIELDS]


def _fmt(x) -> str:
    if x is None or x is NotDefined:
        return ""
    if isinstance(x, str):
        return x
    return repr(float(x))


def _row_from_report(rep: ThermoReport, V, tau, delta, solver, status, small=None) -> SweepRow:
    return SweepRow(
        V=V, tau=tau, delta=delta, I_m=rep.current, P=rep.power, dE_fb=rep.feedback_energy,
        G=rep.gain, Q_L=rep.heat_L, Q_R=rep.heat_R, Q=rep.heat_total,
        dS_sys=rep.entropy_sys, dS_res=rep.entropy_res, info=rep.information,
        eta=rep.efficiency, n_s=rep.n_s, phi2=rep.phi2, solver=solver, status=status,
        smallness=small)


def evaluate_point(config: SETConfig, V: float, tau: float, delta: float,
                   solver: str = "dcg") -> SweepRow:
    """Full thermodynamic row at one (V, tau, delta); failures end up in ``status``."""
    V, tau, delta = float(V), float(tau), float(delta)
    try:
        if solver == "zeno":
            return _row_from_report(zeno_report(tau, config), V, tau, delta, "zeno", "ok",
                                    smallness(tau, config))
        if solver == "dcg" and tau < ZENO_FALLBACK_TAU:
            return _row_from_report(zeno_report(tau, config), V, tau, delta, "zeno",
                                    "zeno_fallback", smallness(tau, config))
        try:
            cyc = feedback_cycle(tau, config, solver)
        except DegenerateFixedPoint:
            if solver != "dcg":
                raise
            return _row_from_report(zeno_report(tau, config), V, tau, delta, "zeno",
                                    "zeno_fallback", smallness(tau, config))
        m = cyc.moments
        if abs(m.dn["L"] + m.dn["R"]) > CONSERVATION_TOL:
            return SweepRow(V, tau, delta, solver=solver, status="failed:ConservationViolation")
        return _row_from_report(report_from_cycle(cyc, config), V, tau, delta, solver, "ok")
    except DemonError as exc:
        return SweepRow(V, tau, delta, solver=solver, status=f"failed:{type(exc).__name__}")


def _eval_task(args):
    return evaluate_point(*args)


def map_points(tasks, workers: int = 1):
    """Evaluate in input order, optionally across processes."""
    if workers <= 1 or len(tasks) < 2:
        return [_eval_task(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_eval_task, tasks, chunksize=chunk))


# ---------------------------------------------------------------------------
# output helpers


def write_rows(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow(r.cells())


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_matrix(path, name, taus, Vs, values) -> None:
    """Row-major matrix (rows tau, columns V) in gnuplot's nonuniform-matrix layout."""
    with open(path, "w") as fh:
        fh.write(f"# {name}\n# rows: tau, columns: V\n")
        fh.write(" ".join([str(len(Vs))] + [repr(float(v)) for v in Vs]) + "\n")
        for t, line in zip(taus, values):
            fh.write(" ".join([repr(float(t))] + [repr(float(x)) for x in line]) + "\n")


def read_matrix(path):
    rows = [ln.split() for ln in open(path) if ln.strip() and not ln.startswith("#")]
    Vs = np.array([float(x) for x in rows[0][1:]])
    taus = np.array([float(r[0]) for r in rows[1:]])
    vals = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return taus, Vs, vals


def zero_contour(taus, Vs, values):
    """Linear-interpolated sign changes of a (tau, V) field along grid edges.

    tau is interpolated in log space to match the logarithmic axis.
    """
    pts = []
    lt = np.log(taus)
    nt, nv = values.shape
    for i in range(nt):
        for j in range(nv):
            a = values[i, j]
            for di, dj in ((0, 1), (1, 0)):
                ii, jj = i + di, j + dj
                if ii >= nt or jj >= nv:
                    continue
                b = values[ii, jj]
                if not (np.isfinite(a) and np.isfinite(b)) or a * b > 0 or a == b:
                    continue
                s = a / (a - b)
                V = Vs[j] + s * (Vs[jj] - Vs[j])
                t = math.exp(lt[i] + s * (lt[ii] - lt[i]))
                pts.append((V, t))
    # a node that is exactly zero is reached from several edges
    return list(dict.fromkeys(pts))


def write_points(path, header, pts):
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for p in pts:
            fh.write(" ".join(repr(float(x)) for x in p) + "\n")


def _dtag(delta):
    return f"delta{float(delta):+g}"


# ---------------------------------------------------------------------------
# modes


@dataclass
class RunResult:
    files: list
    n_points: int = 0
    n_failed: int = 0

    @property
    def failure_fraction(self) -> float:
        return self.n_failed / self.n_points if self.n_points else 0.0

    @property
    def budget_exceeded(self) -> bool:
        return self.failure_fraction > FAILURE_BUDGET


def dcg_trace(config: SETConfig, times, p_filled=0.0) -> np.ndarray:
    """n_d(t) from the DCG generator evaluated at each time, no measurements."""
    cfg = config.with_delta(0.0)
    s0 = np.array([1.0 - p_filled, p_filled])
    out = []
    for t in times:
        if t == 0:
            out.append(p_filled)
            continue
        L = build_cg_liouvillian(float(t), cfg, E).matrix
        out.append(float(np.real(expm2(L * t) @ s0)[1]))
    return np.array(out)


def bms_trace(config: SETConfig, times, p_filled=0.0) -> np.ndarray:
    L = bms_liouvillian(config.with_delta(0.0), E).matrix
    s0 = np.array([1.0 - p_filled, p_filled])
    return np.array([float(np.real(expm2(L * t) @ s0)[1]) for t in times])


def exact_trace(config: SETConfig, times, p_filled=0.0, N=2000) -> np.ndarray:
    model = ExactModel(config.with_delta(0.0), N)
    return occupation_trace(model, model.thermal_state(p_filled), times)


def run_trace(rc: RunConfig, out: Path) -> RunResult:
    sec = rc.trace
    steps = _positive_int(sec, "steps", 101)
    t_max = float(sec.get("t_max", 20.0))
    if not t_max > 0:
        raise ConfigError("t_max must be positive")
    solvers = [rc.solver] if rc.solver else _solvers(sec, ["dcg", "exact", "bms"],
                                                     ("dcg", "exact", "bms"))
    if rc.solver == "zeno":
        raise ConfigError("trace has no zeno solver")
    p0 = float(sec.get("p_filled", 0.0))
    times = np.linspace(0.0, t_max, steps)
    cols = {"t": times}
    for s in solvers:
        if s == "dcg":
            cols["n_dcg"] = dcg_trace(rc.physics, times, p0)
        elif s == "bms":
            cols["n_bms"] = bms_trace(rc.physics, times, p0)
        else:
            cols["n_exact"] = exact_trace(rc.physics, times, p0, int(sec.get("N", 2000)))
    path = out / "trace.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(cols))
        for i in range(steps):
            w.writerow([repr(float(c[i])) for c in cols.values()])
    return RunResult([path])


def run_tau_scan(rc: RunConfig, out: Path) -> RunResult:
    sec = rc.tau_scan
    taus = _tau_axis(sec, "tau_min", "tau_max", "steps", (1e-3, 1e2, 61))
    deltas = [float(d) for d in sec.get("deltas", [rc.physics.feedback.delta])]
    solvers = [rc.solver] if rc.solver else _solvers(sec, ["dcg", "zeno", "bms"],
                                                     ("dcg", "zeno", "bms"))
    if "exact" in solvers:
        raise ConfigError("the exact solver is only available for trace and benchmark")
    V = rc.physics.bias
    tasks = [(rc.physics.with_delta(d), V, t, d, s) for d in deltas for s in solvers for t in taus]
    rows = map_points(tasks, rc.workers)
    path = out / "tau_scan.csv"
    write_rows(path, rows)
    return RunResult([path], len(rows), sum(not r.ok for r in rows))


def grid_axes(rc: RunConfig):
    sec = rc.grid
    nV = _positive_int(sec, "V_steps", 61)
    Vs = np.linspace(float(sec.get("V_min", -20.0)), float(sec.get("V_max", 20.0)), nV)
    taus = _tau_axis(sec, "tau_min", "tau_max", "tau_steps", (0.05, 3.0, 61))
    deltas = [float(d) for d in sec.get("deltas", [rc.physics.feedback.delta])]
    return Vs, taus, deltas


MATRIX_OBSERVABLES = ("P", "G", "Q", "Q_L", "Q_R", "eta", "dE_fb")


def _matrix_value(row: SweepRow, name):
    v = getattr(row, name)
    if v is None or v is NotDefined:
        return math.nan
    v = float(v)
    if name == "G" and not GAIN_DISPLAY[0] < v < GAIN_DISPLAY[1]:
        return math.nan
    return v


def run_grid(rc: RunConfig, out: Path) -> RunResult:
    Vs, taus, deltas = grid_axes(rc)
    solver = rc.solver or "dcg"
    if solver == "exact":
        raise ConfigError("the exact solver is only available for trace and benchmark")
    center = rc.grid.get("bias_center")
    center = None if center is None else float(center)
    tasks = []
    for d in deltas:
        base = rc.physics.with_delta(d)
        for t in taus:
            for V in Vs:
                tasks.append((base.with_bias(float(V), center), V, t, d, solver))
    rows = map_points(tasks, rc.workers)
    files = [out / "grid.csv"]
    write_rows(files[0], rows)
    per = len(taus) * len(Vs)
    for k, d in enumerate(deltas):
        block = rows[k * per:(k + 1) * per]
        for name in MATRIX_OBSERVABLES:
            vals = np.array([_matrix_value(r, name) for r in block]).reshape(len(taus), len(Vs))
            p = out / f"{name}_{_dtag(d)}.dat"
            write_matrix(p, name, taus, Vs, vals)
            files.append(p)
            if name in ("P", "Q"):
                zp = out / f"{name}_zero_{_dtag(d)}.dat"
                write_points(zp, ("V", "tau"), zero_contour(taus, Vs, vals))
                files.append(zp)
    return RunResult(files, len(rows), sum(not r.ok for r in rows))


def run_zeno_check(rc: RunConfig, out: Path) -> RunResult:
    """Zeno expansion against the full DCG pipeline at small tau."""
    sec = rc.zeno_check
    taus = [float(t) for t in sec.get("taus", [1e-3, 1e-2])]
    deltas = [float(d) for d in sec.get("deltas", [rc.physics.feedback.delta])]
    path = out / "zeno_check.csv"
    n_fail = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta", "tau", "quantity", "zeno", "dcg", "rel_diff", "smallness"])
        for d in deltas:
            cfg = rc.physics.with_delta(d)
            occ = zeno_occupation(cfg, zeno_coefficients(cfg))
            w.writerow([repr(d), "", "n_s0_branch", repr(occ.branch), "", "", ""])
            w.writerow([repr(d), "", "n_s0_printed", repr(occ.printed), "", "", ""])
            for t in taus:
                z = zeno_moments(t, cfg)
                small = repr(smallness(t, cfg))
                try:
                    cyc = feedback_cycle(t, cfg, "dcg")
                except DemonError:
                    n_fail += 1
                    continue
                m = cyc.moments
                pairs = [("n_s", z.n_s0, cyc.stationary.sigma.p_filled),
                         ("dn_R", z.dn["R"], m.dn["R"]),
                         ("dE_L", z.dE["L"], m.dE["L"]), ("dE_R", z.dE["R"], m.dE["R"]),
                         ("dE_fb", z.dE["L"] + z.dE["R"], m.dE["L"] + m.dE["R"])]
                for q, a, b in pairs:
                    rel = float(abs(a - b) / abs(b)) if b != 0 else math.nan
                    w.writerow([repr(d), repr(t), q, repr(float(a)), repr(float(b)),
                                repr(rel), small])
    return RunResult([path], len(taus) * len(deltas), n_fail)


def run_benchmark(rc: RunConfig, out: Path) -> RunResult:
    """DCG against the exact and BMS references: unmeasured trace plus a short feedback run."""
    sec = rc.benchmark
    cfg = rc.physics
    t_max = float(sec.get("trace_t_max", 0.5))
    ts = np.linspace(0.0, t_max, 26)
    d = dcg_trace(cfg, ts)
    ex = exact_trace(cfg, ts, 0.0, int(sec.get("trace_N", 2000)))
    t_ss = float(sec.get("steady_t", 20.0))
    L = bms_liouvillian(cfg.with_delta(0.0), E).matrix
    a, b = np.real(L[1, 0]), np.real(L[0, 1])
    bms_ss = a / (a + b)
    metrics = [("trace_max_dev_exact", float(np.max(np.abs(d - ex))), 2e-2),
               ("steady_dev_bms", abs(float(dcg_trace(cfg, [t_ss])[0]) - bms_ss), 1e-2)]

    fb = cfg.with_gamma0(float(sec.get("gamma0", 0.05))).with_delta(
        float(sec.get("delta", cfg.feedback.delta)))
    tau = float(sec.get("tau", 0.5))
    periods = _positive_int(sec, "periods", 4)
    cyc = feedback_cycle(tau, fb, "dcg")
    model = ExactModel(fb, _modes_for(fb, periods * tau, sec.get("N")))
    samples = None if periods <= 12 else 1000
    run = exact_feedback(model, cyc.stationary.sigma.p_filled, tau, periods, samples, rc.seed)
    m = cyc.moments
    dn_ref = periods * m.dn["R"]
    e_ref = periods * (m.dE["L"] + m.dE["R"])
    metrics += [("feedback_dn_R_rel", abs(run.dn["R"] - dn_ref) / abs(dn_ref), 5e-2),
                ("feedback_dE_fb_rel", abs(run.measurement_energy - e_ref) / abs(e_ref), 5e-2),
                ("energy_identity_residual", run.identity_residual, 1e-10)]
    path = out / "benchmark.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value", "tolerance", "pass"])
        for name, v, tol in metrics:
            w.writerow([name, repr(float(v)), repr(tol), str(bool(v < tol)).lower()])
    tpath = out / "benchmark_trace.csv"
    with open(tpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "n_dcg", "n_exact"])
        for row in zip(ts, d, ex):
            w.writerow([repr(float(x)) for x in row])
    return RunResult([path, tpath])


def _modes_for(config: SETConfig, horizon: float, N=None) -> int:
    """Requested mode count, or the smallest multiple of 100 (>= 200) whose recurrence time is
    at least twice ``horizon``."""
    if N is not None:
        return int(N)
    width = max(r.support()[1] - r.support()[0] for r in config.reservoirs)
    need = math.ceil(width * 2 * horizon / (2 * math.pi))
    return max(200, 100 * math.ceil(need / 100))


RUNNERS = {"trace": run_trace, "tau_scan": run_tau_scan, "grid": run_grid,
           "zeno_check": run_zeno_check, "benchmark": run_benchmark}


def execute(rc: RunConfig, out) -> RunResult:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    return RUNNERS[rc.mode](rc, out)
