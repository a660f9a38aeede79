"""Scenario sampling, single runs, Monte-Carlo batches and CSV output."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .config import ScenarioConfig
from .dynamics import Inertia, RigidBodyState
from .errors import ConfigError, SingularInertia
from .lie import euler_xyz, make_pose, quaternion
from .observer import ObserverGains, make_gains
from .simulation import INJECT_CONTINUOUS, INJECT_ZOH, STATUS_OK, _simulate

MAX_RESAMPLES = 100

RUN_COLUMNS = (
    ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"]
    + ["px_hat", "py_hat", "pz_hat", "qw_hat", "qx_hat", "qy_hat", "qz_hat"]
    + ["wx", "wy", "wz", "vx", "vy", "vz"]
    + ["wx_hat", "wy_hat", "wz_hat", "vx_hat", "vy_hat", "vz_hat"]
    + [f"eps{i}" for i in range(1, 7)]
    + [f"ve{i}" for i in range(1, 7)]
    + ["W"]
)
SUMMARY_COLUMNS = ["run_index", "status", "pe_x", "pe_y", "pe_z", "pe_norm",
                   "theta_x_deg", "theta_y_deg", "theta_z_deg", "theta_norm_deg"]
STATS_COLUMNS = ["statistic", "quantity", "x", "y", "z"]


def _fmt(x: float) -> str:
    return repr(float(x))


def _rng(cfg: ScenarioConfig, run_index: int, stream: int) -> np.random.Generator:
    # one seed per run, split into independent scenario and noise streams
    seq = np.random.SeedSequence(cfg.sim.base_seed + run_index, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(seq))


def pose_errors(g, g_hat):
    """Position error ``p_e`` [m] and rotation vector ``theta_e`` [deg] of ``eta = g_hat^-1 g``."""
    eta = np.linalg.solve(np.asarray(g_hat, dtype=float), np.asarray(g, dtype=float))
    return eta[:3, 3].copy(), np.degrees(Rotation.from_matrix(eta[:3, :3]).as_rotvec())


@dataclass
class RunRecord:
    """Diagnostics recorded at every measurement epoch of one run."""

    run_index: int
    t: np.ndarray
    g: np.ndarray
    g_hat: np.ndarray
    V: np.ndarray
    V_hat: np.ndarray
    eps: np.ndarray
    ve: np.ndarray
    W: np.ndarray
    ok: bool = True
    message: str = ""
    inertia: Inertia | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def final_errors(self):
        """``(p_e, theta_e_deg)`` at the last recorded epoch."""
        if len(self.t) == 0:
            return np.full(3, np.nan), np.full(3, np.nan)
        return pose_errors(self.g[-1], self.g_hat[-1])

    @property
    def final_position_error(self) -> float:
        return float(np.linalg.norm(self.final_errors[0]))

    @property
    def final_angle_error_deg(self) -> float:
        return float(np.linalg.norm(self.final_errors[1]))


@dataclass(frozen=True)
class McSummary:
    """Statistics over the successful runs (sample std, ``n - 1``)."""

    n_runs: int
    failed: tuple
    p_e: np.ndarray
    theta_e: np.ndarray
    mean_p_e: np.ndarray
    std_p_e: np.ndarray
    mean_theta_e: np.ndarray
    std_theta_e: np.ndarray
    max_p_norm: float
    min_p_norm: float
    max_theta_norm: float
    min_theta_norm: float

    @property
    def n_ok(self) -> int:
        return self.n_runs - len(self.failed)


@dataclass
class McResult:
    summary: McSummary
    records: list


def sample_scenario(cfg: ScenarioConfig, run_index: int):
    """Draw ``(Inertia, RigidBodyState)`` uniformly within the configured bounds.

    The inertia perturbation is drawn for the upper triangle and mirrored,
    so it stays symmetric; draws that lose positive definiteness are
    repeated up to ``MAX_RESAMPLES`` times.
    """
    if run_index < 0:
        raise ValueError("run_index must be non-negative")
    rng = _rng(cfg, run_index, 0)
    spec = cfg.inertia
    inertia = None
    for _ in range(MAX_RESAMPLES):
        d = np.triu(spec.rotational_bound * rng.uniform(-1.0, 1.0, (3, 3)))
        rot = spec.rotational + d + np.triu(d, 1).T
        mass = spec.mass + spec.mass_bound * rng.uniform(-1.0, 1.0)
        try:
            inertia = Inertia(0.5 * (rot + rot.T), mass)
            break
        except SingularInertia:
            continue
    if inertia is None:
        raise ConfigError(f"no positive-definite inertia after {MAX_RESAMPLES} draws")
    t = cfg.truth
    angles = t.euler_xyz_deg + t.euler_bound_deg * rng.uniform(-1.0, 1.0, 3)
    pos = t.position + t.position_bound * rng.uniform(-1.0, 1.0, 3)
    base = t.velocity if t.velocity_cases is None else t.velocity_cases[run_index % len(t.velocity_cases)]
    vel = base + t.velocity_bound * rng.uniform(-1.0, 1.0, 6)
    return inertia, RigidBodyState(make_pose(euler_xyz(np.radians(angles)), pos), vel)


def config_gains(cfg: ScenarioConfig) -> ObserverGains:
    """Certified gains for the nominal inertia of ``cfg``."""
    g = cfg.gains
    nominal = Inertia(cfg.inertia.rotational, cfg.inertia.mass)
    if g.omega_e0_bound == 0.0:
        return ObserverGains(g.p1, g.p21, g.p22)
    return make_gains(g.p1, g.p21, g.p22, g.psi0_bound, g.omega_e0_bound, nominal)


def run_single(cfg: ScenarioConfig, run_index: int = 0, gains: ObserverGains | None = None) -> RunRecord:
    """Simulate truth, sampled measurements and observer for one sampled scenario.

    The observer carries the nominal inertia; the truth uses the sampled
    one.  A rotation error reaching the pi singularity ends the run and
    returns a record flagged ``ok = False``.
    """
    gains = config_gains(cfg) if gains is None else gains
    truth_inertia, truth = sample_scenario(cfg, run_index)
    nominal = Inertia(cfg.inertia.rotational, cfg.inertia.mass)
    m = cfg.measurement
    n_steps = cfg.sim.n_steps
    spm = cfg.steps_per_measurement
    n_meas = n_steps // spm + 1
    noise = _rng(cfg, run_index, 1).standard_normal((n_meas, 6)) * m.sigma
    dropout = -1 if m.dropout_after < 0.0 else int(round(m.dropout_after / cfg.sim.dt))
    mode = INJECT_CONTINUOUS if m.injection == "continuous" else INJECT_ZOH
    out = _simulate(
        np.asarray(truth.pose, dtype=float), np.asarray(truth.velocity, dtype=float),
        cfg.observer.pose, cfg.observer.velocity.copy(),
        truth_inertia.matrix, truth_inertia.inverse, nominal.matrix, nominal.inverse,
        m.left_action, m.right_action, gains.k1, gains.p1, gains.p2_diag,
        cfg.sim.dt, n_steps, spm, spm, noise, m.gate, *cfg.gate_parameters(), dropout, mode)
    ts, gs, vs, ghs, vhs, eps, ve, w, status = out
    ok = status == STATUS_OK
    msg = "" if ok else f"rotation error reached the pi singularity after t = {ts[-1]:.3f} s"
    return RunRecord(run_index, ts, gs, ghs, vs, vhs, eps, ve, w, ok, msg, truth_inertia)


def summarize(records) -> McSummary:
    """Reduce run records in ``run_index`` order; failed runs are excluded."""
    records = sorted(records, key=lambda r: r.run_index)
    good = [r for r in records if r.ok]
    failed = tuple(r.run_index for r in records if not r.ok)
    if good:
        pe = np.array([r.final_errors[0] for r in good])
        th = np.array([r.final_errors[1] for r in good])
    else:
        pe = np.zeros((0, 3))
        th = np.zeros((0, 3))

    def stats(a):
        if len(a) == 0:
            return np.full(3, np.nan), np.full(3, np.nan)
        std = np.zeros(3) if len(a) == 1 else a.std(axis=0, ddof=1)
        return a.mean(axis=0), std

    pn = np.linalg.norm(pe, axis=1)
    tn = np.linalg.norm(th, axis=1)
    ext = (lambda a, f: float(f(a)) if len(a) else math.nan)
    return McSummary(len(records), failed, pe, th, *stats(pe), *stats(th),
                     ext(pn, np.max), ext(pn, np.min), ext(tn, np.max), ext(tn, np.min))


def _run_task(args):
    cfg, i, gains = args
    return run_single(cfg, i, gains)


def run_monte_carlo(cfg: ScenarioConfig, jobs: int = 1, order=None) -> McResult:
    """Run ``cfg.sim.mc_runs`` scenarios, optionally on a process pool.

    ``order`` permutes the submission order; results are always reduced by
    run index, so the summary does not depend on it.
    """
    gains = config_gains(cfg)
    idx = list(range(cfg.sim.mc_runs)) if order is None else [int(i) for i in order]
    if sorted(idx) != list(range(cfg.sim.mc_runs)):
        raise ValueError("order must be a permutation of the run indices")
    tasks = [(cfg, i, gains) for i in idx]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(t) for t in tasks]
    records.sort(key=lambda r: r.run_index)
    return McResult(summarize(records), records)


# ---------------------------------------------------------------------------
# CSV


def _run_rows(rec: RunRecord):
    for k in range(len(rec.t)):
        g, gh = rec.g[k], rec.g_hat[k]
        row = [rec.t[k], *g[:3, 3], *quaternion(g[:3, :3]), *gh[:3, 3], *quaternion(gh[:3, :3]),
               *rec.V[k], *rec.V_hat[k], *rec.eps[k], *rec.ve[k], rec.W[k]]
        yield [_fmt(x) for x in row]


def _summary_rows(s: McSummary, records=None):
    yield SUMMARY_COLUMNS
    ok_idx = [i for i in range(s.n_runs) if i not in s.failed] if records is None else \
        [r.run_index for r in sorted(records, key=lambda r: r.run_index) if r.ok]
    for i, pe, th in zip(ok_idx, s.p_e, s.theta_e):
        yield [str(i), "ok", *map(_fmt, pe), _fmt(np.linalg.norm(pe)), *map(_fmt, th), _fmt(np.linalg.norm(th))]
    for i in s.failed:
        yield [str(i), "failed"] + [""] * (len(SUMMARY_COLUMNS) - 2)
    yield []
    yield STATS_COLUMNS
    yield ["mean", "p_e", *map(_fmt, s.mean_p_e)]
    yield ["std", "p_e", *map(_fmt, s.std_p_e)]
    yield ["mean", "theta_e_deg", *map(_fmt, s.mean_theta_e)]
    yield ["std", "theta_e_deg", *map(_fmt, s.std_theta_e)]
    yield ["max_norm", "p_e", _fmt(s.max_p_norm), "", ""]
    yield ["min_norm", "p_e", _fmt(s.min_p_norm), "", ""]
    yield ["max_norm", "theta_e_deg", _fmt(s.max_theta_norm), "", ""]
    yield ["min_norm", "theta_e_deg", _fmt(s.min_theta_norm), "", ""]
    yield ["runs", "total", str(s.n_runs), "", ""]
    yield ["runs", "failed", str(len(s.failed)), "", ""]


def emit_csv(obj, path, records=None) -> Path:
    """Write a :class:`RunRecord` or :class:`McSummary` (or :class:`McResult`) as CSV.

    Floats are written with ``repr`` so output is exact and byte-identical
    for identical inputs.
    """
    path = Path(path)
    if isinstance(obj, McResult):
        obj, records = obj.summary, obj.records
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if isinstance(obj, RunRecord):
            writer.writerow(RUN_COLUMNS)
            writer.writerows(_run_rows(obj))
        elif isinstance(obj, McSummary):
            writer.writerows(_summary_rows(obj, records))
        else:
            raise TypeError(f"cannot emit {type(obj).__name__} as CSV")
    return path


def read_run_csv(path) -> dict:
    """Parse a run CSV back into named float arrays."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RUN_COLUMNS:
            raise ValueError("unexpected run CSV header")
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(RUN_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(RUN_COLUMNS)}
