"""Scenario configuration: TOML text with dotted sections, strictly validated.

Schema (version 1); every key is optional unless marked required::

    schema_version = 1                        # required

    [inertia]
    rotational = [[...], [...], [...]]        # required, kg m^2
    rotational_bound = [[...], ...]           # symmetric +/- bound per entry
    mass = 7827.867                           # required, kg
    mass_bound = 0.0

    [truth]
    velocity = [0, 0, 0, 0, 0, 0]             # [w rad/s, v m/s] body frame
    velocity_bound = 0.0                      # scalar or 6-vector
    velocity_cases = [[...], ...]             # optional; cycled by run index
    euler_xyz_deg = [0, 0, 0]
    euler_bound_deg = 0.0                     # scalar or 3-vector
    position = [0, 0, 0]
    position_bound = 0.0

    [observer]
    euler_xyz_deg = [0, 0, 0]
    position = [0, 0, 0]
    velocity = [0, 0, 0, 0, 0, 0]

    [gains]
    p1 = 0.1042                               # required
    p21 = 1.158e-6                            # required
    p22 = 1.24e-7                             # required
    psi0_bound = 1.4975                       # rad, worst-case initial rotation error
    omega_e0_bound = 0.1512                   # rad/s, worst-case initial rate error

    [measurement]
    period = 0.1                              # s
    sigma = 1e-4                              # tangent-space std, scalar or 6-vector
    left_euler_xyz_deg = [0, 0, 0]            # camera-side action g_l
    left_position = [0, 0, 0]
    right_euler_xyz_deg = [0, 0, 0]           # grasp-side action g_r
    right_position = [0, 0, 1]
    gate = false
    gate_threshold = [...]                    # default derived from sigma and motion
    dropout_after = -1.0                      # s; negative disables
    injection = "zoh"                         # or "continuous"

    [sim]
    duration = 60.0
    dt = 1e-3
    mc_runs = 50
    base_seed = 0
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .lie import euler_xyz, make_pose

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
PRESETS = ("envisat", "oossim_spin")


@dataclass(frozen=True)
class InertiaSpec:
    rotational: np.ndarray
    mass: float
    rotational_bound: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    mass_bound: float = 0.0


@dataclass(frozen=True)
class TruthSpec:
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(6))
    velocity_bound: np.ndarray = field(default_factory=lambda: np.zeros(6))
    velocity_cases: np.ndarray | None = None
    euler_xyz_deg: np.ndarray = field(default_factory=lambda: np.zeros(3))
    euler_bound_deg: np.ndarray = field(default_factory=lambda: np.zeros(3))
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    position_bound: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class ObserverInit:
    euler_xyz_deg: np.ndarray = field(default_factory=lambda: np.zeros(3))
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(6))

    @property
    def pose(self) -> np.ndarray:
        return make_pose(euler_xyz(np.radians(self.euler_xyz_deg)), self.position)


@dataclass(frozen=True)
class GainSpec:
    p1: float
    p21: float
    p22: float
    psi0_bound: float = 0.0
    omega_e0_bound: float = 0.0


@dataclass(frozen=True)
class MeasurementSpec:
    period: float = 0.1
    sigma: np.ndarray = field(default_factory=lambda: np.zeros(6))
    left_euler_xyz_deg: np.ndarray = field(default_factory=lambda: np.zeros(3))
    left_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    right_euler_xyz_deg: np.ndarray = field(default_factory=lambda: np.zeros(3))
    right_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gate: bool = False
    gate_threshold: np.ndarray | None = None
    dropout_after: float = -1.0
    injection: str = "zoh"

    @property
    def left_action(self) -> np.ndarray:
        return make_pose(euler_xyz(np.radians(self.left_euler_xyz_deg)), self.left_position)

    @property
    def right_action(self) -> np.ndarray:
        return make_pose(euler_xyz(np.radians(self.right_euler_xyz_deg)), self.right_position)


@dataclass(frozen=True)
class SimSpec:
    duration: float = 60.0
    dt: float = 1e-3
    mc_runs: int = 50
    base_seed: int = 0

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass(frozen=True)
class ScenarioConfig:
    inertia: InertiaSpec
    truth: TruthSpec
    observer: ObserverInit
    gains: GainSpec
    measurement: MeasurementSpec
    sim: SimSpec
    name: str = ""

    @property
    def steps_per_measurement(self) -> int:
        return int(round(self.measurement.period / self.sim.dt))

    def gate_parameters(self):
        """Outlier gate ``(base, rate)``: threshold is ``base + rate * elapsed``.

        ``elapsed`` is the time since the last accepted measurement, so a run
        of rejections cannot lock the gate while the target moves.  Default
        ``base = 3 sigma`` and ``rate`` bounds the per-axis rate of the
        measured frame (lever arm included).  An explicit ``gate_threshold``
        is used as a fixed ``base`` with zero rate.
        """
        m = self.measurement
        if m.gate_threshold is not None:
            return m.gate_threshold.copy(), np.zeros(6)
        t = self.truth
        base = np.abs(t.velocity) if t.velocity_cases is None else np.max(np.abs(t.velocity_cases), axis=0)
        vmax = base + t.velocity_bound
        w = float(np.linalg.norm(vmax[:3]))
        lever = float(np.linalg.norm(m.right_position))
        rate = np.concatenate([vmax[:3], vmax[3:] + w * lever])
        return 3.0 * m.sigma, rate

    def gate_threshold(self) -> np.ndarray:
        """Gate threshold one measurement period after an accepted sample."""
        base, rate = self.gate_parameters()
        return base + self.measurement.period * rate


# ---------------------------------------------------------------------------
# parsing


_SECTIONS = {
    "inertia": {"rotational", "rotational_bound", "mass", "mass_bound"},
    "truth": {"velocity", "velocity_bound", "velocity_cases", "euler_xyz_deg", "euler_bound_deg",
              "position", "position_bound"},
    "observer": {"euler_xyz_deg", "position", "velocity"},
    "gains": {"p1", "p21", "p22", "psi0_bound", "omega_e0_bound"},
    "measurement": {"period", "sigma", "left_euler_xyz_deg", "left_position", "right_euler_xyz_deg",
                    "right_position", "gate", "gate_threshold", "dropout_after", "injection"},
    "sim": {"duration", "dt", "mc_runs", "base_seed"},
}
_REQUIRED = {"inertia": {"rotational", "mass"}, "gains": {"p1", "p21", "p22"}}


def _number(name: str, x, *, positive=False, nonneg=False) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValidationError(name, f"expected a number, got {type(x).__name__}")
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(name, "must be finite")
    if positive and not x > 0.0:
        raise ValidationError(name, "must be positive")
    if nonneg and x < 0.0:
        raise ValidationError(name, "must be non-negative")
    return x


def _array(name: str, x, shape, *, nonneg=False, broadcast=False) -> np.ndarray:
    try:
        a = np.asarray(x, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(name, "expected numeric array") from None
    if broadcast and a.ndim == 0:
        a = np.full(shape, float(a))
    if a.shape != tuple(shape):
        raise ValidationError(name, f"expected shape {tuple(shape)}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(name, "must be finite")
    if nonneg and np.any(a < 0.0):
        raise ValidationError(name, "bounds must be non-negative")
    return a


def _check_keys(doc: dict) -> None:
    for key, val in doc.items():
        if key == "schema_version":
            continue
        if key not in _SECTIONS:
            raise ValidationError(key, "unknown section")
        if not isinstance(val, dict):
            raise ValidationError(key, "expected a section table")
        for sub in val:
            if sub not in _SECTIONS[key]:
                raise ValidationError(f"{key}.{sub}", "unknown key")
    for sec, keys in _REQUIRED.items():
        for k in keys:
            if k not in doc.get(sec, {}):
                raise ValidationError(f"{sec}.{k}", "required key missing")


def config_from_dict(doc: dict, name: str = "") -> ScenarioConfig:
    """Validate a parsed document and build a :class:`ScenarioConfig`."""
    if "schema_version" not in doc:
        raise ValidationError("schema_version", "required key missing")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ValidationError("schema_version", f"unsupported version {doc['schema_version']!r}")
    _check_keys(doc)

    d = doc["inertia"]
    rot = _array("inertia.rotational", d["rotational"], (3, 3))
    if np.max(np.abs(rot - rot.T)) > 1e-9 * np.max(np.abs(rot)):
        raise ValidationError("inertia.rotational", "must be symmetric")
    if np.min(np.linalg.eigvalsh(rot)) <= 0.0:
        raise ValidationError("inertia.rotational", "must be positive definite")
    rb = _array("inertia.rotational_bound", d.get("rotational_bound", 0.0), (3, 3), nonneg=True, broadcast=True)
    if np.any(rb != rb.T):
        raise ValidationError("inertia.rotational_bound", "must be symmetric")
    inertia = InertiaSpec(rot, _number("inertia.mass", d["mass"], positive=True), rb,
                          _number("inertia.mass_bound", d.get("mass_bound", 0.0), nonneg=True))
    if inertia.mass_bound >= inertia.mass:
        raise ValidationError("inertia.mass_bound", "must be smaller than the mass")

    d = doc.get("truth", {})
    cases = d.get("velocity_cases")
    if cases is not None:
        cases = np.asarray(cases, dtype=float) if len(cases) else np.zeros((0, 6))
        if cases.ndim != 2 or cases.shape[1] != 6 or cases.shape[0] < 1:
            raise ValidationError("truth.velocity_cases", "expected a non-empty list of 6-vectors")
    truth = TruthSpec(
        _array("truth.velocity", d.get("velocity", 0.0), (6,), broadcast=True),
        _array("truth.velocity_bound", d.get("velocity_bound", 0.0), (6,), nonneg=True, broadcast=True),
        cases,
        _array("truth.euler_xyz_deg", d.get("euler_xyz_deg", 0.0), (3,), broadcast=True),
        _array("truth.euler_bound_deg", d.get("euler_bound_deg", 0.0), (3,), nonneg=True, broadcast=True),
        _array("truth.position", d.get("position", 0.0), (3,), broadcast=True),
        _array("truth.position_bound", d.get("position_bound", 0.0), (3,), nonneg=True, broadcast=True),
    )

    d = doc.get("observer", {})
    observer = ObserverInit(
        _array("observer.euler_xyz_deg", d.get("euler_xyz_deg", 0.0), (3,), broadcast=True),
        _array("observer.position", d.get("position", 0.0), (3,), broadcast=True),
        _array("observer.velocity", d.get("velocity", 0.0), (6,), broadcast=True),
    )

    d = doc["gains"]
    gains = GainSpec(
        _number("gains.p1", d["p1"], positive=True),
        _number("gains.p21", d["p21"], positive=True),
        _number("gains.p22", d["p22"], positive=True),
        _number("gains.psi0_bound", d.get("psi0_bound", 0.0), nonneg=True),
        _number("gains.omega_e0_bound", d.get("omega_e0_bound", 0.0), nonneg=True),
    )
    if gains.psi0_bound >= math.pi:
        raise ValidationError("gains.psi0_bound", "must be below pi")

    d = doc.get("measurement", {})
    injection = d.get("injection", "zoh")
    if injection not in ("zoh", "continuous"):
        raise ValidationError("measurement.injection", "must be 'zoh' or 'continuous'")
    gate = d.get("gate", False)
    if not isinstance(gate, bool):
        raise ValidationError("measurement.gate", "expected a boolean")
    thr = d.get("gate_threshold")
    meas = MeasurementSpec(
        _number("measurement.period", d.get("period", 0.1), positive=True),
        _array("measurement.sigma", d.get("sigma", 0.0), (6,), nonneg=True, broadcast=True),
        _array("measurement.left_euler_xyz_deg", d.get("left_euler_xyz_deg", 0.0), (3,), broadcast=True),
        _array("measurement.left_position", d.get("left_position", 0.0), (3,), broadcast=True),
        _array("measurement.right_euler_xyz_deg", d.get("right_euler_xyz_deg", 0.0), (3,), broadcast=True),
        _array("measurement.right_position", d.get("right_position", 0.0), (3,), broadcast=True),
        gate,
        None if thr is None else _array("measurement.gate_threshold", thr, (6,), nonneg=True, broadcast=True),
        _number("measurement.dropout_after", d.get("dropout_after", -1.0)),
        injection,
    )

    d = doc.get("sim", {})
    for key in ("mc_runs", "base_seed"):
        if key in d and (isinstance(d[key], bool) or not isinstance(d[key], int)):
            raise ValidationError(f"sim.{key}", "expected an integer")
    sim = SimSpec(
        _number("sim.duration", d.get("duration", 60.0), positive=True),
        _number("sim.dt", d.get("dt", 1e-3), positive=True),
        int(d.get("mc_runs", 50)),
        int(d.get("base_seed", 0)),
    )
    if sim.mc_runs < 1:
        raise ValidationError("sim.mc_runs", "must be at least 1")
    if sim.base_seed < 0:
        raise ValidationError("sim.base_seed", "must be non-negative")
    if sim.dt > meas.period:
        raise ValidationError("sim.dt", "integrator step must not exceed the measurement period")
    ratio = meas.period / sim.dt
    if abs(ratio - round(ratio)) > 1e-9 * ratio:
        raise ValidationError("measurement.period", "must be an integer multiple of sim.dt")
    steps = sim.duration / sim.dt
    if abs(steps - round(steps)) > 1e-9 * steps:
        raise ValidationError("sim.duration", "must be an integer multiple of sim.dt")
    if injection == "continuous" and np.any(meas.sigma):
        raise ValidationError("measurement.injection", "continuous injection is defined for noiseless measurements only")

    return ScenarioConfig(inertia, truth, observer, gains, meas, sim, name)


def parse_config(text: str, name: str = "") -> ScenarioConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(str(exc)) from None
    return config_from_dict(doc, name)


def load_config(path) -> ScenarioConfig:
    """Read and validate a ``.cfg`` file or a preset name such as ``envisat``."""
    p = Path(path)
    if not p.exists() and str(path) in PRESETS:
        return load_preset(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_config(text, p.stem)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ValidationError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("se3obs").joinpath("presets").joinpath(f"{name}.cfg").read_text()


def load_preset(name: str) -> ScenarioConfig:
    return parse_config(preset_text(name), name)
