import math

import numpy as np
import pytest

from se3obs.config import PRESETS, load_config, load_preset, parse_config, preset_text
from se3obs.errors import ParseError, ValidationError

MINIMAL = """
schema_version = 1
[inertia]
rotational = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]
mass = 2.0
[gains]
p1 = 0.1
p21 = 1e-3
p22 = 1e-3
"""


def test_envisat_preset_matches_design_table():
    cfg = load_preset("envisat")
    assert np.array_equal(cfg.inertia.rotational, [[17023.3, 397.1, -2171.4], [397.1, 124825.7, 344.2],
                                                   [-2171.4, 344.2, 129112.2]])
    assert np.array_equal(cfg.inertia.rotational_bound, [[350, 100, 250], [100, 3000, 150], [250, 150, 3000]])
    assert cfg.inertia.mass == 7827.867 and cfg.inertia.mass_bound == 78.27867
    assert np.array_equal(cfg.truth.velocity, np.zeros(6))
    assert np.array_equal(cfg.truth.velocity_bound, np.full(6, 0.0873))
    assert np.array_equal(cfg.truth.euler_bound_deg, np.full(3, 45.0))
    assert np.array_equal(cfg.truth.position_bound, np.full(3, 0.5))
    assert np.array_equal(cfg.observer.pose, np.eye(4)) and np.array_equal(cfg.observer.velocity, np.zeros(6))
    assert (cfg.gains.p1, cfg.gains.p21, cfg.gains.p22) == (0.1042, 0.1158e-5, 0.0124e-5)
    assert cfg.measurement.period == 0.1 and np.array_equal(cfg.measurement.sigma, np.full(6, 1e-4))
    assert cfg.sim.duration == 60.0 and cfg.sim.dt == 1e-3 and cfg.sim.mc_runs == 50
    assert cfg.steps_per_measurement == 100


def test_spin_preset():
    cfg = load_preset("oossim_spin")
    assert cfg.inertia.mass == 341.0
    assert np.array_equal(np.diag(cfg.inertia.rotational), [400.1025, 262.95, 264.9425])
    assert np.allclose(np.degrees(cfg.truth.velocity_cases[:, 0]), [2, 3, 4], rtol=1e-14)
    assert np.array_equal(cfg.truth.velocity_cases[:, 1:], np.zeros((3, 5)))
    assert 1.0 / cfg.measurement.period == pytest.approx(10.0)
    assert cfg.measurement.gate


def test_presets_listed_and_loadable_by_name():
    for name in PRESETS:
        assert "schema_version" in preset_text(name)
        assert load_config(name).name == name
    with pytest.raises(ValidationError):
        preset_text("nope")


def test_minimal_defaults():
    cfg = parse_config(MINIMAL)
    assert np.array_equal(cfg.measurement.sigma, np.zeros(6))
    assert cfg.measurement.injection == "zoh" and cfg.sim.duration == 60.0


@pytest.mark.parametrize("extra, field", [
    ("[sim]\ndt = 0.2\n", "sim.dt"),
    ("[measurement]\nperiod = 0.0105\n", "measurement.period"),
    ("[sim]\nduration = 0.0\n", "sim.duration"),
    ("[sim]\nmc_runs = 0\n", "sim.mc_runs"),
    ("[sim]\nmc_runs = 1.5\n", "sim.mc_runs"),
    ("[sim]\nbogus = 1\n", "sim.bogus"),
    ("[extra]\nx = 1\n", "extra"),
    ("[truth]\nposition_bound = -1.0\n", "truth.position_bound"),
    ("[truth]\nvelocity = [1, 2]\n", "truth.velocity"),
    ("[measurement]\nsigma = -1e-3\n", "measurement.sigma"),
    ("[measurement]\ninjection = \"magic\"\n", "measurement.injection"),
    ("[measurement]\ninjection = \"continuous\"\nsigma = 1e-3\n", "measurement.injection"),
    ("[measurement]\ngate = 1\n", "measurement.gate"),
])
def test_validation_errors_name_the_field(extra, field):
    with pytest.raises(ValidationError) as exc:
        parse_config(MINIMAL + extra)
    assert exc.value.field == field


def test_structural_errors():
    with pytest.raises(ValidationError, match="schema_version"):
        parse_config(MINIMAL.replace("schema_version = 1", ""))
    with pytest.raises(ValidationError, match="schema_version"):
        parse_config(MINIMAL.replace("schema_version = 1", "schema_version = 2"))
    with pytest.raises(ValidationError, match="gains.p1"):
        parse_config(MINIMAL.replace("p1 = 0.1", ""))
    with pytest.raises(ValidationError, match="inertia.rotational"):
        parse_config(MINIMAL.replace("[0.0, 2.0, 0.0]", "[0.0, -2.0, 0.0]"))
    with pytest.raises(ValidationError, match="gains.psi0_bound"):
        parse_config(MINIMAL + f"psi0_bound = {math.pi}\n")
    with pytest.raises(ParseError):
        parse_config("schema_version = = 1")
    with pytest.raises(ParseError):
        load_config("/nonexistent/file.cfg")


def test_gate_threshold_default():
    cfg = parse_config(MINIMAL + "[measurement]\nsigma = 1e-3\nperiod = 0.1\nright_position = [0, 0, 2]\n"
                       "[truth]\nvelocity = [0.1, 0, 0, 0, 0, 0]\nvelocity_bound = 0.01\n")
    base, rate = cfg.gate_parameters()
    assert np.allclose(base, 3e-3)
    w = math.sqrt(0.11**2 + 2 * 0.01**2)
    assert np.allclose(rate, [0.11, 0.01, 0.01, 0.01 + 2 * w, 0.01 + 2 * w, 0.01 + 2 * w])
    assert np.allclose(cfg.gate_threshold(), base + 0.1 * rate)
    fixed = parse_config(MINIMAL + "[measurement]\ngate_threshold = 0.5\n")
    assert np.array_equal(fixed.gate_threshold(), np.full(6, 0.5))
