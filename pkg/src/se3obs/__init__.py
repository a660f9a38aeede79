"""Pose and velocity estimation of a free-floating rigid body on SE(3)."""

from .config import ScenarioConfig, load_config, load_preset, parse_config
from .dynamics import (Inertia, RigidBodyState, free_acceleration, integrate_step, kinetic_energy,
                       propagate, spatial_momentum, trajectory)
from .errors import (ConfigError, GainBoundViolated, InvalidAlgebraElement, LogSingularity, ParseError,
                     Se3ObsError, SingularInertia, ValidationError)
from .harness import (McResult, McSummary, RunRecord, emit_csv, pose_errors, read_run_csv,
                      run_monte_carlo, run_single, sample_scenario, summarize)
from .lie import (ad_small, ad_tilde, adjoint, b_r, b_r_series, coadjoint, euler_xyz, make_pose, pose_inv,
                  quaternion, se3_exp, se3_log, twist_hat, twist_vee)
from .measurement import (MeasurementModel, NoiseModel, TimedMeasurement, add_noise, apply_model,
                          error_to_config_space, measurement_error, outlier_gate, sample_measurements)
from .observer import (ErrorDiagnostics, GainCertificate, ObserverGains, ObserverState, c_tilde, coupled_step,
                       design_force, error_diagnostics, gain_bound, ingest_measurement, make_gains,
                       observer_derivatives, observer_step, velocity_error_dynamics_oracle)

__version__ = "0.1.0"
