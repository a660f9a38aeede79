"""Nonlinear SE(3) pose/velocity observer with a rigid-body internal model.

Kinematics:  d/dt g_hat = g_hat [V_hat + Ad_eta K1 eps]^
Dynamics:    Lambda Ad_{eta^-1} dV_hat = ad*_w Lambda w + f_o - Lambda ad_{K1 eps} w,
             w = Ad_{eta^-1} V_hat,  f_o = p1 P2^-1 B_r(eps)^T eps

with ``eta = g_hat^-1 g`` and ``eps = log(eta)`` obtained from the
measurement residual.  Without a correction (``eps = 0``) the observer is a
free rigid body and serves as a predictor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .dynamics import Inertia, RigidBodyState, _free_accel, _rb_step
from .errors import GainBoundViolated, LogSingularity
from .lie import DELTA_SING, _ad, _ad_tilde, _adjoint, _b_r, _exp, _log, _pose_inv
from .measurement import MeasurementModel, TimedMeasurement, _config_error, _gate


@dataclass(frozen=True)
class GainCertificate:
    """Almost-global stability check ``p1 > p22 s(L) |w_e0|^2 / (pi^2 - |psi0|^2)``.

    ``bound`` uses the largest singular value of the full 6x6 inertia;
    ``bound_rotational`` the same expression with the rotational block only,
    reported alongside because the two forms appear interchangeably.
    """

    p1: float
    bound: float
    bound_rotational: float
    psi0_bound: float
    omega_e0_bound: float
    sigma_max_inertia: float
    sigma_max_rotational: float

    @property
    def valid(self) -> bool:
        return self.p1 > self.bound

    @property
    def margin(self) -> float:
        return self.p1 / self.bound if self.bound > 0.0 else math.inf


@dataclass(frozen=True)
class ObserverGains:
    p1: float
    p21: float
    p22: float
    certificate: GainCertificate | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for name in ("p1", "p21", "p22"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def k1(self) -> float:
        return 1.0 / self.p1

    @property
    def p2_diag(self) -> np.ndarray:
        return np.array([self.p21] * 3 + [self.p22] * 3)

    @property
    def P2(self) -> np.ndarray:
        return np.diag(self.p2_diag)

    @property
    def K1(self) -> np.ndarray:
        return self.k1 * np.eye(6)


def gain_bound(p22: float, psi0_bound: float, omega_e0_bound: float, inertia: Inertia) -> GainCertificate:
    """Evaluate the lower bound on p1 without judging any particular p1."""
    if not 0.0 <= psi0_bound < math.pi:
        raise ValueError("psi0_bound must lie in [0, pi)")
    s_full = float(np.linalg.norm(inertia.matrix, 2))
    s_rot = float(np.linalg.norm(inertia.rotational, 2))
    den = math.pi**2 - psi0_bound**2
    w2 = omega_e0_bound**2
    return GainCertificate(math.nan, p22 * s_full * w2 / den, p22 * s_rot * w2 / den,
                           psi0_bound, omega_e0_bound, s_full, s_rot)


def make_gains(p1: float, p21: float, p22: float, psi0_bound: float, omega_e0_bound: float,
               inertia: Inertia) -> ObserverGains:
    """Build gains and certify them against the almost-global bound.

    ``psi0_bound`` and ``omega_e0_bound`` are worst-case initial rotation and
    angular-velocity errors declared at design time.  Raises
    GainBoundViolated when p1 does not exceed the bound.
    """
    for name, val in (("p1", p1), ("p21", p21), ("p22", p22),
                      ("omega_e0_bound", omega_e0_bound)):
        if not val > 0.0:
            raise ValueError(f"{name} must be positive")
    cert = replace(gain_bound(p22, psi0_bound, omega_e0_bound, inertia), p1=float(p1))
    if not cert.valid:
        raise GainBoundViolated(p1, cert.bound)
    return ObserverGains(float(p1), float(p21), float(p22), cert)


@dataclass(frozen=True)
class ObserverState:
    """Estimate plus the correction held since the last accepted measurement."""

    pose_estimate: np.ndarray = field(default_factory=lambda: np.eye(4))
    velocity_estimate: np.ndarray = field(default_factory=lambda: np.zeros(6))
    last_epsilon: np.ndarray = field(default_factory=lambda: np.zeros(6))
    last_eta: np.ndarray = field(default_factory=lambda: np.eye(4))
    measurement_fresh: bool = False
    time: float = 0.0
    last_measurement: np.ndarray | None = None


@dataclass(frozen=True)
class ErrorDiagnostics:
    epsilon: np.ndarray
    velocity_error: np.ndarray
    lyapunov_W: float
    psi_norm: float


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _design_force(p1, p2inv, eps):
    b, ok = _b_r(eps)
    return p1 * p2inv * (b.T @ eps), ok


@njit(cache=True)
def _vhat_rate(vhat, lam, lam_inv, ad_eta, ad_eta_inv, fo, ad_k):
    w = ad_eta_inv @ vhat
    rhs = _ad(w).T @ (lam @ w) + fo - lam @ (ad_k @ w)
    return ad_eta @ (lam_inv @ rhs)


@njit(cache=True)
def _obs_step(ghat, vhat, lam, lam_inv, eta, eps, k1, p1, p2inv, dt):
    """RKMK4 step of the observer with (eta, eps) held over the step."""
    ad_eta = _adjoint(eta)
    ad_eta_inv = _adjoint(_pose_inv(eta))
    inj = ad_eta @ (k1 * eps)
    fo, _ = _design_force(p1, p2inv, eps)
    ad_k = _ad(k1 * eps)
    h = 0.5 * dt

    k_1 = vhat + inj
    a_1 = _vhat_rate(vhat, lam, lam_inv, ad_eta, ad_eta_inv, fo, ad_k)

    v2 = vhat + h * a_1
    b2, _ = _b_r(h * k_1)
    k_2 = b2 @ (v2 + inj)
    a_2 = _vhat_rate(v2, lam, lam_inv, ad_eta, ad_eta_inv, fo, ad_k)

    v3 = vhat + h * a_2
    b3, _ = _b_r(h * k_2)
    k_3 = b3 @ (v3 + inj)
    a_3 = _vhat_rate(v3, lam, lam_inv, ad_eta, ad_eta_inv, fo, ad_k)

    v4 = vhat + dt * a_3
    b4, _ = _b_r(dt * k_3)
    k_4 = b4 @ (v4 + inj)
    a_4 = _vhat_rate(v4, lam, lam_inv, ad_eta, ad_eta_inv, fo, ad_k)

    theta = (dt / 6.0) * (k_1 + 2.0 * k_2 + 2.0 * k_3 + k_4)
    return ghat @ _exp(theta), vhat + (dt / 6.0) * (a_1 + 2.0 * a_2 + 2.0 * a_3 + a_4)


@njit(cache=True)
def _coupled_rates(g, v, ghat, vhat, lt, lt_inv, lo, lo_inv, gl, gr, k1, p1, p2inv):
    """Truth and observer rates with the correction evaluated at these states."""
    eta, eps, ok = _config_error(ghat, gl @ g @ gr, gl, gr, DELTA_SING)
    ad_eta = _adjoint(eta)
    ad_eta_inv = _adjoint(_pose_inv(eta))
    fo, ok2 = _design_force(p1, p2inv, eps)
    a_t = _free_accel(lt, lt_inv, v)
    a_o = _vhat_rate(vhat, lo, lo_inv, ad_eta, ad_eta_inv, fo, _ad(k1 * eps))
    return vhat + ad_eta @ (k1 * eps), a_t, a_o, ok and ok2


@njit(cache=True)
def _coupled_step(g, v, ghat, vhat, lt, lt_inv, lo, lo_inv, gl, gr, k1, p1, p2inv, dt):
    """Joint RKMK4 step of truth and observer with continuous correction."""
    h = 0.5 * dt
    d1, at1, ao1, ok1 = _coupled_rates(g, v, ghat, vhat, lt, lt_inv, lo, lo_inv, gl, gr, k1, p1, p2inv)
    kt1 = v.copy()
    ko1 = d1

    th_t = h * kt1
    th_o = h * ko1
    v2 = v + h * at1
    vh2 = vhat + h * ao1
    d2, at2, ao2, ok2 = _coupled_rates(g @ _exp(th_t), v2, ghat @ _exp(th_o), vh2,
                                       lt, lt_inv, lo, lo_inv, gl, gr, k1, p1, p2inv)
    bt, _ = _b_r(th_t)
    bo, _ = _b_r(th_o)
    kt2 = bt @ v2
    ko2 = bo @ d2

    th_t = h * kt2
    th_o = h * ko2
    v3 = v + h * at2
    vh3 = vhat + h * ao2
    d3, at3, ao3, ok3 = _coupled_rates(g @ _exp(th_t), v3, ghat @ _exp(th_o), vh3,
                                       lt, lt_inv, lo, lo_inv, gl, gr, k1, p1, p2inv)
    bt, _ = _b_r(th_t)
    bo, _ = _b_r(th_o)
    kt3 = bt @ v3
    ko3 = bo @ d3

    th_t = dt * kt3
    th_o = dt * ko3
    v4 = v + dt * at3
    vh4 = vhat + dt * ao3
    d4, at4, ao4, ok4 = _coupled_rates(g @ _exp(th_t), v4, ghat @ _exp(th_o), vh4,
                                       lt, lt_inv, lo, lo_inv, gl, gr, k1, p1, p2inv)
    bt, _ = _b_r(th_t)
    bo, _ = _b_r(th_o)
    kt4 = bt @ v4
    ko4 = bo @ d4

    c = dt / 6.0
    g_new = g @ _exp(c * (kt1 + 2.0 * kt2 + 2.0 * kt3 + kt4))
    v_new = v + c * (at1 + 2.0 * at2 + 2.0 * at3 + at4)
    gh_new = ghat @ _exp(c * (ko1 + 2.0 * ko2 + 2.0 * ko3 + ko4))
    vh_new = vhat + c * (ao1 + 2.0 * ao2 + 2.0 * ao3 + ao4)
    return g_new, v_new, gh_new, vh_new, ok1 and ok2 and ok3 and ok4


@njit(cache=True)
def _diagnostics(g, v, ghat, vhat, lam, p1, p2):
    """(eps, V_e, W, ok) for truth (g, v) and estimate (ghat, vhat)."""
    eta = _pose_inv(ghat) @ g
    eps, ok = _log(eta, DELTA_SING)
    ve = v - _adjoint(_pose_inv(eta)) @ vhat
    w = 0.5 * (p1 * (eps @ eps) + ve @ (p2 * (lam @ ve)))
    return eps, ve, w, ok


# ---------------------------------------------------------------------------
# public API


def design_force(gains: ObserverGains, eps) -> np.ndarray:
    """``f_o = p1 P2^-1 B_r(eps)^T eps``."""
    fo, ok = _design_force(gains.p1, 1.0 / gains.p2_diag, np.asarray(eps, dtype=float))
    if not ok:
        raise LogSingularity("||psi(eps)|| >= pi")
    return fo


def observer_derivatives(state: ObserverState, gains: ObserverGains, inertia: Inertia, eps, eta):
    """Pose direction (body twist of ``g_hat``) and ``dV_hat/dt``."""
    eps = np.asarray(eps, dtype=float)
    eta = np.asarray(eta, dtype=float)
    _, ok = _log(eta, DELTA_SING)
    if not ok:
        raise LogSingularity("eta is at the pi-rotation singularity")
    ad_eta = _adjoint(eta)
    vhat = np.asarray(state.velocity_estimate, dtype=float)
    direction = vhat + ad_eta @ (gains.k1 * eps)
    rate = _vhat_rate(vhat, inertia.matrix, inertia.inverse, ad_eta, _adjoint(_pose_inv(eta)),
                      design_force(gains, eps), _ad(gains.k1 * eps))
    return direction, rate


def observer_step(state: ObserverState, gains: ObserverGains, inertia: Inertia, dt: float) -> ObserverState:
    """Advance the estimate by ``dt``.

    With a fresh measurement the held (eta, eps) correction is applied;
    otherwise the observer is propagated as a free rigid body.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    ghat = np.asarray(state.pose_estimate, dtype=float)
    vhat = np.asarray(state.velocity_estimate, dtype=float)
    if state.measurement_fresh:
        g, v = _obs_step(ghat, vhat, inertia.matrix, inertia.inverse,
                         np.asarray(state.last_eta, dtype=float), np.asarray(state.last_epsilon, dtype=float),
                         gains.k1, gains.p1, 1.0 / gains.p2_diag, float(dt))
    else:
        g, v = _rb_step(ghat, vhat, inertia.matrix, inertia.inverse, float(dt))
    return replace(state, pose_estimate=g, velocity_estimate=v, time=state.time + dt)


def ingest_measurement(state: ObserverState, model: MeasurementModel, meas: TimedMeasurement,
                       gate=None) -> ObserverState:
    """Compute and hold the correction for a new measurement.

    ``gate`` is an optional 6-vector threshold for :func:`outlier_gate`
    against the last accepted measurement.  Gated or singular measurements
    put the observer in prediction mode (``eps = 0``).
    """
    if meas.time < state.time - 1e-12:
        raise ValueError("measurement is older than the observer state")
    g_meas = np.asarray(meas.pose, dtype=float)
    predict = replace(state, last_epsilon=np.zeros(6), last_eta=np.eye(4), measurement_fresh=False)
    if gate is not None and state.last_measurement is not None:
        thr = np.broadcast_to(np.asarray(gate, dtype=float), (6,)).copy()
        if not _gate(state.last_measurement, g_meas, thr):
            return predict
    eta, eps, ok = _config_error(np.asarray(state.pose_estimate, dtype=float), g_meas,
                                 model.left_action, model.right_action, DELTA_SING)
    if not ok:
        return predict
    return replace(state, last_epsilon=eps, last_eta=eta, measurement_fresh=True, last_measurement=g_meas)


def coupled_step(truth: RigidBodyState, state: ObserverState, gains: ObserverGains,
                 truth_inertia: Inertia, inertia: Inertia, model: MeasurementModel, dt: float):
    """Jointly integrate truth and observer with the correction recomputed at
    every stage from noiseless measurements (continuous injection)."""
    g, v, gh, vh, ok = _coupled_step(
        np.asarray(truth.pose, dtype=float), np.asarray(truth.velocity, dtype=float),
        np.asarray(state.pose_estimate, dtype=float), np.asarray(state.velocity_estimate, dtype=float),
        truth_inertia.matrix, truth_inertia.inverse, inertia.matrix, inertia.inverse,
        model.left_action, model.right_action, gains.k1, gains.p1, 1.0 / gains.p2_diag, float(dt))
    if not ok:
        raise LogSingularity("estimation error reached the pi-rotation singularity")
    return RigidBodyState(g, v), replace(state, pose_estimate=gh, velocity_estimate=vh, time=state.time + dt)


def error_diagnostics(truth: RigidBodyState, state: ObserverState, gains: ObserverGains,
                      inertia: Inertia) -> ErrorDiagnostics:
    """Errors ``eps = log(g_hat^-1 g)``, ``V_e = V - Ad_{eta^-1} V_hat`` and
    ``W = (p1 |eps|^2 + V_e^T P2 Lambda V_e) / 2``."""
    eps, ve, w, ok = _diagnostics(np.asarray(truth.pose, dtype=float), np.asarray(truth.velocity, dtype=float),
                                  np.asarray(state.pose_estimate, dtype=float),
                                  np.asarray(state.velocity_estimate, dtype=float),
                                  inertia.matrix, gains.p1, gains.p2_diag)
    if not ok:
        raise LogSingularity("estimation error is at the pi-rotation singularity")
    return ErrorDiagnostics(eps, ve, float(w), float(np.linalg.norm(eps[:3])))


def c_tilde(V_t, inertia: Inertia) -> np.ndarray:
    """``ad*_V L + ad~_{L V} - L ad_V``; skew-symmetric for block inertia."""
    V_t = np.asarray(V_t, dtype=float)
    lam = inertia.matrix
    a = _ad(V_t)
    return a.T @ lam + _ad_tilde(lam @ V_t) - lam @ a


def velocity_error_dynamics_oracle(V_t, V_e, inertia: Inertia) -> np.ndarray:
    """Matrix C(V_t, V_e) of the velocity error dynamics
    ``L dV_e/dt = C V_e - f_o``."""
    V_e = np.asarray(V_e, dtype=float)
    return c_tilde(V_t, inertia) - _ad(V_e).T @ inertia.matrix
