"""Torque-free rigid body: Euler-Poincare velocity dynamics and geometric stepping.

The integrator is a 4-stage Runge-Kutta-Munthe-Kaas scheme: each stage pose
is ``g0 exp(theta)`` and stage increments are mapped through ``b_r(theta)``,
so the pose never leaves SE(3) and no re-orthonormalisation is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import SingularInertia
from .lie import _ad, _adjoint, _b_r, _exp, _pose_inv


@dataclass(frozen=True)
class Inertia:
    """Rotational inertia [kg m^2] about the centre of mass and mass [kg]."""

    rotational: np.ndarray
    mass: float
    matrix: np.ndarray = field(init=False, repr=False, compare=False)
    inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        rot = np.array(self.rotational, dtype=float)
        if rot.shape != (3, 3) or not np.all(np.isfinite(rot)):
            raise SingularInertia("rotational inertia must be a finite 3x3 matrix")
        if np.max(np.abs(rot - rot.T)) > 1e-12 * max(1.0, np.max(np.abs(rot))):
            raise SingularInertia("rotational inertia is not symmetric")
        if np.min(np.linalg.eigvalsh(rot)) <= 0.0:
            raise SingularInertia("rotational inertia is not positive definite")
        if not self.mass > 0.0:
            raise SingularInertia("mass must be positive")
        big = np.zeros((6, 6))
        big[:3, :3] = rot
        big[3:, 3:] = self.mass * np.eye(3)
        small = np.zeros((6, 6))
        small[:3, :3] = np.linalg.inv(rot)
        small[3:, 3:] = np.eye(3) / self.mass
        object.__setattr__(self, "rotational", rot)
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "matrix", big)
        object.__setattr__(self, "inverse", small)

    @classmethod
    def diagonal(cls, moments, mass: float) -> "Inertia":
        return cls(np.diag(np.asarray(moments, dtype=float)), mass)


@dataclass(frozen=True)
class RigidBodyState:
    """Inertial pose ``g`` (4x4) and body-frame twist ``V``."""

    pose: np.ndarray
    velocity: np.ndarray


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _free_accel(lam, lam_inv, v):
    return lam_inv @ (_ad(v).T @ (lam @ v))


@njit(cache=True)
def _rb_step(g, v, lam, lam_inv, dt):
    h = 0.5 * dt
    k1 = v.copy()
    a1 = _free_accel(lam, lam_inv, v)

    v2 = v + h * a1
    b2, _ = _b_r(h * k1)
    k2 = b2 @ v2
    a2 = _free_accel(lam, lam_inv, v2)

    v3 = v + h * a2
    b3, _ = _b_r(h * k2)
    k3 = b3 @ v3
    a3 = _free_accel(lam, lam_inv, v3)

    v4 = v + dt * a3
    b4, _ = _b_r(dt * k3)
    k4 = b4 @ v4
    a4 = _free_accel(lam, lam_inv, v4)

    theta = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return g @ _exp(theta), v + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)


@njit(cache=True)
def _rb_propagate(g, v, lam, lam_inv, dt, n_steps):
    for _ in range(n_steps):
        g, v = _rb_step(g, v, lam, lam_inv, dt)
    return g, v


@njit(cache=True)
def _rb_trajectory(g, v, lam, lam_inv, dt, n_steps):
    poses = np.empty((n_steps + 1, 4, 4))
    vels = np.empty((n_steps + 1, 6))
    poses[0] = g
    vels[0] = v
    for i in range(n_steps):
        g, v = _rb_step(g, v, lam, lam_inv, dt)
        poses[i + 1] = g
        vels[i + 1] = v
    return poses, vels


# ---------------------------------------------------------------------------
# public API


def free_acceleration(inertia: Inertia, V) -> np.ndarray:
    """Body acceleration ``Lambda^-1 ad*_V Lambda V`` of the free body."""
    return _free_accel(inertia.matrix, inertia.inverse, np.asarray(V, dtype=float))


def integrate_step(state: RigidBodyState, inertia: Inertia, dt: float) -> RigidBodyState:
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    g, v = _rb_step(np.asarray(state.pose, dtype=float), np.asarray(state.velocity, dtype=float),
                    inertia.matrix, inertia.inverse, float(dt))
    return RigidBodyState(g, v)


def propagate(state: RigidBodyState, inertia: Inertia, dt: float, n_steps: int) -> RigidBodyState:
    """Apply :func:`integrate_step` ``n_steps`` times (compiled loop)."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    g, v = _rb_propagate(np.asarray(state.pose, dtype=float), np.asarray(state.velocity, dtype=float),
                         inertia.matrix, inertia.inverse, float(dt), int(n_steps))
    return RigidBodyState(g, v)


def trajectory(state: RigidBodyState, inertia: Inertia, dt: float, n_steps: int):
    """Poses ``(n+1, 4, 4)`` and velocities ``(n+1, 6)`` at every step."""
    return _rb_trajectory(np.asarray(state.pose, dtype=float), np.asarray(state.velocity, dtype=float),
                          inertia.matrix, inertia.inverse, float(dt), int(n_steps))


def kinetic_energy(inertia: Inertia, V) -> float:
    V = np.asarray(V, dtype=float)
    return 0.5 * float(V @ inertia.matrix @ V)


def spatial_momentum(state: RigidBodyState, inertia: Inertia) -> np.ndarray:
    """``Ad_{g^-1}^T Lambda V``: momentum expressed in the inertial frame."""
    ad_inv = _adjoint(_pose_inv(np.asarray(state.pose, dtype=float)))
    return ad_inv.T @ (inertia.matrix @ np.asarray(state.velocity, dtype=float))
