"""Closed-form SE(3) / se(3) operators.

Conventions
-----------
* A pose is a 4x4 homogeneous matrix ``[[R, p], [0, 1]]``.
* A twist is a 6-vector ``[omega, v]`` (angular first).  Log-coordinates
  ``[psi, q]`` use the same layout.
* A wrench is a 6-vector ``[rotational, translational]`` paired with twists
  by the plain dot product.
* ``ad_V = [[w^, 0], [v^, w^]]`` so that ``ad_V W = vee([V^, W^])``.

The numerical kernels are compiled with numba (prefix ``_``) and return
status flags instead of raising; the public wrappers raise.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.spatial.transform import Rotation
from scipy.special import bernoulli

from .errors import InvalidAlgebraElement, LogSingularity

DELTA_SING = 1e-9
SMALL_ANGLE = 1e-4
# gamma closed forms cancel like eps/theta^4; below this use the series
GAMMA_SERIES = 0.1

# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def _hat(v):
    m = np.zeros((3, 3))
    m[0, 1] = -v[2]
    m[0, 2] = v[1]
    m[1, 0] = v[2]
    m[1, 2] = -v[0]
    m[2, 0] = -v[1]
    m[2, 1] = v[0]
    return m


@njit(cache=True)
def _pose_inv(g):
    out = np.zeros((4, 4))
    for i in range(3):
        for j in range(3):
            out[i, j] = g[j, i]
    for i in range(3):
        out[i, 3] = -(g[0, i] * g[0, 3] + g[1, i] * g[1, 3] + g[2, i] * g[2, 3])
    out[3, 3] = 1.0
    return out


@njit(cache=True)
def _so3_coeffs(theta):
    """Return sin(t)/t, (1-cos t)/t^2, (t-sin t)/t^3."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        t4 = t2 * t2
        return (1.0 - t2 / 6.0 + t4 / 120.0,
                0.5 - t2 / 24.0 + t4 / 720.0,
                1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0)
    s = math.sin(theta)
    sh = math.sin(0.5 * theta)
    return s / theta, 2.0 * sh * sh / (theta * theta), (theta - s) / (theta * theta * theta)


@njit(cache=True)
def _exp(x):
    psi = x[:3]
    theta = math.sqrt(psi[0] * psi[0] + psi[1] * psi[1] + psi[2] * psi[2])
    a, b, c = _so3_coeffs(theta)
    k = _hat(psi)
    k2 = k @ k
    eye = np.eye(3)
    rot = eye + a * k + b * k2
    amat = eye + b * k + c * k2
    g = np.zeros((4, 4))
    g[:3, :3] = rot
    g[:3, 3] = amat @ x[3:]
    g[3, 3] = 1.0
    return g


@njit(cache=True)
def _alpha(theta):
    # (x/2) cot(x/2)
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 12.0 - t2 * t2 / 720.0
    h = 0.5 * theta
    return h * math.cos(h) / math.sin(h)


@njit(cache=True)
def _a_inv(psi):
    theta = math.sqrt(psi[0] * psi[0] + psi[1] * psi[1] + psi[2] * psi[2])
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        coef = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        coef = (1.0 - _alpha(theta)) / (theta * theta)
    k = _hat(psi)
    return np.eye(3) - 0.5 * k + coef * (k @ k)


@njit(cache=True)
def _log(g, delta_sing):
    """Return (xi, ok). ``ok`` is False at the pi-rotation singularity."""
    xi = np.zeros(6)
    tr = g[0, 0] + g[1, 1] + g[2, 2]
    if tr <= -1.0 + delta_sing:
        return xi, False
    w0 = 0.5 * (g[2, 1] - g[1, 2])
    w1 = 0.5 * (g[0, 2] - g[2, 0])
    w2 = 0.5 * (g[1, 0] - g[0, 1])
    s = math.sqrt(w0 * w0 + w1 * w1 + w2 * w2)
    phi = math.atan2(s, 0.5 * (tr - 1.0))
    if phi < SMALL_ANGLE:
        p2 = phi * phi
        f = 1.0 + p2 / 6.0 + 7.0 * p2 * p2 / 360.0
    else:
        f = phi / s
    xi[0] = f * w0
    xi[1] = f * w1
    xi[2] = f * w2
    if phi >= math.pi:
        return xi, False
    xi[3:] = _a_inv(xi[:3]) @ np.ascontiguousarray(g[:3, 3])
    return xi, True


@njit(cache=True)
def _adjoint(g):
    out = np.zeros((6, 6))
    rot = g[:3, :3].copy()
    out[:3, :3] = rot
    out[3:, 3:] = rot
    out[3:, :3] = _hat(g[:3, 3]) @ rot
    return out


@njit(cache=True)
def _ad(v):
    out = np.zeros((6, 6))
    w = _hat(v[:3])
    out[:3, :3] = w
    out[3:, 3:] = w
    out[3:, :3] = _hat(v[3:])
    return out


@njit(cache=True)
def _ad_tilde(h):
    out = np.zeros((6, 6))
    out[:3, :3] = _hat(h[:3])
    hv = _hat(h[3:])
    out[:3, 3:] = hv
    out[3:, :3] = hv
    return out


@njit(cache=True)
def _gammas(theta):
    if theta < GAMMA_SERIES:
        t2 = theta * theta
        t4 = t2 * t2
        t6 = t4 * t2
        t8 = t4 * t4
        return (1.0 / 12.0 - t4 / 30240.0 - t6 / 604800.0 - t8 / 15966720.0,
                -1.0 / 720.0 - t2 / 15120.0 - t4 / 403200.0 - t6 / 11975040.0
                - 691.0 * t8 / 261534873600.0)
    s = math.sin(theta)
    sh = math.sin(0.5 * theta)
    cm1 = -2.0 * sh * sh
    t2 = theta * theta
    g1 = 2.0 / t2 + (theta + 3.0 * s) / (4.0 * theta * cm1)
    g2 = 1.0 / (t2 * t2) + (theta + s) / (4.0 * t2 * theta * cm1)
    return g1, g2


@njit(cache=True)
def _b_r(x):
    """Return (B, ok) with B = I + ad/2 + g1 ad^2 + g2 ad^4."""
    theta = math.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    if theta >= math.pi:
        return np.eye(6), False
    g1, g2 = _gammas(theta)
    a1 = _ad(x)
    a2 = a1 @ a1
    return np.eye(6) + 0.5 * a1 + g1 * a2 + g2 * (a2 @ a2), True


# ---------------------------------------------------------------------------
# public API


def hat(v) -> np.ndarray:
    """Cross-product matrix: ``hat(v) @ w == cross(v, w)``."""
    return _hat(np.asarray(v, dtype=float))


def twist_hat(V) -> np.ndarray:
    """6-vector twist to its 4x4 se(3) matrix."""
    V = np.asarray(V, dtype=float)
    m = np.zeros((4, 4))
    m[:3, :3] = _hat(V[:3])
    m[:3, 3] = V[3:]
    return m


def twist_vee(M, tol: float = 1e-12) -> np.ndarray:
    """Inverse of :func:`twist_hat`.

    Raises InvalidAlgebraElement if the rotational block is not skew or the
    last row is not zero.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4):
        raise InvalidAlgebraElement(f"expected a 4x4 matrix, got shape {M.shape}")
    w = M[:3, :3]
    if np.max(np.abs(w + w.T)) > tol or np.max(np.abs(M[3])) > tol:
        raise InvalidAlgebraElement("matrix is not an element of se(3)")
    return np.array([M[2, 1], M[0, 2], M[1, 0], M[0, 3], M[1, 3], M[2, 3]])


def make_pose(rotation=None, translation=None) -> np.ndarray:
    g = np.eye(4)
    if rotation is not None:
        g[:3, :3] = rotation
    if translation is not None:
        g[:3, 3] = translation
    return g


def pose_inv(g) -> np.ndarray:
    return _pose_inv(np.asarray(g, dtype=float))


def is_pose(g, tol: float = 1e-10) -> bool:
    g = np.asarray(g, dtype=float)
    if g.shape != (4, 4) or not np.all(np.isfinite(g)):
        return False
    rot = g[:3, :3]
    return (np.max(np.abs(rot.T @ rot - np.eye(3))) < tol
            and abs(np.linalg.det(rot) - 1.0) < tol
            and np.array_equal(g[3], [0.0, 0.0, 0.0, 1.0]))


def pose_distance(g, h) -> float:
    """Rotation Frobenius distance plus translation distance."""
    g = np.asarray(g)
    h = np.asarray(h)
    return float(np.linalg.norm(g[:3, :3] - h[:3, :3]) + np.linalg.norm(g[:3, 3] - h[:3, 3]))


def se3_exp(X) -> np.ndarray:
    """Exponential map of a twist (Rodrigues rotation, translation A(psi) q)."""
    return _exp(np.asarray(X, dtype=float))


def se3_log(g, delta_sing: float = DELTA_SING) -> np.ndarray:
    """Log-coordinates ``[psi, q]`` of a pose.

    ``psi`` is the rotation vector (``||psi|| < pi``) and ``q = A(psi)^-1 p``.
    Raises LogSingularity when ``tr(R) <= -1 + delta_sing``.
    """
    xi, ok = _log(np.asarray(g, dtype=float), delta_sing)
    if not ok:
        raise LogSingularity("rotation angle is at the pi singularity of the log map")
    return xi


def alpha(x: float) -> float:
    """``(x/2) cot(x/2)`` with the limit value 1 at zero."""
    return _alpha(abs(float(x)))


def a_mat(psi) -> np.ndarray:
    """Translational factor A(psi) of the exponential map."""
    psi = np.asarray(psi, dtype=float)
    _, b, c = _so3_coeffs(float(np.linalg.norm(psi)))
    k = _hat(psi)
    return np.eye(3) + b * k + c * (k @ k)


def a_inv(psi) -> np.ndarray:
    """Closed-form inverse of A(psi); requires ``||psi|| < pi``."""
    psi = np.asarray(psi, dtype=float)
    if np.linalg.norm(psi) >= math.pi:
        raise LogSingularity("||psi|| >= pi")
    return _a_inv(psi)


def adjoint(g) -> np.ndarray:
    """``Ad_g = [[R, 0], [p^ R, R]]``."""
    return _adjoint(np.asarray(g, dtype=float))


def ad_small(V) -> np.ndarray:
    return _ad(np.asarray(V, dtype=float))


def coadjoint(V) -> np.ndarray:
    """``ad*_V``, the transpose of ``ad_V``."""
    return _ad(np.asarray(V, dtype=float)).T


def ad_tilde(h) -> np.ndarray:
    """Momentum-indexed operator with ``ad~_h V = ad*_V h``.

    ``ad~_h = [[h_w^, h_v^], [h_v^, 0]]``.
    """
    return _ad_tilde(np.asarray(h, dtype=float))


def gammas(theta: float) -> tuple[float, float]:
    """Coefficients of ``ad^2`` and ``ad^4`` in the closed-form B_r."""
    return _gammas(abs(float(theta)))


def b_r(X) -> np.ndarray:
    """Inverse right Jacobian of exp: ``d/dt log(g) = b_r(log g) V_body``.

    Closed form ``I + ad_X/2 + gamma1 ad_X^2 + gamma2 ad_X^4``; requires
    ``||psi|| < pi``.
    """
    B, ok = _b_r(np.asarray(X, dtype=float))
    if not ok:
        raise LogSingularity("||psi|| >= pi")
    return B


def b_r_series(X, n_terms: int) -> np.ndarray:
    """Truncated series ``sum_n (-1)^n B_n / n! ad_X^n`` (B_1 = -1/2).

    Independent reference for :func:`b_r`; converges for ``||psi|| < 2 pi``.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    ad = _ad(np.asarray(X, dtype=float))
    bn = bernoulli(n_terms - 1)
    out = np.zeros((6, 6))
    power = np.eye(6)
    for n in range(n_terms):
        coef = (-1) ** n * bn[n] / math.factorial(n)
        if coef != 0.0:
            out += coef * power
        power = power @ ad
    return out


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_xyz(angles) -> np.ndarray:
    """Rotation for the X-Y-Z (intrinsic) sequence ``Rx(a) Ry(b) Rz(c)``."""
    a, b, c = angles
    return rot_x(a) @ rot_y(b) @ rot_z(c)


def rotation_angle(rot) -> float:
    """Angle of a rotation matrix in [0, pi]."""
    rot = np.asarray(rot)
    w = 0.5 * np.array([rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]])
    return math.atan2(float(np.linalg.norm(w)), 0.5 * (float(np.trace(rot)) - 1.0))


def quaternion(rot) -> np.ndarray:
    """Unit quaternion ``[w, x, y, z]`` with ``w >= 0`` for a rotation matrix."""
    x, y, z, w = Rotation.from_matrix(np.asarray(rot)).as_quat()
    q = np.array([w, x, y, z])
    return -q if w < 0 else q
