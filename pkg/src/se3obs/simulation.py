"""Compiled closed-loop simulation of truth, sampled measurements and observer."""

from __future__ import annotations

import numpy as np
from numba import njit

from .dynamics import _rb_step
from .lie import DELTA_SING, _exp
from .measurement import _config_error, _gate
from .observer import _coupled_step, _diagnostics, _obs_step

INJECT_ZOH = 0
INJECT_CONTINUOUS = 1

STATUS_OK = 0
STATUS_SINGULAR = 1


@njit(cache=True)
def _rotation_ok(r_hat, r):
    tr = 0.0
    for i in range(3):
        for j in range(3):
            tr += r_hat[j, i] * r[j, i]
    return tr > -1.0 + DELTA_SING


@njit(cache=True)
def _record(k, t, g, v, gh, vh, lo, p1, p2, ts, gs, vs, ghs, vhs, eps_s, ve_s, ws):
    eps, ve, w, ok = _diagnostics(g, v, gh, vh, lo, p1, p2)
    ts[k] = t
    gs[k] = g
    vs[k] = v
    ghs[k] = gh
    vhs[k] = vh
    eps_s[k] = eps
    ve_s[k] = ve
    ws[k] = w
    return ok


@njit(cache=True)
def _simulate(g, v, gh, vh, lt, lt_inv, lo, lo_inv, gl, gr, k1, p1, p2, dt, n_steps,
              steps_per_meas, record_stride, noise, use_gate, gate_base, gate_rate, dropout_step, mode):
    """Run the closed loop for ``n_steps`` of size ``dt``.

    Measurements arrive every ``steps_per_meas`` steps starting at step 0,
    ``noise[j]`` perturbing the j-th one.  The outlier gate threshold is
    ``gate_base + gate_rate * (t - t_accepted)``.  Measurements from
    ``dropout_step`` on are ignored (negative disables).  Diagnostics are
    recorded every ``record_stride`` steps and at the final step.  Returns
    the recorded series and a status code.
    """
    n_rec = n_steps // record_stride + 2
    ts = np.empty(n_rec)
    gs = np.empty((n_rec, 4, 4))
    vs = np.empty((n_rec, 6))
    ghs = np.empty((n_rec, 4, 4))
    vhs = np.empty((n_rec, 6))
    eps_s = np.empty((n_rec, 6))
    ve_s = np.empty((n_rec, 6))
    ws = np.empty(n_rec)
    p2inv = 1.0 / p2

    eta = np.eye(4)
    eps = np.zeros(6)
    fresh = False
    have_prev = False
    prev = np.eye(4)
    t_prev = 0.0
    k = 0
    status = STATUS_OK
    j = 0
    for step in range(n_steps + 1):
        t = step * dt
        if step % record_stride == 0 or step == n_steps:
            if not _record(k, t, g, v, gh, vh, lo, p1, p2, ts, gs, vs, ghs, vhs, eps_s, ve_s, ws):
                status = STATUS_SINGULAR
                k += 1
                break
            k += 1
        if step == n_steps:
            break
        if mode == INJECT_ZOH and step % steps_per_meas == 0:
            meas = gl @ g @ gr @ _exp(noise[j])
            j += 1
            fresh = False
            if dropout_step < 0 or step < dropout_step:
                accept = True
                if use_gate and have_prev:
                    accept = _gate(prev, meas, gate_base + (t - t_prev) * gate_rate)
                if accept:
                    eta_n, eps_n, ok = _config_error(gh, meas, gl, gr, DELTA_SING)
                    if ok:
                        eta = eta_n
                        eps = eps_n
                        fresh = True
                        prev = meas
                        t_prev = t
                        have_prev = True
        if mode == INJECT_CONTINUOUS:
            g, v, gh, vh, ok = _coupled_step(g, v, gh, vh, lt, lt_inv, lo, lo_inv, gl, gr, k1, p1, p2inv, dt)
            if not ok:
                status = STATUS_SINGULAR
                break
        else:
            g, v = _rb_step(g, v, lt, lt_inv, dt)
            if fresh:
                gh, vh = _obs_step(gh, vh, lo, lo_inv, eta, eps, k1, p1, p2inv, dt)
            else:
                gh, vh = _rb_step(gh, vh, lo, lo_inv, dt)
        if not _rotation_ok(gh[:3, :3], g[:3, :3]):
            status = STATUS_SINGULAR
            break
    return ts[:k], gs[:k], vs[:k], ghs[:k], vhs[:k], eps_s[:k], ve_s[:k], ws[:k], status
