"""Relative-pose measurement model ``h(g) = g_l g g_r`` and its error transport."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from numba import njit

from .errors import LogSingularity
from .lie import DELTA_SING, _adjoint, _exp, _log, _pose_inv

CSV_HEADER = ["t"] + [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)] + ["px", "py", "pz"]


@dataclass(frozen=True)
class MeasurementModel:
    """Composite left/right group action on the target pose.

    For a camera ``E`` observing a grasp frame ``G`` on the target,
    ``left_action = g_e^-1`` and ``right_action = g_tg``.
    """

    left_action: np.ndarray = field(default_factory=lambda: np.eye(4))
    right_action: np.ndarray = field(default_factory=lambda: np.eye(4))


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean Gaussian in the measurement tangent space, per-axis std."""

    sigma: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), (6,)).copy()
        if np.any(sigma < 0.0) or not np.all(np.isfinite(sigma)):
            raise ValueError("sigma must be finite and non-negative")
        object.__setattr__(self, "sigma", sigma)

    def rng(self) -> np.random.Generator:
        # Philox is counter-based, so independent runs never share state.
        return np.random.Generator(np.random.Philox(self.seed))


@dataclass(frozen=True)
class TimedMeasurement:
    time: float
    pose: np.ndarray


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _config_error(ghat, g_meas, gl, gr, delta_sing):
    """Return (eta, eps, ok) for the estimate ``ghat`` and a measurement."""
    dh = _pose_inv(gl @ ghat @ gr) @ g_meas
    eta = gr @ dh @ _pose_inv(gr)
    e, ok = _log(dh, delta_sing)
    return eta, _adjoint(gr) @ e, ok


@njit(cache=True)
def _gate(prev, cand, threshold):
    d, ok = _log(_pose_inv(prev) @ cand, DELTA_SING)
    if not ok:
        return False
    for i in range(6):
        if abs(d[i]) > threshold[i]:
            return False
    return True


# ---------------------------------------------------------------------------
# public API


def apply_model(model: MeasurementModel, g_t) -> np.ndarray:
    return model.left_action @ np.asarray(g_t, dtype=float) @ model.right_action


def measurement_error(model: MeasurementModel, g_hat, g_meas) -> np.ndarray:
    """Left-invariant residual ``h(g_hat)^-1 g_meas``."""
    return _pose_inv(apply_model(model, g_hat)) @ np.asarray(g_meas, dtype=float)


def error_to_config_space(model: MeasurementModel, delta_h, delta_sing: float = DELTA_SING):
    """Transport a measurement residual to the state space.

    Returns ``(eta, eps)`` with ``eta = g_r dh g_r^-1`` and
    ``eps = Ad_{g_r} log(dh)``.
    """
    delta_h = np.asarray(delta_h, dtype=float)
    gr = model.right_action
    e, ok = _log(delta_h, delta_sing)
    if not ok:
        raise LogSingularity("measurement residual is at the pi-rotation singularity")
    return gr @ delta_h @ _pose_inv(gr), _adjoint(gr) @ e


def draw_noise(noise: NoiseModel, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Tangent-space noise samples, shape ``(6,)`` or ``(n, 6)``."""
    shape = (6,) if n is None else (n, 6)
    return rng.standard_normal(shape) * noise.sigma


def add_noise(g, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Concentrated-Gaussian perturbation ``g exp(nu^)``.

    With all-zero sigma the input is returned unchanged (bit-exact copy) and
    the generator is not advanced.
    """
    g = np.asarray(g, dtype=float)
    if not np.any(noise.sigma):
        return g.copy()
    return g @ _exp(draw_noise(noise, rng))


def outlier_gate(prev_accepted, candidate, threshold) -> bool:
    """True (accept) unless some ``|log(prev^-1 cand)|`` component exceeds threshold.

    A residual at the log singularity is rejected.
    """
    thr = np.broadcast_to(np.asarray(threshold, dtype=float), (6,)).copy()
    return bool(_gate(np.asarray(prev_accepted, dtype=float), np.asarray(candidate, dtype=float), thr))


def sample_measurements(poses: Iterable, times: Iterable[float], model: MeasurementModel,
                        noise: NoiseModel, rng: np.random.Generator | None = None
                        ) -> Iterator[TimedMeasurement]:
    """Noisy measurements of a sequence of truth poses at the given times."""
    rng = noise.rng() if rng is None else rng
    last = -np.inf
    for t, g in zip(times, poses):
        if not t > last or t < 0.0:
            raise ValueError("measurement times must be non-negative and strictly increasing")
        last = t
        yield TimedMeasurement(float(t), add_noise(apply_model(model, g), noise, rng))


def write_measurements_csv(measurements: Iterable[TimedMeasurement], path) -> None:
    """CSV rows ``t, r11..r33 (row-major), px, py, pz``."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for m in measurements:
            writer.writerow([repr(float(m.time))]
                            + [repr(float(x)) for x in m.pose[:3, :3].ravel()]
                            + [repr(float(x)) for x in m.pose[:3, 3]])


def read_measurements_csv(path) -> list[TimedMeasurement]:
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected measurement CSV header: {header}")
        for row in reader:
            vals = [float(x) for x in row]
            g = np.eye(4)
            g[:3, :3] = np.reshape(vals[1:10], (3, 3))
            g[:3, 3] = vals[10:13]
            out.append(TimedMeasurement(vals[0], g))
    return out
