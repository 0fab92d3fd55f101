"""Deterministic propagation of a trajectory between jumps."""
from __future__ import annotations

import numpy as np

from .model import MasterEquationModel, drift_generator_apply

NORM_FLOOR = 1e-12


class IntegrationError(ArithmeticError):
    def __init__(self, t: float, message: str):
        super().__init__(f"integration failed at t={t!r}: {message}")
        self.t = t


def drift_step(model: MasterEquationModel, t: float, dt: float, psi: np.ndarray) -> np.ndarray:
    """One classical RK4 step of the nonlinear normalized drift, then renormalize."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    f = drift_generator_apply
    r0 = model.rates(t)
    rh = model.rates(t + dt / 2)
    r1 = model.rates(t + dt)
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = f(model, t, psi, r0)
        k2 = f(model, t + dt / 2, psi + dt / 2 * k1, rh)
        k3 = f(model, t + dt / 2, psi + dt / 2 * k2, rh)
        k4 = f(model, t + dt, psi + dt * k3, r1)
        out = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        norm = np.linalg.norm(out)
    if not np.isfinite(norm) or norm < NORM_FLOOR:
        raise IntegrationError(t, f"state norm collapsed to {norm!r}")
    return out / norm


def propagate(model: MasterEquationModel, psi: np.ndarray, t0: float, t1: float, dt: float) -> np.ndarray:
    """Repeated drift_step from t0 to t1 with a fixed step (t1 - t0 must be a multiple of dt)."""
    n = int(round((t1 - t0) / dt))
    for i in range(n):
        psi = drift_step(model, t0 + i * dt, dt, psi)
    return psi
