"""Direct RK4 integration of the master equation and the positivity monitor.

The integrator never projects back onto positive matrices: past a positivity
violation it keeps following the formal solution.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .hilbert import hermitian_eigen_min, hermitize
from .model import MasterEquationModel, generator_apply

TRACE_TOL = 1e-8
PSD_TOL = 1e-9
SLOPE_TOL = 1e-8


class TraceDriftError(ArithmeticError):
    pass


@dataclass
class DensityTrajectory:
    times: list[float]
    states: list[np.ndarray]
    label: str
    dt: float
    stride: int

    def lambda_min(self) -> np.ndarray:
        return np.array([hermitian_eigen_min(r)[0] for r in self.states])

    def to_csv(self, path):
        write_density_csv(path, self.times, self.states, extra={"lambda_min": self.lambda_min()})


@dataclass
class PositivityReport:
    violated: bool
    t0: float | None = None
    phi0: np.ndarray | None = None
    slope_check: float | None = None
    lambda_min: float | None = None  # smallest eigenvalue seen over the trajectory

    def to_json(self) -> dict:
        return {
            "violated": self.violated,
            "t0": self.t0,
            "phi0": None if self.phi0 is None else [[float(z.real), float(z.imag)] for z in self.phi0],
            "slope_check": self.slope_check,
            "lambda_min": self.lambda_min,
        }


def rk4_density_step(model: MasterEquationModel, t: float, dt: float, rho: np.ndarray) -> np.ndarray:
    f = generator_apply
    k1 = f(model, t, rho)
    k2 = f(model, t + dt / 2, rho + dt / 2 * k1)
    k3 = f(model, t + dt / 2, rho + dt / 2 * k2)
    k4 = f(model, t + dt, rho + dt * k3)
    return hermitize(rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))


def _integrate(model, rho, t0, dt, n_steps, stride, times, states, tr0):
    for i in range(n_steps):
        rho = rk4_density_step(model, t0 + i * dt, dt, rho)
        # relative to the matrix scale: past a violation entries can grow without bound
        if abs(rho.trace().real - tr0) > TRACE_TOL * max(1.0, float(np.abs(rho).max())):
            raise TraceDriftError(f"trace drifted to {rho.trace().real!r} at t={t0 + (i + 1) * dt!r}")
        if (i + 1) % stride == 0:
            times.append(t0 + (i + 1) * dt)
            states.append(rho)
    return rho


def integrate_master(model: MasterEquationModel, rho0: np.ndarray, dt: float,
                     output_stride: int = 1) -> DensityTrajectory:
    rho0 = np.asarray(rho0, dtype=complex)
    if abs(rho0.trace() - 1) > 1e-9 or not np.allclose(rho0, rho0.conj().T, atol=1e-10):
        raise ValueError("rho0 must be Hermitian with unit trace")
    if not dt > 0 or output_stride < 1:
        raise ValueError("need dt > 0 and output_stride >= 1")
    n_steps = int(round((model.t_end - model.t_start) / dt))
    times, states = [model.t_start], [hermitize(rho0)]
    _integrate(model, states[0], model.t_start, dt, n_steps, output_stride, times, states,
               rho0.trace().real)
    return DensityTrajectory(times, states, model.label, dt, output_stride)


def positivity_monitor(traj: DensityTrajectory, model: MasterEquationModel,
                       tol: float = PSD_TOL) -> PositivityReport:
    """Locate the first time the lowest eigenvalue of rho(t) drops below -tol.

    The crossing is bracketed between output samples and then narrowed to a
    single integrator step by bisection, re-integrating from the last sample
    that was still positive. Reports the eigenvector phi0 there and the slope
    <phi0| L rho |phi0>, which must be negative at a genuine violation.
    """
    lams = traj.lambda_min()
    bad = np.nonzero(lams < -tol)[0]
    if bad.size == 0:
        return PositivityReport(False, lambda_min=float(lams.min()))
    hi = int(bad[0])
    if hi == 0:
        lam, phi = hermitian_eigen_min(traj.states[0])
        slope = float(np.vdot(phi, generator_apply(model, traj.times[0], traj.states[0]) @ phi).real)
        return PositivityReport(True, traj.times[0], phi, slope, float(lams.min()))

    dt = traj.dt
    t_lo, rho_lo, lam_lo = traj.times[hi - 1], traj.states[hi - 1], lams[hi - 1]
    rho_hi, lam_hi = traj.states[hi], lams[hi]
    width = traj.stride
    while width > 1:
        half = width // 2
        rho_mid = _integrate(model, rho_lo, t_lo, dt, half, half, [], [], rho_lo.trace().real)
        lam_mid = hermitian_eigen_min(rho_mid)[0]
        if lam_mid < -tol:
            rho_hi, lam_hi, width = rho_mid, lam_mid, half
        else:
            t_lo, rho_lo, lam_lo = t_lo + half * dt, rho_mid, lam_mid
            width -= half
    # linear interpolation of lambda_min across the final step
    frac = min(1.0, max(0.0, lam_lo / (lam_lo - lam_hi)))
    t0 = t_lo + dt * frac
    rho0, t_eval = (rho_lo, t_lo) if frac < 0.5 else (rho_hi, t_lo + dt)
    _, phi0 = hermitian_eigen_min(rho0)
    slope = float(np.vdot(phi0, generator_apply(model, t_eval, rho0) @ phi0).real)
    return PositivityReport(True, float(t0), phi0, slope, float(lams.min()))


def write_density_csv(path, times, states, extra: dict | None = None):
    """Columns: t, re/im of each rho entry in row-major order, then the extra columns."""
    dim = states[0].shape[0]
    header = ["t"]
    for i in range(dim):
        for j in range(dim):
            header += [f"re_rho_{i}{j}", f"im_rho_{i}{j}"]
    extra = extra or {}
    header += list(extra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for n, (t, rho) in enumerate(zip(times, states)):
            row = [repr(float(t))]
            for z in rho.reshape(-1):
                row += [repr(float(z.real)), repr(float(z.imag))]
            row += [repr(float(v[n])) if isinstance(v[n], (float, np.floating)) else str(v[n]) for v in extra.values()]
            w.writerow(row)
