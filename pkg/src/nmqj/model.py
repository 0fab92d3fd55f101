"""Time-local master equation models.

A model is a Hamiltonian H(t) plus decay channels (C_m, Delta_m(t)) with
constant jump operators and scalar, possibly negative, rates:

    d rho/dt = -i[H, rho] + sum_m Delta_m(t) (C rho C^+ - 1/2 {C^+ C, rho})
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .hilbert import as_operator, as_state, basis, is_hermitian


class ModelError(ValueError):
    pass


class RateEvaluationError(ArithmeticError):
    def __init__(self, t: float, message: str):
        super().__init__(f"rate evaluation failed at t={t!r}: {message}")
        self.t = t


def rate_split(delta: float) -> tuple[float, float]:
    """Positive and negative parts of a rate, both >= 0, exactly one nonzero."""
    if not math.isfinite(delta):
        raise ValueError(f"non-finite rate {delta!r}")
    if delta > 0:
        return float(delta), 0.0
    if delta < 0:
        return 0.0, float(-delta)
    return 0.0, 0.0


# -- rate functions ---------------------------------------------------------


@dataclass(frozen=True)
class ConstantRate:
    value: float

    def __call__(self, t: float) -> float:
        return self.value

    def to_json(self) -> dict:
        return {"kind": "constant", "value": float(self.value)}


@dataclass(frozen=True)
class TableRate:
    """Piecewise-linear rate, held constant outside the tabulated range."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ModelError("table rate needs equally many (>=1) times and values")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ModelError("table rate times must be strictly increasing")
        if not all(math.isfinite(x) for x in self.times + self.values):
            raise ModelError("table rate has non-finite entries")

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def to_json(self) -> dict:
        return {"kind": "table", "times": [float(x) for x in self.times],
                "values": [float(x) for x in self.values]}


@dataclass(frozen=True)
class JCLorentzianRate:
    """Exact decay rate of a two-level atom coupled to a Lorentzian reservoir.

    With a = lam - i*detuning and d = sqrt(a^2 - 2 gamma0 lam) the excited
    amplitude is c(t) = exp(-a t/2) [cosh(d t/2) + a/d sinh(d t/2)]; the rate
    is -2 Re(c'/c) and the Lamb shift -2 Im(c'/c). On resonance with
    lam < 2 gamma0, c(t) has real zeros where the rate has poles.
    """

    gamma0: float
    lam: float
    detuning: float = 0.0

    def __post_init__(self):
        if not (self.gamma0 > 0 and self.lam > 0):
            raise ModelError("jc_lorentzian needs gamma0 > 0 and lambda > 0")
        if not math.isfinite(self.detuning):
            raise ModelError("jc_lorentzian detuning must be finite")

    @cached_property
    def _a(self) -> complex:
        return complex(self.lam, -self.detuning)

    @cached_property
    def d(self) -> complex:
        return cmath.sqrt(self._a**2 - 2 * self.gamma0 * self.lam)

    def _parts(self, t: float) -> tuple[complex, complex, complex]:
        """(den, num, scale) with c = scale*den and c' = scale*(num - a/2 den)."""
        a, d = self._a, self.d
        if abs(d) < 1e-8 * abs(a):
            return 1 + a * t / 2, a / 2, cmath.exp(-a * t / 2)
        # factor exp(d t/2) out so nothing overflows (Re d >= 0)
        x = d * t / 2
        e = cmath.exp(-2 * x)
        ch, sh = (1 + e) / 2, (1 - e) / 2
        return ch + a / d * sh, d / 2 * sh + a / 2 * ch, cmath.exp(x - a * t / 2)

    def amplitude(self, t: float) -> complex:
        den, _, scale = self._parts(t)
        return scale * den

    def log_derivative(self, t: float) -> complex:
        """c'(t)/c(t)."""
        den, num, _ = self._parts(t)
        if abs(den) < 1e-12:
            raise RateEvaluationError(t, "pole of the jc_lorentzian rate (c(t) = 0)")
        return num / den - self._a / 2

    def __call__(self, t: float) -> float:
        return -2.0 * self.log_derivative(t).real

    def lamb_shift(self, t: float) -> float:
        return -2.0 * self.log_derivative(t).imag

    def to_json(self) -> dict:
        doc = {"kind": "jc_lorentzian", "gamma0": float(self.gamma0), "lambda": float(self.lam)}
        if self.detuning:
            doc["detuning"] = float(self.detuning)
        return doc


Rate = ConstantRate | TableRate | JCLorentzianRate


def rate_from_json(obj: dict) -> Rate:
    kind = obj.get("kind")
    try:
        if kind == "constant":
            return ConstantRate(float(obj["value"]))
        if kind == "table":
            return TableRate(tuple(map(float, obj["times"])), tuple(map(float, obj["values"])))
        if kind == "jc_lorentzian":
            return JCLorentzianRate(float(obj["gamma0"]), float(obj["lambda"]),
                                    float(obj.get("detuning", 0.0)))
    except KeyError as exc:
        raise ModelError(f"rate of kind {kind!r} is missing field {exc}") from None
    raise ModelError(f"unknown rate kind {kind!r}")


# -- model -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Channel:
    operator: np.ndarray
    rate: Rate

    @cached_property
    def cdc(self) -> np.ndarray:
        return self.operator.conj().T @ self.operator


@dataclass(frozen=True, eq=False)
class HamiltonianTable:
    """Operators at increasing times, linearly interpolated and clamped at the ends."""

    times: tuple[float, ...]
    operators: np.ndarray  # (n, dim, dim)

    def __call__(self, t: float) -> np.ndarray:
        ts = self.times
        if t <= ts[0]:
            return self.operators[0]
        if t >= ts[-1]:
            return self.operators[-1]
        i = int(np.searchsorted(ts, t, side="right")) - 1
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1 - w) * self.operators[i] + w * self.operators[i + 1]


@dataclass(frozen=True, eq=False)
class LambShift:
    """Adds S(t) * operator to H(t), S taken from a jc_lorentzian channel rate."""

    channel: int
    operator: np.ndarray


@dataclass(frozen=True, eq=False)
class MasterEquationModel:
    dim: int
    hamiltonian: np.ndarray | HamiltonianTable
    channels: tuple[Channel, ...]
    t_start: float = 0.0
    t_end: float = 1.0
    label: str = "model"
    initial_state: np.ndarray | None = None
    lamb_shift: LambShift | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        d = self.dim
        if not 2 <= d <= 64:
            raise ModelError(f"dimension {d} outside [2, 64]")
        if not self.t_end > self.t_start:
            raise ModelError("t_end must exceed t_start")
        hs = self.hamiltonian.operators if isinstance(self.hamiltonian, HamiltonianTable) else [self.hamiltonian]
        for h in hs:
            as_operator(h, d)
            if not is_hermitian(h):
                raise ModelError("Hamiltonian is not Hermitian")
        for m, ch in enumerate(self.channels):
            as_operator(ch.operator, d)
            if not np.any(ch.operator):
                raise ModelError(f"channel {m} has a zero operator")
        if self.initial_state is not None:
            as_state(self.initial_state, normalized=True)
            if self.initial_state.size != d:
                raise ModelError("initial state dimension mismatch")
        if self.lamb_shift is not None:
            ls = self.lamb_shift
            if not 0 <= ls.channel < len(self.channels):
                raise ModelError("lamb shift refers to a missing channel")
            if not isinstance(self.channels[ls.channel].rate, JCLorentzianRate):
                raise ModelError("lamb shift requires a jc_lorentzian channel rate")
            as_operator(ls.operator, d)
            if not is_hermitian(ls.operator):
                raise ModelError("lamb shift operator is not Hermitian")

    @property
    def psi0(self) -> np.ndarray:
        return basis(self.dim, 0) if self.initial_state is None else self.initial_state

    def hamiltonian_at(self, t: float) -> np.ndarray:
        h = self.hamiltonian(t) if isinstance(self.hamiltonian, HamiltonianTable) else self.hamiltonian
        if self.lamb_shift is not None:
            s = self.channels[self.lamb_shift.channel].rate.lamb_shift(t)
            h = h + s * self.lamb_shift.operator
        return h

    def rates(self, t: float) -> np.ndarray:
        out = np.empty(len(self.channels))
        for m, ch in enumerate(self.channels):
            r = ch.rate(t)
            if not math.isfinite(r):
                raise RateEvaluationError(t, f"channel {m} rate is {r!r}")
            out[m] = r
        return out


def generator_apply(model: MasterEquationModel, t: float, rho: np.ndarray,
                    rates: np.ndarray | None = None) -> np.ndarray:
    """d rho/dt under the model's generator at time t."""
    h = model.hamiltonian_at(t)
    if rates is None:
        rates = model.rates(t)
    out = -1j * (h @ rho - rho @ h)
    for delta, ch in zip(rates, model.channels):
        if delta == 0.0:
            continue
        c = ch.operator
        out += delta * (c @ rho @ c.conj().T - 0.5 * (ch.cdc @ rho + rho @ ch.cdc))
    return out


def drift_generator_apply(model: MasterEquationModel, t: float, psi: np.ndarray,
                          rates: np.ndarray | None = None) -> np.ndarray:
    """-i G(t)|psi> for the normalized drift, G = H - i/2 sum Delta (C^+C - <C^+C>).

    Expectation values are taken with respect to psi/|psi| so the field is
    well defined on slightly unnormalized Runge-Kutta stages.
    """
    if rates is None:
        rates = model.rates(t)
    out = -1j * (model.hamiltonian_at(t) @ psi)
    norm2 = float(np.vdot(psi, psi).real)
    for delta, ch in zip(rates, model.channels):
        if delta == 0.0:
            continue
        v = ch.cdc @ psi
        ev = float(np.vdot(psi, v).real) / norm2
        out -= 0.5 * delta * (v - ev * psi)
    return out


# -- JSON model files ---------------------------------------------------------


def _pair(z: complex) -> list[float]:
    # + 0.0 folds -0.0 into 0.0 so canonical output is unique
    return [float(z.real) + 0.0, float(z.imag) + 0.0]


def matrix_to_json(m: np.ndarray) -> list:
    return [[_pair(z) for z in row] for row in np.asarray(m, dtype=complex)]


def vector_to_json(v: np.ndarray) -> list:
    return [_pair(z) for z in np.asarray(v, dtype=complex)]


def _complex_array(obj) -> np.ndarray:
    a = np.asarray(obj, dtype=float)
    if a.shape[-1] != 2:
        raise ModelError("complex numbers must be [re, im] pairs")
    out = np.empty(a.shape[:-1], dtype=complex)
    out.real, out.imag = a[..., 0], a[..., 1]
    return out


def matrix_from_json(obj, dim: int) -> np.ndarray:
    m = _complex_array(obj)
    if m.ndim == 1:  # flat row-major
        if m.size != dim * dim:
            raise ModelError(f"flat matrix has {m.size} entries, expected {dim * dim}")
        m = m.reshape(dim, dim)
    if m.shape != (dim, dim):
        raise ModelError(f"matrix has shape {m.shape}, expected {(dim, dim)}")
    return m


def model_to_json(model: MasterEquationModel) -> dict:
    if isinstance(model.hamiltonian, HamiltonianTable):
        ham = {"kind": "table", "times": [float(t) for t in model.hamiltonian.times],
               "operators": [matrix_to_json(h) for h in model.hamiltonian.operators]}
    else:
        ham = matrix_to_json(model.hamiltonian)
    doc = {
        "label": model.label,
        "dim": model.dim,
        "hamiltonian": ham,
        "channels": [{"operator": matrix_to_json(ch.operator), "rate": ch.rate.to_json()}
                     for ch in model.channels],
        "t_start": float(model.t_start),
        "t_end": float(model.t_end),
    }
    if model.initial_state is not None:
        doc["initial_state"] = vector_to_json(model.initial_state)
    if model.lamb_shift is not None:
        doc["lamb_shift"] = {"channel": model.lamb_shift.channel,
                             "operator": matrix_to_json(model.lamb_shift.operator)}
    return doc


def model_from_json(doc: dict) -> MasterEquationModel:
    try:
        dim = int(doc["dim"])
        ham = doc["hamiltonian"]
        if isinstance(ham, dict):
            if ham.get("kind") != "table":
                raise ModelError(f"unknown hamiltonian kind {ham.get('kind')!r}")
            times = tuple(map(float, ham["times"]))
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ModelError("hamiltonian table times must be strictly increasing")
            ops = np.array([matrix_from_json(h, dim) for h in ham["operators"]])
            if len(ops) != len(times):
                raise ModelError("hamiltonian table times/operators length mismatch")
            hamiltonian = HamiltonianTable(times, ops)
        else:
            hamiltonian = matrix_from_json(ham, dim)
        channels = tuple(Channel(matrix_from_json(c["operator"], dim), rate_from_json(c["rate"]))
                         for c in doc["channels"])
        psi0 = doc.get("initial_state")
        ls = doc.get("lamb_shift")
        return MasterEquationModel(
            dim=dim,
            hamiltonian=hamiltonian,
            channels=channels,
            t_start=float(doc["t_start"]),
            t_end=float(doc["t_end"]),
            label=str(doc.get("label", "model")),
            initial_state=None if psi0 is None else _complex_array(psi0),
            lamb_shift=None if ls is None else LambShift(int(ls["channel"]), matrix_from_json(ls["operator"], dim)),
        )
    except KeyError as exc:
        raise ModelError(f"model document is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(str(exc)) from None


def canonical_json(model: MasterEquationModel) -> str:
    return json.dumps(model_to_json(model), sort_keys=True, separators=(",", ":")) + "\n"
