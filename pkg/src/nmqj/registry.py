"""Builtin models for the command line."""
from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .hilbert import SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Z, basis
from .model import (
    Channel,
    ConstantRate,
    JCLorentzianRate,
    LambShift,
    MasterEquationModel,
    TableRate,
    model_from_json,
)

ZERO2 = np.zeros((2, 2), dtype=complex)

# jc_lorentzian defaults: lambda = 0.3 gamma0 puts the reservoir in the strong
# coupling regime; the detuning keeps c(t) away from zero so the rate stays
# finite while still turning negative on t in (5.2, 7.6).
JC_GAMMA0 = 1.0
JC_LAMBDA = 0.3
JC_DETUNING = 0.3


def markov_ad(rate: float = 1.0) -> MasterEquationModel:
    return MasterEquationModel(2, ZERO2, (Channel(SIGMA_MINUS, ConstantRate(rate)),),
                               0.0, 5.0, "markov_ad")


def jc_lorentzian(gamma0: float = JC_GAMMA0, lam: float = JC_LAMBDA, detuning: float = JC_DETUNING,
                  lamb_shift: bool = False, t_end: float = 10.0, psi0=None) -> MasterEquationModel:
    ls = LambShift(0, 0.5 * SIGMA_PLUS @ SIGMA_MINUS) if lamb_shift else None
    return MasterEquationModel(2, ZERO2, (Channel(SIGMA_MINUS, JCLorentzianRate(gamma0, lam, detuning)),),
                               0.0, t_end, "jc_lorentzian",
                               None if psi0 is None else np.asarray(psi0, dtype=complex), ls)


def table_demo() -> MasterEquationModel:
    # edit the table to taste; the short negative dip keeps rho positive
    rate = TableRate((0.0, 1.0, 2.0, 2.5, 3.0, 4.0), (1.0, 0.6, 0.0, -0.3, 0.0, 0.5))
    return MasterEquationModel(2, 0.5 * SIGMA_Z, (Channel(SIGMA_MINUS, rate),), 0.0, 4.0, "table_demo")


def pv_toy() -> MasterEquationModel:
    text = resources.files("nmqj").joinpath("data/pv_toy.json").read_text()
    return model_from_json(json.loads(text))


BUILTINS = {
    "markov_ad": (markov_ad, "two-level amplitude damping, C = sigma_-, constant rate 1, t in [0, 5]"),
    "jc_lorentzian": (jc_lorentzian, "two-level atom in a detuned Lorentzian reservoir, exact "
                                     "time-dependent rate (gamma0=1, lambda=0.3, detuning=0.3), t in [0, 10]"),
    "table_demo": (table_demo, "two-level template with a piecewise-linear rate that dips below zero"),
    "pv_toy": (pv_toy, "two-level, channels sigma_- and sigma_x with tabulated rates; violates "
                       "positivity inside its time span"),
}


def builtin(name: str, lamb_shift: bool = False) -> MasterEquationModel:
    if name not in BUILTINS:
        raise KeyError(f"unknown builtin model {name!r}; choose from {sorted(BUILTINS)}")
    if name == "jc_lorentzian":
        return jc_lorentzian(lamb_shift=lamb_shift)
    return BUILTINS[name][0]()


def default_observables(model: MasterEquationModel) -> dict[str, np.ndarray]:
    if model.dim == 2:
        return {"p_excited": np.outer(basis(2, 0), basis(2, 0)), "sigma_x": SIGMA_X, "sigma_z": SIGMA_Z}
    return {f"pop{k}": np.outer(basis(model.dim, k), basis(model.dim, k)) for k in range(model.dim)}
