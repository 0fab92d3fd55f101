"""Command line front end.

    nmqj models [--show NAME | --validate PATH]
    nmqj simulate  --builtin markov_ad --n 10000 --dt 1e-3 --seed 42 --out runs/ad
    nmqj integrate --builtin pv_toy --dt 1e-3 --out runs/pv
    nmqj compare   --builtin jc_lorentzian --n 10000 --out runs/jc

Exit codes: 0 ok, 2 invalid configuration, 3 process breakdown, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import registry
from .drift import IntegrationError
from .ensemble import RNG_ALGORITHM, P_MAX, SimulationResult, StepSizeError, simulate
from .hilbert import is_hermitian, projector, trace_distance
from .model import (
    MasterEquationModel,
    ModelError,
    RateEvaluationError,
    canonical_json,
    matrix_from_json,
    model_from_json,
)
from .oracle import (
    DensityTrajectory,
    TraceDriftError,
    integrate_master,
    positivity_monitor,
    write_density_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_BREAKDOWN, EXIT_NUMERICAL = 0, 2, 3, 4
NUMERICAL_ERRORS = (RateEvaluationError, IntegrationError, StepSizeError, TraceDriftError,
                    FloatingPointError)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: MasterEquationModel
    n: int = 10_000
    dt: float = 1e-3
    stride: int = 10
    seed: int = 0
    p_max: float = P_MAX
    observables: dict[str, np.ndarray] = field(default_factory=dict)

    def validate(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ConfigError(f"--n must be an integer >= 1, got {self.n!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"--dt must be positive, got {self.dt!r}")
        span = (self.model.t_end - self.model.t_start) / self.dt
        if abs(span - round(span)) > 1e-6 * max(1.0, span):
            raise ConfigError(f"dt={self.dt!r} does not divide the time span")
        if not (isinstance(self.stride, int) and self.stride >= 1):
            raise ConfigError(f"--stride must be an integer >= 1, got {self.stride!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not 0 < self.p_max <= 0.5:
            raise ConfigError(f"--p-max must lie in (0, 0.5], got {self.p_max!r}")
        for name, op in self.observables.items():
            if op.shape != (self.model.dim, self.model.dim) or not is_hermitian(op):
                raise ConfigError(f"observable {name!r} is not a Hermitian {self.model.dim}x{self.model.dim} matrix")
        return self


def _bool(text: str) -> bool:
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def load_model(path: str | None, builtin: str | None, lamb_shift: bool = False) -> MasterEquationModel:
    if (path is None) == (builtin is None):
        raise ConfigError("give exactly one of --model PATH or --builtin NAME")
    if builtin is not None:
        try:
            return registry.builtin(builtin, lamb_shift=lamb_shift)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model file {path}: {exc}") from None
    try:
        return model_from_json(doc)
    except ModelError as exc:
        raise ConfigError(f"invalid model file {path}: {exc}") from None


def build_config(args) -> RunConfig:
    """Merge an optional --config JSON file with command line flags (flags win)."""
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None

    def pick(name, default):
        val = getattr(args, name, None)
        return doc.get(name, default) if val is None else val

    model_path = args.model if args.model or args.builtin else doc.get("model")
    builtin = args.builtin if args.model or args.builtin else doc.get("builtin")
    model = load_model(model_path, builtin, bool(pick("lamb_shift", False)))
    obs = dict(registry.default_observables(model))
    try:
        for name, mat in doc.get("observables", {}).items():
            obs[name] = matrix_from_json(mat, model.dim)
    except (ModelError, ValueError) as exc:
        raise ConfigError(f"invalid observable: {exc}") from None
    try:
        cfg = RunConfig(model, n=int(pick("n", 10_000)), dt=float(pick("dt", 1e-3)),
                        stride=int(pick("stride", 10)), seed=int(pick("seed", 0)),
                        p_max=float(pick("p_max", P_MAX)), observables=obs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def _observable_columns(cfg: RunConfig, states) -> dict[str, list[float]]:
    return {f"obs_{name}": [float(np.trace(rho @ op).real) for rho in states]
            for name, op in cfg.observables.items()}


def run_simulation(cfg: RunConfig) -> SimulationResult:
    return simulate(cfg.model, cfg.n, cfg.dt, cfg.seed, cfg.stride, cfg.p_max)


def run_oracle(cfg: RunConfig) -> DensityTrajectory:
    return integrate_master(cfg.model, projector(cfg.model.psi0), cfg.dt, cfg.stride)


def write_simulation(cfg: RunConfig, res: SimulationResult, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    extra = _observable_columns(cfg, res.densities)
    extra["n_distinct_trajectories"] = res.n_distinct
    write_density_csv(out / "timeseries.csv", res.times, res.densities, extra)
    with open(out / "events.jsonl", "w") as fh:
        for ev in res.events:
            fh.write(json.dumps(ev.to_json()) + "\n")
        if res.breakdown is not None:
            fh.write(json.dumps(res.breakdown.to_json()) + "\n")
    summary = {
        "model": cfg.model.label,
        "status": "breakdown" if res.breakdown else "completed",
        "rng": RNG_ALGORITHM,
        "seed": cfg.seed,
        "n": cfg.n,
        "dt": cfg.dt,
        "stride": cfg.stride,
        "p_max": cfg.p_max,
        "steps": res.steps,
        "t_final": res.table.time,
        "n_events": len(res.events),
        "n_positive_jumps": sum(e.moved for e in res.events if e.kind == "positive"),
        "n_negative_jumps": sum(e.moved for e in res.events if e.kind == "negative"),
        "counts_conserved": all(t == cfg.n for t in res.totals),
        "n_trajectories": len(res.table.trajectories),
        "breakdown": None if res.breakdown is None else res.breakdown.to_json(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    res = run_simulation(cfg)
    summary = write_simulation(cfg, res, out)
    print(f"{summary['status']}: {summary['steps']} steps, {summary['n_events']} jump events -> {out}")
    if res.breakdown is not None:
        print(f"breakdown at t={res.breakdown.t!r}: {res.breakdown.message}", file=sys.stderr)
        return EXIT_BREAKDOWN
    return EXIT_OK


def cmd_integrate(cfg: RunConfig, out: Path) -> int:
    traj = run_oracle(cfg)
    rep = positivity_monitor(traj, cfg.model)
    out.mkdir(parents=True, exist_ok=True)
    extra = _observable_columns(cfg, traj.states)
    extra["lambda_min"] = list(traj.lambda_min())
    write_density_csv(out / "oracle.csv", traj.times, traj.states, extra)
    doc = {"model": cfg.model.label, "dt": cfg.dt, **rep.to_json()}
    (out / "positivity.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"violated={rep.violated} t0={rep.t0} slope_check={rep.slope_check} -> {out}")
    return EXIT_OK


def compare_runs(cfg: RunConfig, times, states_a, states_b) -> dict:
    n = min(len(states_a), len(states_b))
    dists = [trace_distance(a, b) for a, b in zip(states_a[:n], states_b[:n])]
    i = int(np.argmax(dists))
    obs = {name: max(abs(np.trace((a - b) @ op).real) for a, b in zip(states_a[:n], states_b[:n]))
           for name, op in cfg.observables.items()}
    return {"model": cfg.model.label, "n_times": n, "max_trace_distance": dists[i],
            "t_at_max": times[i], "observable_max_deviation": obs}


def cmd_compare(cfg: RunConfig, out: Path, self_compare: bool = False) -> int:
    oracle = run_oracle(cfg)
    if self_compare:
        other, breakdown = run_oracle(cfg).states, None
    else:
        res = run_simulation(cfg)
        other, breakdown = res.densities, res.breakdown
        if breakdown is not None:  # the final row sits at the breakdown time, off the output grid
            other = other[:-1]
    report = compare_runs(cfg, oracle.times, oracle.states, other)
    report.update({"mode": "oracle-vs-oracle" if self_compare else "simulator-vs-oracle",
                   "n": cfg.n, "dt": cfg.dt, "seed": cfg.seed, "rng": RNG_ALGORITHM,
                   "breakdown": None if breakdown is None else breakdown.to_json()})
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"max trace distance {report['max_trace_distance']:.3g} at t={report['t_at_max']} -> {out}")
    return EXIT_BREAKDOWN if breakdown is not None else EXIT_OK


def cmd_models(show: str | None = None, validate: str | None = None) -> int:
    if validate:
        sys.stdout.write(canonical_json(load_model(validate, None)))
    elif show:
        sys.stdout.write(canonical_json(load_model(None, show)))
    else:
        for name, (_, desc) in registry.BUILTINS.items():
            print(f"{name:14s} {desc}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmqj", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_opts = argparse.ArgumentParser(add_help=False)
    run_opts.add_argument("--model", metavar="PATH", help="model JSON file")
    run_opts.add_argument("--builtin", metavar="NAME", help="builtin model name")
    run_opts.add_argument("--config", metavar="PATH", help="JSON run configuration")
    run_opts.add_argument("--n", type=int, help="ensemble size")
    run_opts.add_argument("--dt", type=float, help="time step")
    run_opts.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    run_opts.add_argument("--stride", type=int, help="output every STRIDE steps")
    run_opts.add_argument("--p-max", dest="p_max", type=float, help="max jump probability per step")
    run_opts.add_argument("--lamb-shift", dest="lamb_shift", type=_bool, help="enable the Lamb shift term")
    run_opts.add_argument("--out", metavar="DIR", default="out", help="output directory")

    sub.add_parser("simulate", parents=[run_opts], help="run the jump-process ensemble")
    sub.add_parser("integrate", parents=[run_opts], help="integrate the master equation directly")
    cmp = sub.add_parser("compare", parents=[run_opts], help="simulator vs direct integration")
    cmp.add_argument("--self", dest="self_compare", action="store_true",
                     help="compare the integrator with itself")
    models = sub.add_parser("models", help="list builtin models")
    models.add_argument("--show", metavar="NAME", help="print a builtin as canonical JSON")
    models.add_argument("--validate", metavar="PATH", help="validate a model file, echo canonical JSON")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "models":
            return cmd_models(args.show, args.validate)
        cfg = build_config(args)
        out = Path(args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "integrate":
            return cmd_integrate(cfg, out)
        return cmd_compare(cfg, out, args.self_compare)
    except (ConfigError, ModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
