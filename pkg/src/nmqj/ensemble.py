"""Ensemble simulation of the non-Markovian jump process.

The ensemble is stored as a table of distinct pure states with integer
occupation counts. One step samples jumps for every trajectory with
binomial draws (positive channels first, then reverse pairs, each member
jumping at most once), moves the counts, and drift-propagates every stored
state, occupied or not. A negative channel that is open while its source
state is unoccupied halts the process with a BreakdownEvent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .drift import drift_step
from .hilbert import as_state, projector
from .jumps import (
    BreakdownCandidate,
    ReversePair,
    collinear,
    positive_jump_target,
    positive_rate,
    resolve_reverse_pairs,
)
from .model import MasterEquationModel, generator_apply

P_MAX = 0.1
MAX_HALVINGS = 20
RNG_ALGORITHM = "numpy.random.PCG64"


class StepSizeError(ArithmeticError):
    pass


class BreakdownError(RuntimeError):
    pass


@dataclass
class Trajectory:
    id: int
    state: np.ndarray
    count: int
    parent: tuple[int, int] | None = None  # (source trajectory id, channel) of the creating jump


@dataclass
class TrajectoryTable:
    trajectories: list[Trajectory]
    total: int
    time: float

    def copy(self) -> TrajectoryTable:
        return TrajectoryTable([replace(tr) for tr in self.trajectories], self.total, self.time)

    @property
    def counts(self) -> list[int]:
        return [tr.count for tr in self.trajectories]

    def occupied(self) -> list[Trajectory]:
        return [tr for tr in self.trajectories if tr.count > 0]

    def check(self):
        if sum(self.counts) != self.total or any(c < 0 for c in self.counts):
            raise AssertionError(f"member count not conserved: {self.counts} vs N={self.total}")


@dataclass(frozen=True)
class JumpEvent:
    t: float
    kind: str  # "positive" | "negative"
    channel: int
    source: int
    target: int
    moved: int

    def to_json(self) -> dict:
        return {"t": self.t, "kind": self.kind, "channel": self.channel,
                "source": self.source, "target": self.target, "moved": self.moved}


@dataclass(frozen=True)
class BreakdownEvent:
    t: float
    channel: int
    target: int
    message: str

    def to_json(self) -> dict:
        return {"t": self.t, "kind": "breakdown", "channel": self.channel,
                "source": None, "target": self.target, "moved": 0, "message": self.message}


def init_ensemble(psi0, n: int, t0: float = 0.0) -> TrajectoryTable:
    psi0 = as_state(psi0, normalized=True)
    if n < 1:
        raise ValueError(f"ensemble size must be >= 1, got {n}")
    return TrajectoryTable([Trajectory(0, psi0 / np.linalg.norm(psi0), int(n))], int(n), float(t0))


def density_estimate(table: TrajectoryTable) -> np.ndarray:
    dim = table.trajectories[0].state.size
    rho = np.zeros((dim, dim), dtype=complex)
    for tr in table.trajectories:
        if tr.count:
            rho += tr.count * projector(tr.state)
    rho /= table.total
    rho = 0.5 * (rho + rho.conj().T)
    return rho / rho.trace().real


def _breakdown_event(cand: BreakdownCandidate, table: TrajectoryTable, rates) -> BreakdownEvent:
    tgt = table.trajectories[cand.target]
    return BreakdownEvent(
        cand.t, cand.channel, cand.target,
        f"negative channel {cand.channel} is open (rate {float(rates[cand.channel])!r}) and target "
        f"trajectory {cand.target} holds {tgt.count} members, but no occupied trajectory is in "
        f"the source state",
    )


def detect_breakdown(table: TrajectoryTable, model: MasterEquationModel, t: float) -> BreakdownEvent | None:
    rates = model.rates(t)
    _, cands = resolve_reverse_pairs(table, model, t, rates)
    return _breakdown_event(cands[0], table, rates) if cands else None


def _jump_options(table, model, t, rates, pairs: list[ReversePair]):
    """Per occupied trajectory: [(kind, channel, pair_target, rate)] in sampling order."""
    by_source: dict[int, list[ReversePair]] = {}
    for pr in pairs:
        by_source.setdefault(pr.source, []).append(pr)
    opts = {}
    for tr in table.trajectories:
        if tr.count == 0:
            continue
        lst = []
        for k in range(len(model.channels)):
            if rates[k] > 0:
                r = positive_rate(model, t, k, tr.state, rates[k])
                if r > 0:
                    lst.append(("positive", k, None, r))
        for pr in by_source.get(tr.id, ()):
            if pr.per_member_rate > 0:
                lst.append(("negative", pr.channel, pr.target, pr.per_member_rate))
        opts[tr.id] = lst
    return opts


def _merge_target(table: TrajectoryTable, src: int, k: int, state: np.ndarray) -> int:
    trajs = table.trajectories
    hinted = [tr for tr in trajs if tr.parent == (src, k)]
    for tr in hinted + trajs:
        if collinear(tr.state, state):
            return tr.id
    trajs.append(Trajectory(len(trajs), state, 0, (src, k)))
    return len(trajs) - 1


def _advance(table, model, dt, rng, p_max, depth, events) -> BreakdownEvent | None:
    t = table.time
    rates = model.rates(t)
    pairs, cands = resolve_reverse_pairs(table, model, t, rates)
    if cands:
        return _breakdown_event(cands[0], table, rates)

    opts = _jump_options(table, model, t, rates, pairs)
    worst = max((sum(o[3] for o in lst) * dt for lst in opts.values()), default=0.0)
    if worst > p_max:
        j = max(1, math.ceil(math.log2(worst / p_max)))
        if depth + j > MAX_HALVINGS:
            raise StepSizeError(f"jump probability {worst:.3g} at t={t!r} needs more than "
                                f"{MAX_HALVINGS} step halvings")
        n_sub = 2**j
        h = dt / n_sub
        for s in range(n_sub):
            table.time = t + s * h
            bd = _advance(table, model, h, rng, p_max, depth + j, events)
            if bd is not None:
                return bd
        table.time = t + dt
        return None

    # Sampling consumes the stream in table order, positive channels before pairs.
    moves = []
    for tr in table.trajectories:
        lst = opts.get(tr.id)
        if not lst:
            continue
        remaining, p_left = tr.count, 1.0
        for kind, ch, pair_target, r in lst:
            p = r * dt
            q = min(1.0, p / p_left) if p_left > 0 else 1.0
            n = int(rng.binomial(remaining, q)) if remaining > 0 else 0
            remaining -= n
            p_left -= p
            if n:
                moves.append((kind, ch, tr.id, pair_target, n))

    for kind, ch, src, pair_target, n in moves:
        if kind == "positive":
            state = positive_jump_target(model.channels[ch].operator, table.trajectories[src].state)
            dst = _merge_target(table, src, ch, state)
        else:
            dst = pair_target
        table.trajectories[src].count -= n
        table.trajectories[dst].count += n
        events.append(JumpEvent(t, kind, ch, src, dst, n))

    for tr in table.trajectories:
        tr.state = drift_step(model, t, dt, tr.state)
    table.time = t + dt
    return None


def step(table: TrajectoryTable, model: MasterEquationModel, dt: float, rng: np.random.Generator,
         p_max: float = P_MAX) -> tuple[TrajectoryTable, list[JumpEvent], BreakdownEvent | None]:
    """Advance the ensemble by dt.

    On breakdown the returned table stands at the breakdown time, unchanged by
    the (sub)step that detected it.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    new = table.copy()
    events: list[JumpEvent] = []
    bd = _advance(new, model, dt, rng, p_max, 0, events)
    new.check()
    return new, events, bd


def expected_step_discrepancy(table: TrajectoryTable, model: MasterEquationModel, dt: float) -> float:
    """Frobenius distance between the exact mean of one unsplit step and rho + dt L rho.

    Every jump outcome is enumerated with its probability; nothing is sampled.
    """
    t = table.time
    rates = model.rates(t)
    pairs, cands = resolve_reverse_pairs(table, model, t, rates)
    if cands:
        raise BreakdownError(f"breakdown candidate at t={t!r}: {cands[0]}")
    opts = _jump_options(table, model, t, rates, pairs)
    trajs = table.trajectories
    rho = density_estimate(table)
    mean = np.zeros_like(rho)

    def drifted(psi):
        return projector(drift_step(model, t, dt, psi))

    for tr in trajs:
        if tr.count == 0:
            continue
        w = tr.count / table.total
        stay = 1.0
        for kind, ch, pair_target, r in opts[tr.id]:
            p = r * dt
            stay -= p
            if kind == "positive":
                target = positive_jump_target(model.channels[ch].operator, tr.state)
            else:
                target = trajs[pair_target].state
            mean += w * p * drifted(target)
        mean += w * stay * drifted(tr.state)
    reference = rho + dt * generator_apply(model, t, rho, rates)
    return float(np.linalg.norm(mean - reference))


@dataclass
class SimulationResult:
    times: list[float]
    densities: list[np.ndarray]
    n_distinct: list[int]
    events: list[JumpEvent]
    breakdown: BreakdownEvent | None
    table: TrajectoryTable
    steps: int
    seed: int
    rng_algorithm: str = RNG_ALGORITHM
    totals: list[int] = field(default_factory=list)


def simulate(model: MasterEquationModel, n: int, dt: float, seed: int, stride: int = 1,
             p_max: float = P_MAX, psi0=None) -> SimulationResult:
    """Run the ensemble over the model's time span on the grid t_start + i*dt."""
    rng = np.random.Generator(np.random.PCG64(seed))
    table = init_ensemble(model.psi0 if psi0 is None else psi0, n, model.t_start)
    n_steps = int(round((model.t_end - model.t_start) / dt))
    res = SimulationResult([], [], [], [], None, table, 0, seed)

    def record(tab):
        res.times.append(tab.time)
        res.densities.append(density_estimate(tab))
        res.n_distinct.append(len(tab.occupied()))
        res.totals.append(sum(tab.counts))

    record(table)
    for i in range(n_steps):
        table, events, bd = step(table, model, dt, rng, p_max)
        res.events.extend(events)
        res.steps = i + 1
        if bd is not None:
            res.breakdown = bd
            table.time = bd.t
            record(table)
            break
        table.time = model.t_start + (i + 1) * dt
        if (i + 1) % stride == 0:
            record(table)
    res.table = table
    return res
