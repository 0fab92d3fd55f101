"""Jump rates and targets for positive and negative channels.

A positive channel k moves a member from |psi> to C_k|psi>/|C_k psi| at rate
Delta_k^+ <C_k^+ C_k>. A negative channel l reverses such a jump: a member in
the source state |psi> = C_l|psi'>/|C_l psi'| returns to the target |psi'> at
rate Delta_l^- (N'/N) <psi'|C_l^+ C_l|psi'>, with N and N' the occupation
counts of source and target.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .hilbert import expect
from .model import MasterEquationModel, rate_split

if TYPE_CHECKING:
    from .ensemble import TrajectoryTable

EPS_COL = 1e-9
EPS_RATE = 1e-12


class ClosedChannelError(ValueError):
    pass


@dataclass(frozen=True)
class ReversePair:
    channel: int
    source: int
    target: int
    per_member_rate: float


@dataclass(frozen=True)
class BreakdownCandidate:
    channel: int
    target: int
    t: float


def positive_rate(model: MasterEquationModel, t: float, k: int, psi: np.ndarray,
                  delta: float | None = None) -> float:
    if delta is None:
        delta = model.channels[k].rate(t)
    dplus, _ = rate_split(delta)
    ev = expect(model.channels[k].cdc, psi)
    if ev <= EPS_RATE:
        return 0.0
    return dplus * ev


def positive_jump_target(c: np.ndarray, psi: np.ndarray) -> np.ndarray:
    v = c @ psi
    norm = np.linalg.norm(v)
    if norm <= EPS_RATE:
        raise ClosedChannelError(f"|C psi| = {norm!r}: jump through a closed channel")
    return v / norm


def negative_rate(delta_minus: float, n_target: int, n_source: int, expect_target: float) -> float:
    if n_source < 1:
        raise ValueError("negative-channel rate with an empty source (process breakdown)")
    return delta_minus * (n_target / n_source) * expect_target


def collinear(a: np.ndarray, b: np.ndarray, eps: float = EPS_COL) -> bool:
    """True iff a and b agree up to norm and global phase within eps."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("collinearity test on a zero vector")
    return 1.0 - abs(np.vdot(a, b)) / (na * nb) <= eps


def resolve_reverse_pairs(table: TrajectoryTable, model: MasterEquationModel, t: float,
                          rates: np.ndarray | None = None,
                          ) -> tuple[list[ReversePair], list[BreakdownCandidate]]:
    """Match every occupied target of every open negative channel with an occupied source.

    Trajectories created by a jump from the target through the same channel
    are tried first; the remaining occupied trajectories are scanned in id order.
    """
    if rates is None:
        rates = model.rates(t)
    trajs = table.trajectories
    occupied = [tr for tr in trajs if tr.count > 0]
    children: dict[tuple[int, int], list[int]] = {}
    for tr in trajs:
        if tr.parent is not None:
            children.setdefault(tr.parent, []).append(tr.id)

    pairs, candidates = [], []
    for l, ch in enumerate(model.channels):
        _, dminus = rate_split(rates[l])
        if dminus == 0.0:
            continue
        for tgt in occupied:
            ev = expect(ch.cdc, tgt.state)
            if ev <= EPS_RATE:
                continue
            phi = ch.operator @ tgt.state
            source = None
            hinted = [trajs[i] for i in children.get((tgt.id, l), ())]
            for cand in hinted + occupied:
                if cand.count > 0 and collinear(cand.state, phi):
                    source = cand
                    break
            if source is None:
                candidates.append(BreakdownCandidate(l, tgt.id, t))
                continue
            pairs.append(ReversePair(l, source.id, tgt.id,
                                     negative_rate(dminus, tgt.count, source.count, ev)))
    return pairs, candidates
