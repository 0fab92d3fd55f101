"""End-to-end acceptance checks.

Each test records a PASS/FAIL line in the terminal summary (see conftest) in
addition to asserting. Heavy runs are shared through module fixtures.
"""

import csv
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from nmqj.drift import propagate
from nmqj.ensemble import expected_step_discrepancy, simulate
from nmqj.hilbert import hermitian_eigen_min, projector
from nmqj.oracle import integrate_master, positivity_monitor
from nmqj.registry import jc_lorentzian, markov_ad, pv_toy

from conftest import ACCEPTANCE, occupied_model_and_table, random_density, random_model, random_state

N = 10_000
DT = 1e-3
SEED = 20261015


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    assert ok, detail


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def run_cli(out, *args):
    cmd = [sys.executable, "-m", "nmqj", "simulate", *args, "--out", str(out)]
    return subprocess.run(cmd, capture_output=True, text=True)


def csv_densities(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    dim = int(round(np.sqrt((len([k for k in rows[0] if k.startswith("re_rho_")])))))
    return [np.array([[complex(float(r[f"re_rho_{i}{j}"]), float(r[f"im_rho_{i}{j}"])) for j in range(dim)]
                      for i in range(dim)]) for r in rows]


@pytest.fixture(scope="module")
def markov_run():
    return timed(simulate, markov_ad(), N, DT, SEED, stride=1)


@pytest.fixture(scope="module")
def jc_run():
    m = jc_lorentzian()
    res, secs = timed(simulate, m, N, DT, SEED, stride=10)
    oracle = integrate_master(m, projector(m.psi0), DT, 10)
    return m, res, secs, oracle


@pytest.fixture(scope="module")
def pv_runs(tmp_path_factory):
    m = pv_toy()
    rep = positivity_monitor(integrate_master(m, projector(m.psi0), DT), m)
    out = tmp_path_factory.mktemp("pv")
    proc = run_cli(out, "--builtin", "pv_toy", "--n", str(N), "--dt", str(DT), "--stride", "1",
                   "--seed", str(SEED))
    res = simulate(m, N, DT, SEED, stride=1)
    return m, rep, proc, out, res


@pytest.fixture(scope="module")
def repeat_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("repeat")
    args = ("--builtin", "jc_lorentzian", "--n", str(N), "--dt", "0.01", "--stride", "1", "--seed", "7")
    procs = [run_cli(base / name, *args) for name in ("a", "b")]
    return base, procs


def test_1_markovian_limit(markov_run):
    res, secs = markov_run
    t = np.array(res.times)
    dev = np.abs(np.array([rho[0, 0].real for rho in res.densities]) - np.exp(-t))
    ok = dev.max() <= 0.02 and secs <= 60 and np.isclose(t[-1], 5.0) and len(t) == 5001
    record("1 markovian limit", ok,
           f"max |rho_ee - exp(-t)| = {dev.max():.4f} (<= 0.02) over {len(t)} outputs, runtime {secs:.1f}s (<= 60s)")


def test_2_generator_consistency():
    ratios = []
    for seed in range(24):
        rng = np.random.default_rng(1000 + seed)
        dim = int(rng.integers(2, 4))
        model, table = occupied_model_and_table(rng, dim, n_pos=int(rng.integers(1, 3)),
                                                n_neg=int(rng.integers(1, 3)))
        ratios.append(expected_step_discrepancy(table, model, 1e-3) / expected_step_discrepancy(table, model, 5e-4))
    ok = len(ratios) >= 20 and all(3.5 <= r <= 4.5 for r in ratios)
    record("2 generator consistency", ok,
           f"{len(ratios)} models, halving ratio in [{min(ratios):.4f}, {max(ratios):.4f}] (band [3.5, 4.5])")


def test_3_non_markovian_oracle_equivalence(jc_run):
    m, res, secs, oracle = jc_run
    rate = m.channels[0].rate
    assert np.allclose(res.times, oracle.times, atol=1e-12)
    dist = max(0.5 * np.abs(np.linalg.eigvalsh(a - b)).sum() for a, b in zip(res.densities, oracle.states))
    pop = max(abs(rho[0, 0].real - abs(rate.amplitude(t)) ** 2) for t, rho in zip(res.times, res.densities))
    negative = min(rate(t) for t in res.times) < 0
    ok = dist <= 0.03 and pop <= 0.02 and secs <= 300 and negative
    record("3 non-markovian oracle equivalence", ok,
           f"max trace distance {dist:.4f} (<= 0.03), max |rho_ee - |c|^2| {pop:.4f} (<= 0.02), "
           f"rate negative in span: {negative}, runtime {secs:.1f}s (<= 300s)")


def test_4_memory_effect_signature(jc_run):
    m, res, _, oracle = jc_run
    rate = m.channels[0].rate
    ts = np.array(oracle.times)
    pee = np.array([rho[0, 0].real for rho in oracle.states])
    # output intervals [t_i, t_i+1] with the rate negative throughout and the oracle population rising
    fine = [np.array([rate(s) for s in np.linspace(a, b, 11)]) for a, b in zip(ts[:-1], ts[1:])]
    revival = [(a, b) for (a, b), r, da in zip(zip(ts[:-1], ts[1:]), fine, np.diff(pee)) if r.max() < 0 and da > 0]
    neg = [ev for ev in res.events if ev.kind == "negative"]
    inside = sum(ev.moved for ev in neg if any(a <= ev.t <= b for a, b in revival))
    where_nonneg = sum(ev.moved for ev in neg if rate(ev.t) >= 0)
    ok = len(revival) > 0 and inside > 0 and where_nonneg == 0
    span = f"[{revival[0][0]:.2f}, {revival[-1][1]:.2f}]" if revival else "none"
    record("4 memory-effect signature", ok,
           f"revival intervals {span} ({len(revival)} outputs), reverse-jump members moved there {inside}, "
           f"where rate >= 0: {where_nonneg}")


def test_5_breakdown_matches_positivity_violation(pv_runs):
    m, rep, proc, out, res = pv_runs
    last = json.loads((out / "events.jsonl").read_text().splitlines()[-1])
    t0, tb = rep.t0, last["t"]
    # shape check against the in-process run with the same seed
    bd = res.breakdown
    k, target = bd.channel, bd.target
    c = m.channels[k].operator
    table = res.table
    tgt = next(tr for tr in table.trajectories if tr.id == target)
    open_channel = m.rates(bd.t)[k] < 0
    occupied_target = tgt.count > 0 and np.vdot(tgt.state, c.conj().T @ c @ tgt.state).real > 0

    def feeds(psi):
        img = c @ psi
        n = np.linalg.norm(img)
        return n > 1e-12 and abs(abs(np.vdot(img / n, tgt.state)) - 1) < 1e-9

    empty_source = not any(feeds(tr.state) for tr in table.trajectories if tr.count > 0)
    ok = (rep.violated and rep.slope_check < 0 and proc.returncode == 3 and last["kind"] == "breakdown"
          and tb <= t0 + 5 * DT and bd.t == tb and open_channel and occupied_target and empty_source)
    record("5 breakdown <-> positivity violation", ok,
           f"monitor t0 {t0:.5f} slope {rep.slope_check:.3f} (< 0); exit {proc.returncode} (3); "
           f"t_b {tb:.5f} <= t0 + 5dt = {t0 + 5 * DT:.5f}; open {open_channel}, target occupied "
           f"{occupied_target}, source empty {empty_source}")


def test_6_estimator_positivity(markov_run, jc_run, pv_runs, repeat_runs):
    states = list(markov_run[0].densities) + list(jc_run[1].densities) + list(pv_runs[4].densities)
    base, _ = repeat_runs
    states += csv_densities(base / "a" / "timeseries.csv") + csv_densities(pv_runs[3] / "timeseries.csv")
    tr = max(abs(np.trace(rho).real - 1) for rho in states)
    lam = min(hermitian_eigen_min(rho)[0] for rho in states)
    ok = tr <= 1e-12 and lam >= -1e-12
    record("6 estimator positivity", ok,
           f"{len(states)} estimates: max |tr - 1| {tr:.2e} (<= 1e-12), min eigenvalue {lam:.2e} (>= -1e-12)")


def test_7_conservation_and_reproducibility(markov_run, jc_run, pv_runs, repeat_runs):
    totals_ok = all(all(t == N for t in r.totals) for r in (markov_run[0], jc_run[1], pv_runs[4]))
    totals_ok &= all(tr.count >= 0 for r in (markov_run[0], jc_run[1], pv_runs[4]) for tr in r.table.trajectories)
    base, procs = repeat_runs
    summaries = [json.loads((base / n / "summary.json").read_text()) for n in ("a", "b")]
    totals_ok &= all(s["counts_conserved"] for s in summaries)
    same = all((base / "a" / f).read_bytes() == (base / "b" / f).read_bytes()
               for f in ("timeseries.csv", "events.jsonl", "summary.json"))
    ok = totals_ok and same and all(p.returncode == 0 for p in procs)
    record("7 count conservation and reproducibility", ok,
           f"counts conserved in every run: {totals_ok}; two invocations byte-identical: {same}")


def test_8_rk4_order():
    dt, t1 = 0.025, 1.0  # 0.05 is still pre-asymptotic for the stiffer draws
    drift, dens = [], []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(2, 5))
        m = random_model(rng, dim, n_channels=3, signs=[1.0, 1.0, 1.0], t_end=t1)
        psi = random_state(rng, dim)
        ref = propagate(m, psi, 0.0, t1, dt / 64)
        e = [np.linalg.norm(propagate(m, psi, 0.0, t1, h) - ref) for h in (dt, dt / 2)]
        drift.append(e[0] / e[1])
        rho = random_density(rng, dim)
        ref = integrate_master(m, rho, dt / 64, 64).states[-1]
        e = [np.linalg.norm(integrate_master(m, rho, h).states[-1] - ref) for h in (dt, dt / 2)]
        dens.append(e[0] / e[1])
    ok = all(14 <= r <= 18 for r in drift + dens)
    record("8 drift and integrator order", ok,
           f"drift ratio [{min(drift):.2f}, {max(drift):.2f}], integrator ratio [{min(dens):.2f}, {max(dens):.2f}] "
           f"(band [14, 18])")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
