"""End-to-end acceptance checks, one test per criterion.

Each test records one ``ACCEPTANCE <n> PASS|FAIL: <detail>`` line; the
lines are printed in the terminal summary (and immediately under ``-s``). Run directly with
``python3 tests/test_acceptance.py`` or through pytest.
"""
import math
import sys
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES

from hubogas import circuit as qc
from hubogas.analysis import FIGURES, ber_sweep, query_sweep, verify_census
from hubogas.gas import GasConfig, queries_to_reach, run_real_gas
from hubogas.mimo import (
    EXAMPLE_CHANNEL,
    Modulation,
    ThresholdPolicy,
    PolicyKind,
    build_mld_hubo,
    example_instance,
    lambert_w_m1,
    map_bits_to_symbols,
    proposed_threshold,
    simulate_channel,
    threshold_nu,
)
from hubogas.poly import HuboPolynomial, energy_table, evaluate, index_to_bits


@pytest.fixture
def report(request):
    def emit(n, ok, detail):
        line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
        request.config.stash.setdefault(ACCEPTANCE_LINES, []).append(line)
        print(line)
        assert ok, detail

    return emit


def test_criterion_1_small_grover_example(report):
    t0 = time.perf_counter()
    poly = HuboPolynomial(3, {(): 1.0, (0,): 1.0, (1, 2): -2.0})
    circ = qc.prepare(poly, 0.0, 3)
    joint = qc.joint_distribution(qc.grover_power(circ, 0), tol=1e-12)
    expected = {(index_to_bits(k, 3), int(evaluate(poly, index_to_bits(k, 3)))) for k in range(8)}
    uniform = set(joint) == expected and all(abs(p - 1 / 8) <= 1e-9 for p in joint.values())
    target = 0b011
    want = [math.sin((2 * L + 1) * math.asin(math.sqrt(1 / 8))) ** 2 for L in (1, 2)]
    got = [float(qc.key_marginal(qc.grover_power(circ, L))[target]) for L in (1, 2)]
    close = all(abs(g - w) <= 1e-6 for g, w in zip(got, want))
    elapsed = time.perf_counter() - t0
    ok = uniform and close and ((0, 1, 1), -1) in joint and elapsed < 1.0
    report(1, ok, f"L=0 uniform={uniform}; P(011) L=1 {got[0]:.6f} (want {want[0]:.6f}), "
                  f"L=2 {got[1]:.6f} (want {want[1]:.6f}); {elapsed:.3f}s")


def test_criterion_2_fejer_encoding(report):
    t0 = time.perf_counter()

    def prob(a, v):
        return abs(qc.fejer_amplitudes(a, 3)[v % 8]) ** 2

    sym = abs(prob(-2.5, -2) - prob(-2.5, -3))
    skew = prob(-2.3, -2) > prob(-2.3, -3)
    exact = all(abs(prob(a, a) - 1.0) <= 1e-12 for a in range(-4, 4))
    elapsed = time.perf_counter() - t0
    ok = sym <= 1e-12 and skew and exact and elapsed < 1.0
    report(2, ok, f"|P(-2)-P(-3)| at -2.5 = {sym:.1e}; P(-2)>P(-3) at -2.3: {skew}; "
                  f"integer single outcome: {exact}; {elapsed:.3f}s")


def test_criterion_3_real_valued_gas(report):
    t0 = time.perf_counter()
    poly = HuboPolynomial(4, {(): 1.0, (0,): 1.0, (1, 2, 3): -1.8})
    cfg = GasConfig(m=3)
    budget = 22.5 * math.sqrt(16)
    wins = 0
    for seed in range(500):
        trace = run_real_gas(poly, cfg, np.random.default_rng(seed))
        _, qd, reached = queries_to_reach(trace, (0, 1, 1, 1))
        wins += reached and qd <= budget and abs(trace.best_value + 0.8) <= 1e-9
    rate = wins / 500
    elapsed = time.perf_counter() - t0
    report(3, rate >= 0.99 and elapsed < 30, f"argmin 0111 at -0.8 on {rate:.1%} of 500 seeds; {elapsed:.1f}s")


def _direct_norms(inst, symbols):
    resid = inst.r[None, :] - symbols @ inst.H.T / math.sqrt(inst.n_t)
    return (resid.real ** 2 + resid.imag ** 2).sum(axis=1)


def test_criterion_4_hubo_exactness(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst, degrees = 0.0, {}
    for mod in Modulation:
        n = 2 * mod.bits_per_symbol
        symbols = np.array([map_bits_to_symbols(index_to_bits(k, n), mod) for k in range(1 << n)])
        for trial in range(200):
            inst = simulate_channel(2, 2, mod, 10.0 ** rng.uniform(0, 3), rng)
            poly = build_mld_hubo(inst)
            direct = _direct_norms(inst, symbols)
            worst = max(worst, float(np.max(np.abs(energy_table(poly) - direct))))
            if trial < 3:
                for k in rng.integers(0, 1 << n, size=16):
                    worst = max(worst, abs(evaluate(poly, index_to_bits(int(k), n)) - direct[k]))
            degrees[mod.value] = max(degrees.get(mod.value, 0), poly.degree)
    elapsed = time.perf_counter() - t0
    want = {"bpsk": 2, "qpsk": 2, "16qam": 4, "64qam": 6}
    ok = worst <= 1e-9 and degrees == want and elapsed < 300
    report(4, ok, f"max |HUBO - norm| {worst:.1e} over 4x200 instances; degrees {degrees}; {elapsed:.1f}s")


@pytest.mark.xfail(strict=True, reason="the coefficient is 1.2195..., which truncates to 1.21; see notes")
def test_criterion_5_worked_example_coefficient(report):
    t0 = time.perf_counter()
    poly = build_mld_hubo(example_instance())
    c = poly.coefficient((0, 2, 4, 6))
    truncated = math.floor(c * 100) / 100
    elapsed = time.perf_counter() - t0
    ok = abs(truncated - 1.22) < 1e-12 and elapsed < 1.0
    report(5, ok, f"coefficient of b0b2b4b6 = {c:.7f}; truncated {truncated:.2f}, "
                  f"nearest {round(c, 2):.2f}; want truncated 1.22; {elapsed:.3f}s")


def test_criterion_6_gate_census(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    checked = flagged = bad = 0
    for mod in Modulation:
        for n_t in (1, 2, 3):
            for m in (3, 5):
                for _ in range(3):
                    rep = verify_census(simulate_channel(n_t, 2, mod, 100.0, rng), m=m)
                    if rep.flagged:
                        flagged += 1
                        continue
                    checked += 1
                    bad += not rep.matches
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and checked > 0 and elapsed < 60
    report(6, ok, f"{checked - bad}/{checked} unflagged circuits match ({flagged} flagged); {elapsed:.1f}s")


def _min_objective_batch(rng, size, sigma2, symbols):
    cn = lambda *shape: (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)
    H = cn(size, 2, 2)
    tx = symbols[rng.integers(0, symbols.shape[0], size=size)]
    v = cn(size, 2)
    r = np.einsum("kij,kj->ki", H, tx) / math.sqrt(2) + math.sqrt(sigma2) * v
    cand = np.einsum("kij,cj->kci", H, symbols) / math.sqrt(2)
    resid = r[:, None, :] - cand
    return (resid.real ** 2 + resid.imag ** 2).sum(axis=2).min(axis=1)


def test_criterion_7_threshold_constants(report):
    t0 = time.perf_counter()
    nu3, nu4 = threshold_nu(1e-3), threshold_nu(1e-4)
    consts = abs(nu3 - 9.23) <= 0.01 and abs(nu4 - 11.8) <= 0.1
    z_ok = abs(lambert_w_m1(-1e-3 / math.e) + 1 + nu3) < 1e-12
    P, sigma2 = 1e-3, 10.0 ** -2
    y_tilde = proposed_threshold(sigma2, 2, P)
    symbols = np.array([map_bits_to_symbols(index_to_bits(k, 4), "qpsk") for k in range(16)])
    rng = np.random.default_rng(7)
    draws, above = 1_000_000, 0
    for _ in range(draws // 50_000):
        above += int(np.sum(_min_objective_batch(rng, 50_000, sigma2, symbols) > y_tilde))
    rate = above / draws
    elapsed = time.perf_counter() - t0
    ok = consts and z_ok and abs(rate - P) <= 0.2 * P and elapsed < 60
    report(7, ok, f"nu(1e-3)={nu3:.4f} nu(1e-4)={nu4:.4f}; Pr[y~ < E_min]={rate:.2e} "
                  f"over {draws} draws (P={P:g}); {elapsed:.1f}s")


def test_criterion_8_ber_equivalence(report):
    t0 = time.perf_counter()
    grid = [5.0, 10.0, 15.0, 20.0]
    sweep = ber_sweep(grid, ["mld", "hubo", "int:1", "int:20"], 25_000, 8, keep_decisions=True)
    identical = all(
        np.array_equal(sweep.decisions[(s, "mld")], sweep.decisions[(s, "hubo")]) for s in grid
    )
    bits = next(r.bits for r in sweep.records if r.snr_db == 20.0)
    b1, b20 = sweep.ber(20.0, "int:1"), sweep.ber(20.0, "int:20")
    elapsed = time.perf_counter() - t0
    ok = identical and b1 > b20 and bits >= 100_000 and elapsed < 600
    report(8, ok, f"HUBO==MLD decisions at {grid} dB: {identical}; BER@20dB int:1 {b1:.2e} > "
                  f"int:20 {b20:.2e} over {bits} bits; {elapsed:.1f}s")


def test_criterion_9_threshold_acceleration(report):
    t0 = time.perf_counter()
    scenario = FIGURES["11"]["scenario"]
    runs = {}
    for label, policy in [
        ("random", ThresholdPolicy(PolicyKind.RANDOM)),
        ("proposed(1e-4)", ThresholdPolicy(PolicyKind.PROPOSED, 1e-4)),
        ("combination(1e-4)", ThresholdPolicy(PolicyKind.COMBINATION, 1e-4)),
    ]:
        runs[label] = query_sweep(scenario, policy, 2000, 9, metric="ber").mean_cd_to_optimum()
    floor_run = query_sweep(scenario, ThresholdPolicy(PolicyKind.PROPOSED, 1e-3), 20_000, 90, metric="ber")
    floor = floor_run.final_ber()
    ordered = runs["combination(1e-4)"] <= runs["proposed(1e-4)"] < runs["random"]
    elapsed = time.perf_counter() - t0
    ok = ordered and 5e-4 <= floor <= 2e-3 and elapsed < 600
    cds = ", ".join(f"{k} {v:.2f}" for k, v in runs.items())
    report(9, ok, f"mean CD to optimum: {cds}; proposed(1e-3) BER floor {floor:.2e} "
                  f"over 20000 trials; {elapsed:.1f}s")


@pytest.mark.slow
def test_worked_example_channel_16qam_sweep_runs():
    res = query_sweep(FIGURES["9b"]["scenario"], ThresholdPolicy(PolicyKind.RANDOM), 5, 0)
    xs, ys = res.curve("QD")
    assert xs.shape == ys.shape and np.all(ys >= -1e-9)
    assert EXAMPLE_CHANNEL.shape == (2, 2)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
