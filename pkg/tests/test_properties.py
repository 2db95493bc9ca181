"""Property-based checks of the invariants each module promises."""
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from hubogas import circuit as qc
from hubogas.gas import GasConfig, rotation_count_schedule, run_integer_gas, run_real_gas
from hubogas.mimo import (
    Modulation,
    build_mld_hubo,
    candidate_symbols,
    demap_symbols_to_bits,
    lambert_w_m1,
    map_bits_to_symbols,
    simulate_channel,
)
from hubogas.poly import (
    HuboPolynomial,
    ValueBounds,
    bounds,
    dumps,
    energy_table,
    evaluate,
    index_to_bits,
    loads,
    multiplied_integer_approximation,
    required_qubits_m,
)

coeff = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


@st.composite
def polynomials(draw, max_n=6, integer=False):
    n = draw(st.integers(min_value=1, max_value=max_n))
    mono = st.lists(st.integers(0, n - 1), max_size=min(n, 4)).map(lambda xs: tuple(sorted(set(xs))))
    c = st.integers(-6, 6).map(float) if integer else coeff
    terms = draw(st.lists(st.tuples(mono, c), max_size=10))
    return HuboPolynomial(n, terms)


@given(polynomials(), st.data())
def test_arithmetic_is_pointwise(p, data):
    q = data.draw(polynomials().filter(lambda q: True).map(lambda q: HuboPolynomial(p.n, [(tuple(i for i in m if i < p.n), c) for m, c in q])))
    for idx in range(1 << p.n):
        bits = index_to_bits(idx, p.n)
        a, b = evaluate(p, bits), evaluate(q, bits)
        assert math.isclose(evaluate(p + q, bits), a + b, abs_tol=1e-9)
        assert math.isclose(evaluate(p - q, bits), a - b, abs_tol=1e-9)
        assert math.isclose(evaluate(p * q, bits), a * b, rel_tol=1e-9, abs_tol=1e-7)


@given(polynomials())
def test_energy_table_agrees_with_evaluate(p):
    table = energy_table(p)
    for idx in range(1 << p.n):
        assert math.isclose(table[idx], evaluate(p, index_to_bits(idx, p.n)), abs_tol=1e-9)


@given(polynomials())
def test_text_round_trip(p):
    assert loads(dumps(p)) == p


@given(polynomials(), st.floats(0.5, 30))
def test_integer_approximation_is_integral(p, factor):
    q = multiplied_integer_approximation(p, factor)
    assert q.is_integral()
    for mono, c in p:
        assert abs(q.coefficient(mono) - c * factor) <= 0.5 + 1e-9


@given(st.floats(-1e3, 1e3), st.floats(0, 1e3))
def test_register_width_covers_range(lo, width):
    vb = ValueBounds(lo, lo + width)
    m = required_qubits_m(vb)
    half = 2.0 ** (m - 1)
    assert -half <= min(vb.e_min, -vb.span) and max(vb.e_max, vb.span) < half


@given(st.integers(1, 6), st.data())
def test_fejer_normalized(m, data):
    size = 1 << m
    a = data.draw(st.floats(-size / 2, size / 2, exclude_max=True))
    probs = np.abs(qc.fejer_amplitudes(a, m)) ** 2
    assert math.isclose(probs.sum(), 1.0, abs_tol=1e-9)
    if float(a).is_integer():
        assert math.isclose(probs[int(a) % size], 1.0, abs_tol=1e-9)


@settings(max_examples=25, deadline=None)
@given(polynomials(max_n=4), st.floats(-5, 5), st.integers(0, 4))
def test_grover_power_is_unitary(p, y, L):
    m = required_qubits_m(ValueBounds(min(bounds(p).e_min, y), max(bounds(p).e_max, y)))
    state = qc.grover_power(qc.prepare(p, y, m), L)
    assert math.isclose(state.norm(), 1.0, abs_tol=1e-9)


@given(st.floats(1, 64), st.integers(0, 2**32 - 1))
def test_rotation_count_in_range(k, seed):
    L = rotation_count_schedule(k, np.random.default_rng(seed))
    assert 0 <= L <= math.ceil(k - 1)


@settings(max_examples=30, deadline=None)
@given(polynomials(max_n=5), st.integers(0, 2**32 - 1), st.sampled_from(["statevector", "ideal"]))
def test_real_trace_invariants(p, seed, backend):
    trace = run_real_gas(p, GasConfig(backend=backend), np.random.default_rng(seed))
    ys = [trace.initial_threshold] + [r.y_i for r in trace.iterations]
    assert all(a >= b for a, b in zip(ys, ys[1:]))
    assert trace.qd_queries == sum(r.L for r in trace.iterations)
    assert trace.cd_queries == len(trace.iterations) + 1
    assert math.isclose(trace.best_value, evaluate(p, trace.best_bits), abs_tol=1e-9)
    assert trace.best_value >= energy_table(p).min() - 1e-9


@settings(max_examples=30, deadline=None)
@given(polynomials(max_n=5, integer=True), st.integers(0, 2**32 - 1))
def test_integer_trace_reads_true_values(p, seed):
    trace = run_integer_gas(p, GasConfig(), np.random.default_rng(seed))
    for rec in trace.iterations:
        assert math.isclose(rec.y_candidate, evaluate(p, rec.measured_bits), abs_tol=1e-9)


@given(st.sampled_from(list(Modulation)), st.data())
def test_map_demap_round_trip(mod, data):
    n_t = data.draw(st.integers(1, 4))
    bits = data.draw(st.lists(st.integers(0, 1), min_size=n_t * mod.bits_per_symbol, max_size=n_t * mod.bits_per_symbol))
    assert list(demap_symbols_to_bits(map_bits_to_symbols(bits, mod), mod)) == bits


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(list(Modulation)), st.integers(1, 3), st.integers(1, 3), st.floats(0.1, 1e3), st.integers(0, 2**32 - 1))
def test_hubo_equals_norm(mod, n_t, n_r, snr, seed):
    if n_t * mod.bits_per_symbol > 12:
        n_t = 12 // mod.bits_per_symbol
    inst = simulate_channel(n_t, n_r, mod, snr, np.random.default_rng(seed))
    table = energy_table(build_mld_hubo(inst))
    symbols, _ = candidate_symbols(mod, n_t)
    resid = inst.r[None, :] - symbols @ inst.H.T / math.sqrt(n_t)
    np.testing.assert_allclose(table, (np.abs(resid) ** 2).sum(axis=1), atol=1e-9)


@given(st.floats(-1 / math.e, -1e-300, exclude_min=True))
def test_lambert_inverse(z):
    w = lambert_w_m1(z)
    assert w <= -1
    assert math.isclose(w + math.log(-w), math.log(-z), rel_tol=1e-12, abs_tol=1e-9)
