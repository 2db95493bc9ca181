"""Compare the compiled and numpy kernel backends.

Times each hot kernel in isolation, then a full statevector GAS run and a
BER point, under every available backend. Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import math
import timeit

import numpy as np

from hubogas import _kernels
from hubogas.analysis import ber_sweep
from hubogas.gas import GasConfig, run_real_gas
from hubogas.mimo import build_mld_hubo, candidate_symbols, example_instance, simulate_channel


def kernel_cases(rng):
    n, m, terms = 12, 6, 200
    masks = rng.integers(0, 1 << n, size=terms).astype(np.int64)
    thetas = rng.normal(size=terms)
    amps = (rng.normal(size=1 << (n + m)) + 1j * rng.normal(size=1 << (n + m))).astype(np.complex128)
    amps /= np.linalg.norm(amps)
    grid_shape = (1 << n, 1 << m)
    phases = rng.normal(size=1 << n)
    inst = simulate_channel(2, 2, "64qam", 100.0, rng)
    symbols, _ = candidate_symbols(inst.modulation, 2)
    heff = inst.H / math.sqrt(2)

    def grid():
        return amps.copy().reshape(grid_shape)

    return {
        "subset_sum_table n=12, 200 terms": lambda k: k.subset_sum_table(n, masks, thetas),
        "fwht 18 qubits": lambda k: k.fwht(amps.copy()),
        "controlled_phase_ladder": lambda k: k.controlled_phase_ladder(grid(), int(masks[0]), 0.3),
        "apply_key_phases": lambda k: k.apply_key_phases(grid(), phases, 1.0),
        "flip_negative_values": lambda k: k.flip_negative_values(grid()),
        "residual_norms 64-QAM 2x2": lambda k: k.residual_norms(heff, inst.r, symbols),
    }


def end_to_end_cases():
    poly = build_mld_hubo(example_instance())
    cfg = GasConfig(m=5)

    def gas():
        for seed in range(3):
            run_real_gas(poly, cfg, np.random.default_rng(seed))

    def ber():
        ber_sweep([15.0], ["mld"], 2000, 0)

    return {"real GAS, 16-QAM worked example (3 runs)": gas, "MLD BER point (2000 trials)": ber}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = _kernels.available()
    original = _kernels.BACKEND
    rows = []
    cases = kernel_cases(np.random.default_rng(0))
    for name, fn in cases.items():
        times = {}
        for b in backends:
            impl = _kernels.get(b)
            times[b] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
        rows.append((name, times))
    for name, fn in end_to_end_cases().items():
        times = {}
        for b in backends:
            _kernels.use(b)
            times[b] = min(timeit.repeat(fn, number=1, repeat=max(1, args.repeat // 2)))
        rows.append((name, times))
    _kernels.use(original)

    head = f"{'case':44s}" + "".join(f"{b:>12s}" for b in backends)
    if "cython" in backends:
        head += f"{'speedup':>10s}"
    print(head)
    for name, times in rows:
        line = f"{name:44s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
        if "cython" in backends:
            line += f"{times['python'] / times['cython']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
