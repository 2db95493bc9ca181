"""Command-line driver.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import circuit as qc
from .gas import GasConfig, run_integer_gas, run_real_gas, trace_to_csv
from .mimo import (
    MimoInstance,
    Modulation,
    PolicyKind,
    ThresholdPolicy,
    build_mld_hubo,
    db_to_linear,
    example_instance,
    initial_threshold,
    simulate_channel,
)
from .poly import HuboPolynomial, bounds, brute_force_min, dumps, loads, required_qubits_m
from .seeding import stream

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

DEMOS = {
    "fig2": ("integer", HuboPolynomial(3, {(): 1.0, (0,): 1.0, (1, 2): -2.0}), None),
    "fig5": ("real", HuboPolynomial(4, {(): 1.0, (0,): 1.0, (1, 2, 3): -1.8}), 3),
}


class ConfigError(Exception):
    pass


def _config(args: argparse.Namespace, drop=("out", "queries_out", "func")) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in drop}


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _policy(args) -> ThresholdPolicy:
    kind = {"mmse-based": "mmse"}.get(args.policy, args.policy)
    return ThresholdPolicy(PolicyKind(kind), args.p)


def _bits(bits) -> str:
    return "".join(str(int(b)) for b in bits)


# solve / trace --------------------------------------------------------------------

def _solve_setup(args):
    """Return (poly, mode, m, initial, instance)."""
    rng = stream(args.seed, "solve")
    if args.demo:
        if args.demo == "eq23":
            inst = example_instance()
            return build_mld_hubo(inst), "real", args.m or 5, None, inst
        if args.demo not in DEMOS:
            raise ConfigError(f"unknown demo {args.demo!r}")
        mode, poly, m = DEMOS[args.demo]
        return poly, mode, args.m or m, None, None
    if args.poly:
        poly = loads(Path(args.poly).read_text(encoding="utf-8"))
        return poly, args.mode, args.m, None, None
    if args.mimo:
        snr = math.inf if args.snr_db is None else db_to_linear(args.snr_db)
        inst = simulate_channel(args.nt, args.nr, args.mimo, snr, rng)
        poly = build_mld_hubo(inst)
        initial = initial_threshold(inst, _policy(args), rng, poly)
        return poly, "real", args.m, initial, inst
    raise ConfigError("one of --demo, --poly or --mimo is required")


def _run_solve(args):
    poly, mode, m, initial, inst = _solve_setup(args)
    if args.mode_override:
        mode = args.mode_override
    cfg = GasConfig(
        lam=args.lam,
        qd_budget_factor=args.budget,
        no_improvement_limit=None if args.limit <= 0 else args.limit,
        rng_seed=args.seed,
        m=m,
        backend=args.backend,
    )
    rng = stream(args.seed, "gas")
    runner = run_integer_gas if mode == "integer" else run_real_gas
    trace = runner(poly, cfg, rng, initial)
    return poly, trace, inst


def cmd_solve(args) -> int:
    poly, trace, inst = _run_solve(args)
    header = an.csv_header(_config(args))
    if args.out:
        _emit(trace_to_csv(trace, header), args.out)
    print(f"best_bits {_bits(trace.best_bits)}")
    print(f"best_value {trace.best_value!r}")
    print(f"cd_queries {trace.cd_queries}")
    print(f"qd_queries {trace.qd_queries}")
    print(f"terminated_by {trace.terminated_by}")
    if inst is not None and poly.n <= 24:
        ref_bits, ref_val = brute_force_min(poly)
        errors = int(np.sum(np.array(trace.best_bits) != inst.tx_bits))
        print(f"bruteforce_bits {_bits(ref_bits)}")
        print(f"bruteforce_value {ref_val!r}")
        print(f"bit_errors {errors}")
    return EXIT_OK


def cmd_trace(args) -> int:
    if args.circuit or args.amplitudes is not None:
        poly, _, m, _, _ = _solve_setup(args)
        if m is None:
            m = required_qubits_m(bounds(poly))
        circ = qc.prepare(poly, args.y, m)
        if args.circuit:
            _emit(qc.dump_circuit(circ), args.out)
        else:
            _emit(qc.dump_amplitudes(qc.grover_power(circ, args.amplitudes), tol=1e-15), args.out)
        return EXIT_OK
    _, trace, _ = _run_solve(args)
    _emit(trace_to_csv(trace, an.csv_header(_config(args))), args.out)
    return EXIT_OK


# fejer ------------------------------------------------------------------------------

def cmd_fejer(args) -> int:
    probs = np.abs(qc.fejer_amplitudes(args.a, args.m)) ** 2
    size = 1 << args.m
    rows = sorted((qc.signed_value(level, args.m), probs[level]) for level in range(size))
    lines = [f"{value} {p:.12f}" for value, p in rows]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# gate-count -------------------------------------------------------------------------

def cmd_gate_count(args) -> int:
    reports = []
    if args.example:
        reports.append(("example", an.verify_census(example_instance(), m=args.m)))
    else:
        for t in range(args.instances):
            inst = simulate_channel(args.nt, args.nr, args.modulation, 10.0, stream(args.seed, "gates", t))
            reports.append((f"trial{t}", an.verify_census(inst, m=args.m)))
    _emit(an.gates_csv(reports, _config(args)), args.out)
    bad = [label for label, rep in reports if not rep.ok]
    flagged = sum(rep.flagged for _, rep in reports)
    print(f"# {len(reports)} instances, {flagged} flagged, {len(bad)} mismatched", file=sys.stderr)
    return EXIT_NUMERIC if bad else EXIT_OK


# ber / sweep ---------------------------------------------------------------------------

def cmd_ber(args) -> int:
    if args.preset == "fig7":
        snrs, dets = an.BER_PRESET["snr_grid_db"], an.BER_PRESET["detectors"]
    else:
        snrs, dets = args.snr_db, args.detectors
    sweep = an.ber_sweep(
        snrs, dets, args.trials, args.seed, modulation=args.modulation, n_t=args.nt, n_r=args.nr,
        min_errors=args.min_errors, workers=args.workers,
    )
    _emit(an.ber_csv(sweep, _config(args)), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    overrides = {}
    if args.backend:
        overrides["backend"] = args.backend
    if args.fig:
        results = an.run_figure(args.fig, args.trials, args.seed, workers=args.workers, **overrides)
        flat = [res for key in sorted(results) for res in results[key]]
    else:
        scenario = an.Scenario(
            modulation=args.modulation, n_t=args.nt, n_r=args.nr, snr_db=args.snr_db,
            mode=args.mode, factor=args.factor, m=args.m, backend=args.backend or "statevector",
        )
        flat = [an.query_sweep(scenario, _policy(args), args.trials, args.seed, metric=args.metric, workers=args.workers)]
    cfg = _config(args)
    _emit(an.sweep_csv(flat, cfg), args.out)
    if args.queries_out:
        _emit(an.queries_csv(flat, cfg), args.queries_out)
    for res in flat:
        print(
            f"# {res.label}: mean_cd_to_opt={res.mean_cd_to_optimum():.3f} "
            f"mean_qd_to_opt={res.mean_qd_to_optimum():.3f} reached={res.success_rate():.4f} "
            f"final_ber={res.final_ber():.3e}",
            file=sys.stderr,
        )
    return EXIT_OK


# instance ------------------------------------------------------------------------------

def cmd_instance(args) -> int:
    if args.action == "gen":
        if args.example:
            inst = example_instance()
        else:
            snr = math.inf if args.snr_db is None else db_to_linear(args.snr_db)
            inst = simulate_channel(args.nt, args.nr, args.modulation, snr, stream(args.seed, "instance"))
        _emit(inst.to_json() + "\n", args.out)
        return EXIT_OK
    if not args.file:
        raise ConfigError("instance load needs a file")
    inst = MimoInstance.from_json(Path(args.file).read_text(encoding="utf-8"))
    poly = build_mld_hubo(inst)
    text = [f"# n_t={inst.n_t} n_r={inst.n_r} modulation={inst.modulation.value} n={inst.n} sigma2={inst.sigma2!r}"]
    if inst.n <= 24:
        bits, val = brute_force_min(poly)
        text.append(f"# argmin {_bits(bits)} value {val!r} tx {_bits(inst.tx_bits)}")
    _emit("\n".join(text) + "\n" + dumps(poly), args.out)
    return EXIT_OK


# parser ------------------------------------------------------------------------------------

def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _csv_strings(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("problem")
    src.add_argument("--demo", choices=["fig2", "fig5", "eq23"])
    src.add_argument("--poly", help="polynomial file (lines 'coeff i j ...', optional 'n N' header)")
    src.add_argument("--mimo", type=str.lower, choices=[m.value for m in Modulation], help="generate a MIMO instance")
    src.add_argument("--nt", type=int, default=2)
    src.add_argument("--nr", type=int, default=2)
    src.add_argument("--snr-db", type=float, default=None)
    src.add_argument("--policy", default="random", choices=["random", "mmse", "mmse-based", "proposed", "combination"])
    src.add_argument("--p", type=float, default=None, help="P for proposed/combination thresholds")
    src.add_argument("--mode", default="real", choices=["integer", "real"], help="mode for --poly input")
    src.add_argument("--force-mode", dest="mode_override", choices=["integer", "real"], default=None)
    src.add_argument("--m", type=int, default=None, help="value-register width (default: from bounds)")
    run = p.add_argument_group("gas")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--lam", type=float, default=8.0 / 7.0)
    run.add_argument("--budget", type=float, default=22.5, help="QD budget factor applied to sqrt(2^n)")
    run.add_argument("--limit", type=int, default=20, help="consecutive non-improvements (<=0 disables)")
    run.add_argument("--backend", default="statevector", choices=["statevector", "ideal"])
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hubogas", description="Grover adaptive search for real-valued HUBO")
    parser.add_argument("--version", action="version", version=f"hubogas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run GAS on a demo, polynomial file or MIMO instance")
    _add_problem_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("trace", help="write a GAS trace CSV, a circuit listing or amplitudes")
    _add_problem_args(p)
    p.add_argument("--circuit", action="store_true", help="dump the A_y ladder listing instead")
    p.add_argument("--amplitudes", type=int, default=None, metavar="L", help="dump G^L A_y|0> amplitudes")
    p.add_argument("--y", type=float, default=0.0, help="threshold for --circuit/--amplitudes")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("fejer", help="value-register distribution for a real number")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fejer)

    p = sub.add_parser("gate-count", help="emitted versus closed-form gate counts")
    p.add_argument("--modulation", type=str.lower, default="qpsk", choices=[m.value for m in Modulation])
    p.add_argument("--nt", type=int, default=2)
    p.add_argument("--nr", type=int, default=2)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--example", action="store_true", help="use the fixed 16-QAM example channel")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gate_count)

    p = sub.add_parser("ber", help="Monte-Carlo BER of classical detectors and HUBO minimizers")
    p.add_argument("--preset", choices=["fig7"], default=None)
    p.add_argument("--snr-db", type=_csv_floats, default=[0.0, 5.0, 10.0, 15.0, 20.0])
    p.add_argument("--detectors", type=_csv_strings, default=["zf", "mmse", "mld", "hubo"])
    p.add_argument("--modulation", type=str.lower, default="qpsk", choices=[m.value for m in Modulation])
    p.add_argument("--nt", type=int, default=2)
    p.add_argument("--nr", type=int, default=2)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--min-errors", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser("sweep", help="best-so-far curves against CD and QD query counts")
    p.add_argument("--fig", default=None, help="preset: 8, 8a, 8b, 9, 9a, 9b, 10, 11, 12")
    p.add_argument("--modulation", type=str.lower, default="qpsk", choices=[m.value for m in Modulation])
    p.add_argument("--nt", type=int, default=2)
    p.add_argument("--nr", type=int, default=2)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--policy", default="random", choices=["random", "mmse", "mmse-based", "proposed", "combination"])
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--mode", default="real", choices=["integer", "real"])
    p.add_argument("--factor", type=float, default=1.0)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--metric", default="objective", choices=["objective", "ber"])
    p.add_argument("--backend", default=None, choices=["statevector", "ideal"])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--queries-out", default=None, help="per-trial queries-to-optimum CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("instance", help="generate or inspect MIMO instance files")
    p.add_argument("action", choices=["gen", "load"])
    p.add_argument("file", nargs="?", default=None)
    p.add_argument("--modulation", type=str.lower, default="qpsk", choices=[m.value for m in Modulation])
    p.add_argument("--nt", type=int, default=2)
    p.add_argument("--nr", type=int, default=2)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--example", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_instance)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    # LinAlgError derives from ValueError, so it has to be caught first
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
