"""Gate accounting, query-complexity sweeps and BER Monte-Carlo.

Everything here is deterministic given a master seed: trial ``t`` always
draws from :func:`hubogas.seeding.stream` with the same keys, so results do
not depend on how trials are split across worker processes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from functools import lru_cache, partial
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .circuit import PreparedCircuit, prepare
from .gas import GasConfig, best_so_far, queries_to_reach, run_integer_gas, run_real_gas
from .mimo import (
    EXAMPLE_CHANNEL,
    MimoInstance,
    Modulation,
    PolicyKind,
    ThresholdPolicy,
    build_mld_hubo,
    db_to_linear,
    erlang_min_cdf,
    initial_threshold,
    mld_detect,
    mmse_detect,
    proposed_threshold,
    simulate_channel,
    zf_detect,
)
from .poly import (
    HuboPolynomial,
    bits_to_index,
    bounds,
    brute_force_min,
    energy_table,
    evaluate,
    index_to_bits,
    multiplied_integer_approximation,
    required_qubits_m,
)
from .seeding import seed_from, stream

MAX_CONTROLS = 6


# gate census ---------------------------------------------------------------------

@dataclass(frozen=True)
class GateCensus:
    """Gate counts by class. ``controlled[c - 1]`` holds the c-CR count."""

    H: int = 0
    R: int = 0
    controlled: tuple[int, ...] = (0,) * MAX_CONTROLS
    IQFT: int = 0
    Z: int = 0
    D: int = 0

    def __post_init__(self):
        ctrl = tuple(int(c) for c in self.controlled)
        if len(ctrl) < MAX_CONTROLS:
            ctrl = ctrl + (0,) * (MAX_CONTROLS - len(ctrl))
        object.__setattr__(self, "controlled", ctrl)
        if min((self.H, self.R, self.IQFT, self.Z, self.D) + ctrl) < 0:
            raise ValueError("gate counts must be non-negative")

    def cr(self, c: int) -> int:
        return self.controlled[c - 1] if 1 <= c <= len(self.controlled) else 0

    def rows(self) -> list[tuple[str, int]]:
        out = [("H", self.H), ("R", self.R)]
        out += [(f"{c}-CR", n) for c, n in enumerate(self.controlled, 1)]
        out += [("IQFT", self.IQFT)]
        if self.Z or self.D:
            out += [("Z", self.Z), ("D", self.D)]
        return out

    def as_dict(self) -> dict[str, int]:
        return dict(self.rows())

    def elementary_estimate(self, m: int) -> int:
        """Rough elementary-gate figure: ``c`` per c-CR plus ``m**2`` per IQFT."""
        base = self.H + self.R + self.Z
        ctrl = sum(c * n for c, n in enumerate(self.controlled, 1))
        return base + ctrl + self.IQFT * m * m


def census_circuit(circ: PreparedCircuit) -> GateCensus:
    """Count the gates :func:`hubogas.circuit.prepare` emitted for ``A_y``.

    Each ladder is ``m`` phase gates, each carrying the ladder's controls.
    """
    m = circ.m
    width = max([MAX_CONTROLS] + [len(r.controls) for r in circ.rotations])
    ctrl = [0] * width
    uncontrolled = 0
    for rot in circ.rotations:
        c = len(rot.controls)
        if c == 0:
            uncontrolled += m
        else:
            ctrl[c - 1] += m
    return GateCensus(H=circ.n + m, R=uncontrolled, controlled=tuple(ctrl), IQFT=1)


def _exact(value: Fraction, what: str) -> int:
    if value.denominator != 1:
        raise ValueError(f"{what} is not an integer ({value})")
    return int(value)


def predicted_census(modulation: "Modulation | str", n: int, m: int) -> GateCensus:
    """Closed-form gate counts for ``A_y`` on a generic MIMO channel."""
    modulation = Modulation.parse(modulation)
    q = modulation.bits_per_symbol
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if n % q:
        raise ValueError(f"n={n} is not a multiple of {q} bits per {modulation.value} symbol")
    N, M = Fraction(n), Fraction(m)
    if modulation is Modulation.BPSK:
        terms = [N * M, N * (N - 1) * M / 2]
    elif modulation is Modulation.QPSK:
        terms = [N * M, N * (N - 2) * M / 2]
    elif modulation is Modulation.QAM16:
        terms = [N * M, N * (N - 3) * M / 2, N * (N - 4) * M / 2, N * (N - 4) * M / 8]
    else:
        terms = [
            N * M,
            N * (N - 4) * M / 2,
            N * (N - 6) * M + N * M / 3,
            5 * N * (N - 6) * M / 6,
            N * (N - 6) * M / 3,
            N * (N - 6) * M / 18,
        ]
    ctrl = tuple(_exact(t, f"{c}-CR count") for c, t in enumerate(terms, 1))
    return GateCensus(H=n + m, R=m, controlled=ctrl, IQFT=1)


@lru_cache(maxsize=None)
def _generic_support(modulation: Modulation, n_t: int, n_r: int) -> frozenset:
    rng = np.random.default_rng(12345)
    inst = simulate_channel(n_t, n_r, modulation, 10.0, rng)
    return frozenset(mono for mono, _ in build_mld_hubo(inst))


@dataclass
class CensusReport:
    predicted: GateCensus
    measured: GateCensus
    flagged: bool
    missing_terms: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def matches(self) -> bool:
        return self.predicted == self.measured

    @property
    def ok(self) -> bool:
        """Matching, or excused because coefficients cancelled."""
        return self.matches or self.flagged

    def rows(self) -> list[tuple[str, int, int]]:
        meas = self.measured.as_dict()
        return [(name, pred, meas.get(name, 0)) for name, pred in self.predicted.rows()]


def verify_census(instance: MimoInstance, m: int | None = None, y: float = 0.0) -> CensusReport:
    """Compare the emitted ``A_y`` gates with the closed-form prediction.

    A coefficient that cancels to zero on this particular channel removes a
    ladder; such instances are flagged rather than failed.
    """
    poly = build_mld_hubo(instance)
    if m is None:
        m = required_qubits_m(bounds(poly))
    circ = prepare(poly, y, m)
    measured = census_circuit(circ)
    predicted = predicted_census(instance.modulation, instance.n, m)
    support = _generic_support(instance.modulation, instance.n_t, instance.n_r)
    present = {mono for mono, _ in (poly - y)}
    missing = sorted(support - present, key=lambda mono: (len(mono), mono))
    return CensusReport(predicted, measured, bool(missing), missing)


def full_circuit_gate_totals(census: GateCensus, L: int) -> GateCensus:
    """Gates in ``G^L A_y``: ``2L+1`` copies of ``A_y`` plus ``L`` oracles and diffusions."""
    if L < 0:
        raise ValueError("L must be non-negative")
    k = 2 * L + 1
    return GateCensus(
        H=k * census.H,
        R=k * census.R,
        controlled=tuple(k * c for c in census.controlled),
        IQFT=k * census.IQFT,
        Z=census.Z + L,
        D=census.D + L,
    )


# experiment plumbing ---------------------------------------------------------------

def fingerprint(config: dict) -> str:
    """Short sha256 of a canonical JSON rendering of ``config``."""
    blob = json.dumps(config, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def csv_header(config: dict) -> str:
    return f"# hubogas {__version__} config={fingerprint(config)}"


def _write_csv(header: str, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _map_trials(fn, indices: Sequence[int], workers: int):
    if workers <= 1 or len(indices) < 2:
        return [fn(t) for t in indices]
    chunk = max(1, len(indices) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices, chunksize=chunk))


# query sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """A GAS-on-MIMO experiment.

    ``snr_db=None`` means a noiseless receive. ``channel="example"`` pins the 2x2
    worked-example channel; ``fixed_bits`` pins the transmit bits. In
    ``mode="integer"`` the objective is scaled by ``factor`` and rounded.
    """

    modulation: str = "qpsk"
    n_t: int = 2
    n_r: int = 2
    snr_db: float | None = 20.0
    channel: str = "random"
    fixed_bits: tuple[int, ...] | None = None
    mode: str = "real"
    factor: float = 1.0
    rounding: str = "nearest"
    m: int | None = None
    backend: str = "statevector"
    no_improvement_limit: int | None = 20
    qd_budget_factor: float = 22.5

    def __post_init__(self):
        Modulation.parse(self.modulation)
        if self.mode not in ("real", "integer"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.channel not in ("random", "example"):
            raise ValueError(f"unknown channel {self.channel!r}")
        if self.channel == "example" and (self.n_t, self.n_r) != (2, 2):
            raise ValueError("the example channel is 2x2")

    @property
    def snr(self) -> float:
        return math.inf if self.snr_db is None else db_to_linear(self.snr_db)

    def instance(self, rng: np.random.Generator) -> MimoInstance:
        H = EXAMPLE_CHANNEL if self.channel == "example" else None
        return simulate_channel(self.n_t, self.n_r, self.modulation, self.snr, rng, H=H, tx_bits=self.fixed_bits)

    def gas_config(self) -> GasConfig:
        return GasConfig(
            qd_budget_factor=self.qd_budget_factor,
            no_improvement_limit=self.no_improvement_limit,
            m=self.m,
            backend=self.backend,
        )


@dataclass(frozen=True)
class SweepRecord:
    curve: str
    domain: str
    x: int
    value: float
    trials: int
    fingerprint: str


@dataclass
class TrialResult:
    trial: int
    cd_steps: np.ndarray
    qd_steps: np.ndarray
    values: np.ndarray
    cd_to_optimum: int
    qd_to_optimum: int
    reached: bool
    final_bit_errors: int
    n_bits: int
    initial_threshold: float
    e_min: float


def _integer_threshold(policy, inst, target: HuboPolynomial, factor: float, b0, evaluated) -> float:
    if policy.kind in (PolicyKind.RANDOM, PolicyKind.MMSE):
        return evaluate(target, b0)
    y_tilde = float(round(factor * proposed_threshold(inst.sigma2, inst.n_r, policy.P)))
    if policy.kind is PolicyKind.PROPOSED:
        return y_tilde
    return min(evaluate(target, b0), y_tilde)


def run_trial(scenario: Scenario, policy: ThresholdPolicy, seed: int, trial: int, metric: str = "objective") -> TrialResult:
    """One GAS detection run, reduced to its best-so-far curve."""
    rng = stream(seed, "trial", trial)
    inst = scenario.instance(rng)
    poly = build_mld_hubo(inst)
    table = energy_table(poly)
    opt_idx = int(np.argmin(table))
    e_min = float(table[opt_idx])
    y0, b0, evaluated = initial_threshold(inst, policy, rng, poly)

    cfg = scenario.gas_config()
    if scenario.mode == "integer":
        target = multiplied_integer_approximation(poly, scenario.factor, scenario.rounding)
        y0 = _integer_threshold(policy, inst, target, scenario.factor, b0, evaluated)
        trace = run_integer_gas(target, cfg, rng, (y0, b0, evaluated))
    else:
        trace = run_real_gas(poly, cfg, rng, (y0, b0, evaluated))

    steps = best_so_far(trace)
    cds = np.array([s[0] for s in steps], dtype=np.int64)
    qds = np.array([s[1] for s in steps], dtype=np.int64)
    idx = np.array([bits_to_index(s[2]) for s in steps], dtype=np.int64)
    if metric == "objective":
        values = table[idx] - e_min
    elif metric == "ber":
        bits = np.array([s[2] for s in steps], dtype=np.int8)
        values = (bits != inst.tx_bits[None, :]).mean(axis=1)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    cd, qd, reached = queries_to_reach(trace, index_to_bits(opt_idx, poly.n))
    final = np.array(trace.best_bits, dtype=np.int8)
    return TrialResult(
        trial=trial,
        cd_steps=cds,
        qd_steps=qds,
        values=np.asarray(values, dtype=np.float64),
        cd_to_optimum=cd,
        qd_to_optimum=qd,
        reached=reached,
        final_bit_errors=int(np.sum(final != inst.tx_bits)),
        n_bits=inst.n,
        initial_threshold=float(y0),
        e_min=e_min,
    )


def _mean_curve(results: Sequence[TrialResult], axis: str) -> tuple[np.ndarray, np.ndarray]:
    steps = [getattr(r, f"{axis}_steps") for r in results]
    top = max(int(s[-1]) for s in steps)
    xs = np.arange(top + 1)
    total = np.zeros(xs.shape[0])
    for s, r in zip(steps, results):
        pos = np.clip(np.searchsorted(s, xs, side="right") - 1, 0, None)
        total += r.values[pos]
    return xs, total / len(results)


@dataclass
class SweepResult:
    label: str
    records: list[SweepRecord]
    trials: list[TrialResult]

    def curve(self, domain: str) -> tuple[np.ndarray, np.ndarray]:
        pts = [(r.x, r.value) for r in self.records if r.domain == domain]
        return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])

    def mean_cd_to_optimum(self) -> float:
        return float(np.mean([t.cd_to_optimum for t in self.trials]))

    def mean_qd_to_optimum(self) -> float:
        return float(np.mean([t.qd_to_optimum for t in self.trials]))

    def success_rate(self) -> float:
        return float(np.mean([t.reached for t in self.trials]))

    def final_ber(self) -> float:
        errs = sum(t.final_bit_errors for t in self.trials)
        return errs / sum(t.n_bits for t in self.trials)


def query_sweep(
    scenario: Scenario,
    policy: ThresholdPolicy,
    trials: int,
    rng,
    metric: str = "objective",
    workers: int = 1,
) -> SweepResult:
    """Mean best-so-far curve over CD and QD query counts.

    ``metric="objective"`` reports ``E(incumbent) - E_min``; ``"ber"``
    reports the incumbent's bit error rate. ``rng`` is a seed or Generator.
    Trial ``t`` uses the same stream for every policy, so policies are
    compared on identical channels and noise.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    seed = seed_from(rng)
    fn = partial(run_trial, scenario, policy, seed, metric=metric)
    results = _map_trials(fn, list(range(trials)), workers)
    fp = fingerprint({"scenario": asdict(scenario), "policy": policy.label, "trials": trials, "seed": seed, "metric": metric})
    records = []
    for domain in ("CD", "QD"):
        xs, ys = _mean_curve(results, domain.lower())
        records += [SweepRecord(policy.label, domain, int(x), float(y), trials, fp) for x, y in zip(xs, ys)]
    return SweepResult(policy.label, records, results)


def sweep_csv(results: Sequence[SweepResult], config: dict) -> str:
    rows = [(r.curve, r.domain, r.x, r.value, r.trials) for res in results for r in res.records]
    return _write_csv(csv_header(config), ["curve", "domain", "x", "mean_value_or_ber", "trials"], rows)


def queries_csv(results: Sequence[SweepResult], config: dict) -> str:
    rows = [
        (res.label, t.trial, t.cd_to_optimum, t.qd_to_optimum, int(t.reached))
        for res in results
        for t in res.trials
    ]
    return _write_csv(csv_header(config), ["curve", "trial", "cd_to_optimum", "qd_to_optimum", "reached"], rows)


# BER ------------------------------------------------------------------------------

@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    detector: str
    ber: float
    trials: int
    bit_errors: int
    bits: int


@dataclass
class BerSweep:
    records: list[BerRecord]
    decisions: dict | None = None

    def ber(self, snr_db: float, detector: str) -> float:
        for r in self.records:
            if r.snr_db == snr_db and r.detector == detector:
                return r.ber
        raise KeyError((snr_db, detector))


def parse_detector(name: str):
    """Validate a detector name: ``zf``, ``mmse``, ``mld``, ``hubo``, ``int:F`` or ``int:F:floor``."""
    name = name.strip().lower()
    if name in ("zf", "mmse", "mld", "hubo"):
        return name, None, None
    if name.startswith("int:"):
        parts = name.split(":")
        factor = float(parts[1])
        rounding = parts[2] if len(parts) > 2 else "nearest"
        if factor <= 0 or rounding not in ("nearest", "floor"):
            raise ValueError(f"bad integer-approximation detector {name!r}")
        return "int", factor, rounding
    raise ValueError(f"unknown detector {name!r}")


def detect_all(inst: MimoInstance, detectors: Sequence[str]) -> dict[str, np.ndarray]:
    """Decisions of every detector on one instance."""
    out = {}
    poly = None
    for name in detectors:
        kind, factor, rounding = parse_detector(name)
        if kind == "zf":
            out[name] = zf_detect(inst)
        elif kind == "mmse":
            out[name] = mmse_detect(inst)
        elif kind == "mld":
            out[name] = mld_detect(inst)
        else:
            if poly is None:
                poly = build_mld_hubo(inst)
            target = poly if kind == "hubo" else multiplied_integer_approximation(poly, factor, rounding)
            out[name] = np.array(brute_force_min(target)[0], dtype=np.int8)
    return out


def _ber_trial(modulation, n_t, n_r, snr, detectors, seed, trial):
    inst = simulate_channel(n_t, n_r, modulation, snr, stream(seed, "ber", trial))
    return detect_all(inst, detectors), inst.tx_bits


def ber_sweep(
    snr_grid_db: Sequence[float],
    detectors: Sequence[str],
    trials: int,
    rng,
    modulation: "Modulation | str" = Modulation.QPSK,
    n_t: int = 2,
    n_r: int = 2,
    min_errors: int | None = None,
    keep_decisions: bool = False,
    workers: int = 1,
    chunk: int = 1000,
) -> BerSweep:
    """Monte-Carlo BER per SNR point and detector.

    Trial ``t`` draws the same channel, bits and unit noise at every SNR and
    for every detector, so detector comparisons are paired. ``trials`` is a
    cap; with ``min_errors`` a point stops after the first chunk of trials in
    which every detector has reached that many bit errors.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    for d in detectors:
        parse_detector(d)
    modulation = Modulation.parse(modulation)
    seed = seed_from(rng)
    records, decisions = [], {} if keep_decisions else None
    for snr_db in snr_grid_db:
        fn = partial(_ber_trial, modulation, n_t, n_r, db_to_linear(snr_db), tuple(detectors), seed)
        errors = defaultdict(int)
        kept = defaultdict(list)
        done = 0
        while done < trials:
            batch = list(range(done, min(trials, done + chunk)))
            for dec, tx in _map_trials(fn, batch, workers):
                for name, bits in dec.items():
                    errors[name] += int(np.sum(bits != tx))
                    if keep_decisions:
                        kept[name].append(bits)
            done = batch[-1] + 1
            if min_errors is not None and all(errors[d] >= min_errors for d in detectors):
                break
        n_bits = done * n_t * modulation.bits_per_symbol
        for name in detectors:
            records.append(BerRecord(float(snr_db), name, errors[name] / n_bits, done, errors[name], n_bits))
            if keep_decisions:
                decisions[(float(snr_db), name)] = np.array(kept[name])
    return BerSweep(records, decisions)


def ber_csv(sweep: BerSweep, config: dict) -> str:
    rows = [(r.snr_db, r.detector, r.ber, r.trials, r.bit_errors) for r in sweep.records]
    return _write_csv(csv_header(config), ["snr_db", "detector", "ber", "trials", "bit_errors"], rows)


def gates_csv(reports: Sequence[tuple[str, CensusReport]], config: dict) -> str:
    rows = []
    for label, rep in reports:
        for name, pred, meas in rep.rows():
            rows.append((label, name, pred, meas))
    return _write_csv(csv_header(config), ["instance", "gate_class", "predicted", "measured"], rows)


# minimum-objective distribution -----------------------------------------------------

def min_objective_samples(snr_db: float, trials: int, rng, modulation="qpsk", n_t: int = 2, n_r: int = 2) -> np.ndarray:
    """Exhaustive-MLD minimum objective ``E_min`` over independent trials."""
    seed = seed_from(rng)
    out = np.empty(trials)
    for t in range(trials):
        inst = simulate_channel(n_t, n_r, modulation, db_to_linear(snr_db), stream(seed, "emin", t))
        out[t] = brute_force_min(build_mld_hubo(inst))[1]
    return out


def ks_distance_to_erlang(samples: np.ndarray, gamma: float, n_r: int) -> float:
    """Kolmogorov-Smirnov distance between samples and the Erlang(n_r, gamma) CDF."""
    xs = np.sort(np.asarray(samples, dtype=np.float64))
    k = xs.shape[0]
    theo = np.array([erlang_min_cdf(max(x, 0.0), gamma, n_r) for x in xs])
    upper = np.arange(1, k + 1) / k - theo
    lower = theo - np.arange(k) / k
    return float(max(upper.max(), lower.max()))


# figure presets -----------------------------------------------------------------------

def _policy(kind: str, P: float | None = None) -> ThresholdPolicy:
    return ThresholdPolicy(PolicyKind(kind), P)


FIGURES: dict[str, dict] = {
    "8a": dict(
        scenario=Scenario("qpsk", channel="example", snr_db=None, mode="integer", factor=3, rounding="floor", m=6),
        policies=[_policy("random")], metric="objective",
    ),
    "8b": dict(
        scenario=Scenario("16qam", channel="example", snr_db=None, mode="integer", factor=14, m=8,
                          fixed_bits=(0, 0, 1, 1, 0, 1, 0, 1)),
        policies=[_policy("random")], metric="objective",
    ),
    "9a": dict(
        scenario=Scenario("qpsk", channel="example", snr_db=None, m=5),
        policies=[_policy("random")], metric="objective",
    ),
    "9b": dict(
        scenario=Scenario("16qam", channel="example", snr_db=None, m=5, fixed_bits=(0, 0, 1, 1, 0, 1, 0, 1)),
        policies=[_policy("random")], metric="objective",
    ),
    "10": dict(
        scenario=Scenario("qpsk", snr_db=None),
        policies=[_policy("random")], metric="objective",
    ),
    "11": dict(
        scenario=Scenario("qpsk", snr_db=20.0, backend="ideal"),
        policies=[
            _policy("random"), _policy("mmse"), _policy("proposed", 1e-3),
            _policy("proposed", 1e-4), _policy("combination", 1e-4),
        ],
        metric="ber",
    ),
    "12": dict(
        scenario=Scenario("16qam", snr_db=20.0, backend="ideal"),
        policies=[_policy("random"), _policy("mmse"), _policy("proposed", 1e-3), _policy("combination", 1e-3)],
        metric="ber",
    ),
}

BER_PRESET = dict(
    snr_grid_db=[0.0, 5.0, 10.0, 15.0, 20.0],
    detectors=["zf", "mmse", "mld", "hubo", "int:1", "int:3", "int:10", "int:20"],
    modulation="qpsk",
    n_t=2,
    n_r=2,
)


def figure_keys(fig: str) -> list[str]:
    """``"8"`` expands to ``["8a", "8b"]``; unknown names raise ``KeyError``."""
    fig = str(fig).lower()
    if fig in FIGURES:
        return [fig]
    keys = [k for k in FIGURES if k.rstrip("ab") == fig]
    if not keys:
        raise KeyError(f"no sweep preset for figure {fig!r}")
    return keys


def run_figure(fig: str, trials: int, seed: int, workers: int = 1, **overrides) -> dict[str, list[SweepResult]]:
    """Run every curve of a figure preset. ``overrides`` replace scenario fields."""
    out = {}
    for key in figure_keys(fig):
        preset = FIGURES[key]
        scenario = replace(preset["scenario"], **overrides) if overrides else preset["scenario"]
        out[key] = [
            query_sweep(scenario, pol, trials, seed, metric=preset["metric"], workers=workers)
            for pol in preset["policies"]
        ]
    return out
