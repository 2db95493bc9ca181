"""Grover adaptive search for integer and real-valued HUBO objectives.

Two drivers share one adaptive loop:

* :func:`run_integer_gas` trusts the value register: the measured ``(b, v)``
  gives the candidate ``y = y_i + v``.
* :func:`run_real_gas` discards the value register and re-evaluates
  ``y = E(b)`` classically, which makes the direct (Fejér) encoding of real
  coefficients safe.

Each iteration draws ``L`` uniformly from ``{0, ..., ceil(k - 1)}``, samples
``G^L A_y |0>``, and on failure grows ``k`` by ``lam`` up to ``sqrt(2**n)``.

Two sampling backends exist. ``"statevector"`` simulates the circuit.
``"ideal"`` assumes a perfect oracle that marks exactly ``{b : E(b) < y}``
and samples from the closed-form amplitude-amplification distribution; it is
what the threshold experiments use to isolate the effect of the initial
threshold from encoding errors.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import circuit as qc
from .poly import (
    HuboPolynomial,
    ValueBounds,
    bounds,
    energy_table,
    evaluate,
    index_to_bits,
    required_qubits_m,
)

__all__ = [
    "GasConfig",
    "GasTrace",
    "IterationRecord",
    "run_integer_gas",
    "run_real_gas",
    "rotation_count_schedule",
    "should_terminate",
    "trace_to_csv",
    "queries_to_reach",
]

DEFAULT_LAMBDA = 8.0 / 7.0


@dataclass(frozen=True)
class GasConfig:
    """Knobs of one GAS run.

    ``m=None`` sizes the value register from the objective bounds (extended
    to include the initial threshold). ``no_improvement_limit=None`` disables
    the stagnation rule so only the query budget stops the run.
    """

    lam: float = DEFAULT_LAMBDA
    qd_budget_factor: float = 22.5
    no_improvement_limit: int | None = 20
    rng_seed: int = 0
    m: int | None = None
    backend: str = "statevector"

    def __post_init__(self):
        if not self.lam > 1:
            raise ValueError("lam must exceed 1")
        if not self.qd_budget_factor > 0:
            raise ValueError("qd_budget_factor must be positive")
        if self.no_improvement_limit is not None and self.no_improvement_limit < 1:
            raise ValueError("no_improvement_limit must be positive")
        if self.backend not in ("statevector", "ideal"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def qd_budget(self, n: int) -> float:
        return self.qd_budget_factor * math.sqrt(2.0 ** n)


@dataclass(frozen=True)
class IterationRecord:
    i: int
    L: int
    measured_bits: tuple[int, ...]
    measured_value: float | None
    y_candidate: float
    y_i: float
    improved: bool
    cd: int
    qd: int


@dataclass
class GasTrace:
    """Everything a run did, enough to rebuild both query counters."""

    n: int
    m: int
    mode: str
    initial_bits: tuple[int, ...]
    initial_threshold: float
    initial_evaluated: bool
    iterations: list[IterationRecord] = field(default_factory=list)
    cd_queries: int = 0
    qd_queries: int = 0
    best_bits: tuple[int, ...] = ()
    threshold: float = math.inf
    consecutive_failures: int = 0
    terminated_by: str = ""

    @property
    def best_value(self) -> float:
        """Threshold reached by the run.

        Equal to ``E(best_bits)`` unless the run started from an externally
        supplied threshold and never improved on it.
        """
        return self.threshold

    @property
    def improvements(self) -> int:
        return sum(rec.improved for rec in self.iterations)


def rotation_count_schedule(k: float, rng: np.random.Generator) -> int:
    """Uniform draw from ``{0, 1, ..., ceil(k - 1)}``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    top = math.ceil(k - 1 - 1e-12)
    return int(rng.integers(0, top + 1))


def should_terminate(trace: GasTrace, cfg: GasConfig) -> bool:
    """Query budget exceeded, or too many consecutive non-improvements."""
    if trace.qd_queries > cfg.qd_budget(trace.n):
        return True
    limit = cfg.no_improvement_limit
    return limit is not None and trace.consecutive_failures >= limit


class _StatevectorSampler:
    def __init__(self, poly: HuboPolynomial, m: int):
        self.poly = poly
        self.m = m
        self._y = None
        self._circ = None
        self._states: list[qc.Statevector] = []
        self._cdfs: list[np.ndarray] = []

    def _reset(self, y: float) -> None:
        self._y = y
        self._circ = qc.prepare(self.poly, y, self.m)
        state = qc.apply_state_preparation(self._circ)
        self._states = [state]
        self._cdfs = [np.cumsum(qc.probabilities(state))]

    def sample(self, y: float, L: int, rng: np.random.Generator):
        if y != self._y:
            self._reset(y)
        while len(self._states) <= L:
            nxt = self._states[-1].copy()
            qc.apply_oracle(nxt)
            qc.apply_diffusion(nxt, self._circ)
            self._states.append(nxt)
            self._cdfs.append(np.cumsum(qc.probabilities(nxt)))
        cdf = self._cdfs[L]
        idx = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), cdf.shape[0] - 1)
        key, level = divmod(idx, 1 << self.m)
        return index_to_bits(key, self.poly.n), float(qc.signed_value(level, self.m))


class _IdealSampler:
    def __init__(self, poly: HuboPolynomial):
        self.poly = poly
        self.table = energy_table(poly)
        self._y = None

    def sample(self, y: float, L: int, rng: np.random.Generator):
        if y != self._y:
            self._y = y
            good = self.table - y < 0
            self._good = np.flatnonzero(good)
            self._bad = np.flatnonzero(~good)
        N = self.table.shape[0]
        Ns = self._good.shape[0]
        u = rng.random()
        if Ns == 0 or Ns == N:
            idx = int(rng.integers(N))
        elif u < qc.grover_success_probability(N, Ns, L):
            idx = int(self._good[rng.integers(Ns)])
        else:
            idx = int(self._bad[rng.integers(N - Ns)])
        return index_to_bits(idx, self.poly.n), float(self.table[idx] - y)


def _register_width(poly: HuboPolynomial, y0: float) -> int:
    vb = bounds(poly)
    vb = ValueBounds(min(vb.e_min, y0), max(vb.e_max, y0))
    return required_qubits_m(vb)


def _run(
    poly: HuboPolynomial,
    cfg: GasConfig,
    rng: np.random.Generator | None,
    initial: tuple[float, Sequence[int], bool] | None,
    mode: str,
) -> GasTrace:
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    n = poly.n
    if initial is None:
        b0 = tuple(int(b) for b in rng.integers(0, 2, size=n))
        y0, evaluated = evaluate(poly, b0), True
    else:
        y0, b0, evaluated = initial
        b0 = tuple(int(b) for b in b0)
        if len(b0) != n:
            raise ValueError("initial bits have the wrong length")
    if mode == "integer" and abs(y0 - round(y0)) > 1e-9:
        raise ValueError("integer GAS needs an integral initial threshold")

    m = cfg.m if cfg.m is not None else _register_width(poly, y0)
    sampler = _IdealSampler(poly) if cfg.backend == "ideal" else _StatevectorSampler(poly, m)

    trace = GasTrace(
        n=n, m=m, mode=mode, initial_bits=b0, initial_threshold=float(y0),
        initial_evaluated=bool(evaluated), best_bits=b0, threshold=float(y0),
        cd_queries=int(bool(evaluated)),
    )
    k = 1.0
    k_cap = math.sqrt(2.0 ** n)
    i = 0
    while True:
        L = rotation_count_schedule(k, rng)
        y_i = trace.threshold
        bits, reading = sampler.sample(y_i, L, rng)
        if mode == "real":
            y = evaluate(poly, bits)
        else:
            y = y_i + reading
        trace.cd_queries += 1
        trace.qd_queries += L
        improved = y < y_i
        if improved:
            trace.best_bits, trace.threshold = bits, float(y)
            trace.consecutive_failures = 0
            k = 1.0
        else:
            trace.consecutive_failures += 1
            k = min(cfg.lam * k, k_cap)
        trace.iterations.append(
            IterationRecord(i, L, bits, reading, float(y), y_i, improved, trace.cd_queries, trace.qd_queries)
        )
        i += 1
        if trace.qd_queries > cfg.qd_budget(n):
            trace.terminated_by = "qd_budget"
            break
        if should_terminate(trace, cfg):
            trace.terminated_by = "no_improvement"
            break
    return trace


def run_integer_gas(
    poly: HuboPolynomial,
    cfg: GasConfig = GasConfig(),
    rng: np.random.Generator | None = None,
    initial: tuple[float, Sequence[int], bool] | None = None,
) -> GasTrace:
    """Conventional GAS for integer coefficients.

    Args:
        poly: objective with integral coefficients.
        cfg: run configuration.
        rng: random stream; defaults to one seeded with ``cfg.rng_seed``.
        initial: ``(y0, b0, evaluated)``; ``evaluated`` says whether
            obtaining ``y0`` cost a classical query. Defaults to a uniform
            ``b0`` with ``y0 = E(b0)``.

    Raises:
        ValueError: if a coefficient or the initial threshold is not integral.
    """
    if not poly.is_integral():
        raise ValueError("integer GAS requires integral coefficients")
    return _run(poly, cfg, rng, initial, "integer")


def run_real_gas(
    poly: HuboPolynomial,
    cfg: GasConfig = GasConfig(),
    rng: np.random.Generator | None = None,
    initial: tuple[float, Sequence[int], bool] | None = None,
) -> GasTrace:
    """GAS for real coefficients: the measured bits are re-evaluated classically.

    Arguments are as for :func:`run_integer_gas`.
    """
    return _run(poly, cfg, rng, initial, "real")


def trace_to_csv(trace: GasTrace, header: str | None = None) -> str:
    """One ``i,L_i,y_candidate,y_i,cd,qd`` row per iteration."""
    buf = io.StringIO()
    if header:
        buf.write(header.rstrip("\n") + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["i", "L_i", "y_candidate", "y_i", "cd", "qd"])
    for rec in trace.iterations:
        writer.writerow([rec.i, rec.L, repr(rec.y_candidate), repr(rec.y_i), rec.cd, rec.qd])
    return buf.getvalue()


def best_so_far(trace: GasTrace) -> list[tuple[int, int, tuple[int, ...]]]:
    """``(cd, qd, best_bits)`` after the initial step and after every iteration.

    The incumbent starts as the initial bits, which are the decision a
    detector would output even when their value was never evaluated.
    """
    best = trace.initial_bits
    out = [(int(trace.initial_evaluated), 0, best)]
    for rec in trace.iterations:
        if rec.improved:
            best = rec.measured_bits
        out.append((rec.cd, rec.qd, best))
    return out


def queries_to_reach(trace: GasTrace, target: Sequence[int]) -> tuple[int, int, bool]:
    """CD and QD counts at which the run first holds ``target`` as a known solution.

    An unevaluated initial guess does not count as reaching ``target`` even if
    it happens to coincide with it. Returns the final counts and ``False``
    when the run never got there.
    """
    target = tuple(int(b) for b in target)
    steps = best_so_far(trace)
    if not trace.initial_evaluated:
        steps = [(cd, qd, rec.measured_bits if rec.improved else None)
                 for (cd, qd, _), rec in zip(steps[1:], trace.iterations)]
        known = None
        fixed = []
        for cd, qd, bits in steps:
            known = bits if bits is not None else known
            fixed.append((cd, qd, known))
        steps = fixed
    for cd, qd, best in steps:
        if best == target:
            return cd, qd, True
    return trace.cd_queries, trace.qd_queries, False
