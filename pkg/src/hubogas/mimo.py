"""MIMO maximum-likelihood detection as a HUBO problem.

Received model: ``r = H s / sqrt(N_t) + sigma v`` with ``H`` and ``v`` i.i.d.
CN(0, 1) and SNR ``gamma = 1 / sigma^2``. Symbols come from the Gray-coded
5G NR maps, each written as a polynomial in its bits, so the ML objective
``||r - H M(b) / sqrt(N_t)||^2`` expands exactly into a pseudo-Boolean
polynomial of degree 2 (BPSK, QPSK), 4 (16-QAM) or 6 (64-QAM).
"""
from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .poly import HuboPolynomial, evaluate

__all__ = [
    "Modulation",
    "MimoInstance",
    "PolicyKind",
    "ThresholdPolicy",
    "map_bits_to_symbols",
    "demap_symbols_to_bits",
    "simulate_channel",
    "build_mld_hubo",
    "direct_objective",
    "mld_detect",
    "zf_detect",
    "mmse_detect",
    "lambert_w_m1",
    "threshold_nu",
    "proposed_threshold",
    "erlang_min_cdf",
    "erlang_tail",
    "initial_threshold",
    "db_to_linear",
    "EXAMPLE_CHANNEL",
    "EXAMPLE_BITS",
    "example_instance",
]


class Modulation(enum.Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"
    QAM16 = "16qam"
    QAM64 = "64qam"

    @property
    def bits_per_symbol(self) -> int:
        return {"bpsk": 1, "qpsk": 2, "16qam": 4, "64qam": 6}[self.value]

    @property
    def order(self) -> int:
        return 1 << self.bits_per_symbol

    @property
    def hubo_degree(self) -> int:
        return {"bpsk": 2, "qpsk": 2, "16qam": 4, "64qam": 6}[self.value]

    @classmethod
    def parse(cls, name: "str | Modulation") -> "Modulation":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("-", "").replace("_", "")
        aliases = {"qam16": "16qam", "qam64": "64qam"}
        return cls(aliases.get(key, key))


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


# bit -> symbol maps ---------------------------------------------------------

def _axis_values(bits: np.ndarray, modulation: Modulation) -> tuple[np.ndarray, np.ndarray]:
    """Real and imaginary parts for bit groups; ``bits`` has shape (..., bits_per_symbol)."""
    s = 1.0 - 2.0 * bits  # +-1 per bit
    if modulation is Modulation.BPSK:
        v = s[..., 0] / math.sqrt(2.0)
        return v, v
    if modulation is Modulation.QPSK:
        return s[..., 0] / math.sqrt(2.0), s[..., 1] / math.sqrt(2.0)
    if modulation is Modulation.QAM16:
        re = s[..., 0] * (2.0 - s[..., 2]) / math.sqrt(10.0)
        im = s[..., 1] * (2.0 - s[..., 3]) / math.sqrt(10.0)
        return re, im
    re = s[..., 0] * (4.0 - s[..., 2] * (2.0 - s[..., 4])) / math.sqrt(42.0)
    im = s[..., 1] * (4.0 - s[..., 3] * (2.0 - s[..., 5])) / math.sqrt(42.0)
    return re, im


def map_bits_to_symbols(bits: Sequence[int], modulation: "Modulation | str") -> np.ndarray:
    """Gray-coded 5G NR symbols for a bit-vector, one symbol per ``bits_per_symbol`` bits."""
    modulation = Modulation.parse(modulation)
    arr = np.asarray(bits, dtype=np.float64)
    q = modulation.bits_per_symbol
    if arr.ndim != 1 or arr.shape[0] % q:
        raise ValueError(f"bit count {arr.shape} is not a multiple of {q}")
    re, im = _axis_values(arr.reshape(-1, q), modulation)
    return re + 1j * im


@functools.lru_cache(maxsize=None)
def constellation(modulation: Modulation) -> tuple[np.ndarray, np.ndarray]:
    """All points and their bit patterns, in increasing pattern-integer order."""
    q = modulation.bits_per_symbol
    idx = np.arange(1 << q)
    patterns = ((idx[:, None] >> (q - 1 - np.arange(q))) & 1).astype(np.int8)
    re, im = _axis_values(patterns.astype(np.float64), modulation)
    return re + 1j * im, patterns


def demap_symbols_to_bits(symbols: Sequence[complex], modulation: "Modulation | str") -> np.ndarray:
    """Hard decision to the nearest constellation point.

    Ties go to the bit pattern with the smaller integer value.
    """
    modulation = Modulation.parse(modulation)
    points, patterns = constellation(modulation)
    sym = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    dist = np.abs(sym[:, None] - points[None, :]) ** 2
    return patterns[np.argmin(dist, axis=1)].reshape(-1).astype(np.int8)


@functools.lru_cache(maxsize=None)
def candidate_symbols(modulation: Modulation, n_t: int) -> tuple[np.ndarray, np.ndarray]:
    """Every transmit vector in big-endian bit-pattern order, with its bits."""
    n = n_t * modulation.bits_per_symbol
    idx = np.arange(1 << n)
    bits = ((idx[:, None] >> (n - 1 - np.arange(n))) & 1).astype(np.int8)
    q = modulation.bits_per_symbol
    re, im = _axis_values(bits.reshape(-1, n_t, q).astype(np.float64), modulation)
    return re + 1j * im, bits


# instances ------------------------------------------------------------------

@dataclass
class MimoInstance:
    """One detection problem. ``noise`` holds the unit-variance ``v`` when known."""

    n_t: int
    n_r: int
    modulation: Modulation
    H: np.ndarray
    sigma2: float
    tx_bits: np.ndarray
    r: np.ndarray
    noise: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.modulation = Modulation.parse(self.modulation)
        self.H = np.asarray(self.H, dtype=np.complex128).reshape(self.n_r, self.n_t)
        self.tx_bits = np.asarray(self.tx_bits, dtype=np.int8).reshape(-1)
        self.r = np.asarray(self.r, dtype=np.complex128).reshape(self.n_r)
        if self.tx_bits.shape[0] != self.n:
            raise ValueError(f"expected {self.n} transmit bits, got {self.tx_bits.shape[0]}")

    @property
    def n(self) -> int:
        return self.n_t * self.modulation.bits_per_symbol

    @property
    def snr(self) -> float:
        return math.inf if self.sigma2 == 0 else 1.0 / self.sigma2

    def to_dict(self) -> dict:
        return {
            "n_t": self.n_t,
            "n_r": self.n_r,
            "modulation": self.modulation.value,
            "H": [[[float(h.real), float(h.imag)] for h in row] for row in self.H],
            "sigma2": float(self.sigma2),
            "tx_bits": [int(b) for b in self.tx_bits],
            "r": [[float(v.real), float(v.imag)] for v in self.r],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "MimoInstance":
        H = np.array([[complex(re, im) for re, im in row] for row in data["H"]])
        r = np.array([complex(re, im) for re, im in data["r"]])
        return cls(data["n_t"], data["n_r"], data["modulation"], H, data["sigma2"], data["tx_bits"], r)

    @classmethod
    def from_json(cls, text: str) -> "MimoInstance":
        return cls.from_dict(json.loads(text))


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def simulate_channel(
    n_t: int,
    n_r: int,
    modulation: "Modulation | str",
    snr: float,
    rng: np.random.Generator,
    H: np.ndarray | None = None,
    tx_bits: Sequence[int] | None = None,
) -> MimoInstance:
    """Draw one Rayleigh flat-fading transmission at linear SNR ``snr``.

    ``H`` and ``tx_bits`` may be pinned; whatever is not pinned is drawn in
    the order channel, bits, noise. ``snr=inf`` gives a noiseless receive.
    """
    if not snr > 0:
        raise ValueError("snr must be positive")
    modulation = Modulation.parse(modulation)
    n = n_t * modulation.bits_per_symbol
    H = _cn(rng, (n_r, n_t)) if H is None else np.asarray(H, dtype=np.complex128)
    bits = rng.integers(0, 2, size=n).astype(np.int8) if tx_bits is None else np.asarray(tx_bits, np.int8)
    v = _cn(rng, n_r)
    sigma2 = 0.0 if math.isinf(snr) else 1.0 / snr
    s = map_bits_to_symbols(bits, modulation)
    r = H @ s / math.sqrt(n_t) + math.sqrt(sigma2) * v
    return MimoInstance(n_t, n_r, modulation, H, sigma2, bits, r, noise=v)


def direct_objective(instance: MimoInstance, bits: Sequence[int]) -> float:
    """``||r - H M(b) / sqrt(N_t)||^2`` computed straight from the model."""
    s = map_bits_to_symbols(bits, instance.modulation)
    d = instance.r - instance.H @ s / math.sqrt(instance.n_t)
    return float(np.vdot(d, d).real)


# HUBO expansion ---------------------------------------------------------------

def _bit(n: int, i: int) -> HuboPolynomial:
    return HuboPolynomial.variable(n, i)


def _spin(n: int, i: int) -> HuboPolynomial:
    return 1.0 - 2.0 * _bit(n, i)


def symbol_polynomials(modulation: Modulation, n_t: int, t: int) -> tuple[HuboPolynomial, HuboPolynomial]:
    """Real and imaginary part of symbol ``t`` as polynomials over all ``n`` bits."""
    q = modulation.bits_per_symbol
    n = n_t * q
    o = q * t
    if modulation is Modulation.BPSK:
        p = _spin(n, o) * (1.0 / math.sqrt(2.0))
        return p, p
    if modulation is Modulation.QPSK:
        c = 1.0 / math.sqrt(2.0)
        return _spin(n, o) * c, _spin(n, o + 1) * c
    if modulation is Modulation.QAM16:
        c = 1.0 / math.sqrt(10.0)
        re = _spin(n, o) * (2.0 - _spin(n, o + 2)) * c
        im = _spin(n, o + 1) * (2.0 - _spin(n, o + 3)) * c
        return re, im
    c = 1.0 / math.sqrt(42.0)
    re = _spin(n, o) * (4.0 - _spin(n, o + 2) * (2.0 - _spin(n, o + 4))) * c
    im = _spin(n, o + 1) * (4.0 - _spin(n, o + 3) * (2.0 - _spin(n, o + 5))) * c
    return re, im


@functools.lru_cache(maxsize=None)
def _expansion_basis(modulation: Modulation, n_t: int):
    xs, zs = zip(*(symbol_polynomials(modulation, n_t, t) for t in range(n_t)))
    power = [xs[t] * xs[t] + zs[t] * zs[t] for t in range(n_t)]
    same, quad = {}, {}
    for t in range(n_t):
        for tp in range(t + 1, n_t):
            # s_t conj(s_t') = (x x' + z z') + j (z x' - x z')
            same[t, tp] = xs[t] * xs[tp] + zs[t] * zs[tp]
            quad[t, tp] = zs[t] * xs[tp] - xs[t] * zs[tp]
    return xs, zs, power, same, quad


def _accumulate(acc: dict, poly: HuboPolynomial, weight: float) -> None:
    for mono, c in poly:
        acc[mono] = acc.get(mono, 0.0) + weight * c


def build_mld_hubo(instance: MimoInstance, stats: dict | None = None) -> HuboPolynomial:
    """Expand the ML objective into a HUBO polynomial over the ``n`` transmit bits.

    With ``s_t = x_t + j z_t`` and ``a = H s / sqrt(N_t)``,

        ||r - a||^2 = ||r||^2 - 2 Re(r^H a) + sum_t |s_t|^2 sum_u |h_ut|^2 / N_t
                      + (2 / N_t) sum_{t<t'} Re(g_tt' s_t conj(s_t'))

    where ``g_tt' = sum_u h_ut conj(h_ut')``. Building the ``g`` terms takes
    one complex channel product per ``(u, t < t')``; when ``stats`` is given
    their count is added under ``"channel_products"``.
    """
    n_t, n_r = instance.n_t, instance.n_r
    H, r = instance.H, instance.r
    n = instance.n
    xs, zs, power, same, quad = _expansion_basis(instance.modulation, n_t)
    scale = 1.0 / math.sqrt(n_t)

    acc: dict = {(): float(np.vdot(r, r).real)}
    corr = np.conj(r) @ H  # sum_u conj(r_u) h_ut
    gains = (np.abs(H) ** 2).sum(axis=0)
    for t in range(n_t):
        _accumulate(acc, xs[t], -2.0 * scale * corr[t].real)
        _accumulate(acc, zs[t], 2.0 * scale * corr[t].imag)
        _accumulate(acc, power[t], scale * scale * gains[t])
    products = 0
    for t in range(n_t):
        for tp in range(t + 1, n_t):
            g = 0j
            for u in range(n_r):
                g += H[u, t] * np.conj(H[u, tp])
                products += 1
            _accumulate(acc, same[t, tp], 2.0 * scale * scale * g.real)
            _accumulate(acc, quad[t, tp], -2.0 * scale * scale * g.imag)
    if stats is not None:
        stats["channel_products"] = stats.get("channel_products", 0) + products
    return HuboPolynomial._raw(n, acc)


# detectors ------------------------------------------------------------------------

def mld_detect(instance: MimoInstance) -> np.ndarray:
    """Exhaustive ML detection over all ``2**n`` transmit vectors, by direct norm.

    Ties resolve to the lexicographically smallest bit-vector.
    """
    symbols, bits = candidate_symbols(instance.modulation, instance.n_t)
    heff = instance.H / math.sqrt(instance.n_t)
    norms = _kernels.residual_norms(heff, instance.r, symbols)
    return bits[int(np.argmin(norms))].copy()


def _equalize(instance: MimoInstance, reg: float) -> np.ndarray:
    H, r = instance.H, instance.r
    Hh = H.conj().T
    if instance.n_t <= instance.n_r:
        gram = Hh @ H + reg * np.eye(instance.n_t)
        est = np.linalg.solve(gram, Hh @ r)
    else:
        gram = H @ Hh + reg * np.eye(instance.n_r)
        est = Hh @ np.linalg.solve(gram, r)
    return est * math.sqrt(instance.n_t)


def zf_detect(instance: MimoInstance) -> np.ndarray:
    """Zero-forcing: pseudo-inverse equalization, rescaled by ``sqrt(N_t)``, then demap.

    Raises:
        numpy.linalg.LinAlgError: when the Gram matrix is singular.
    """
    return demap_symbols_to_bits(_equalize(instance, 0.0), instance.modulation)


def mmse_detect(instance: MimoInstance) -> np.ndarray:
    """MMSE equalization with regularizer ``sigma^2 I``, rescaled by ``sqrt(N_t)``, then demap."""
    return demap_symbols_to_bits(_equalize(instance, instance.sigma2), instance.modulation)


# threshold model ------------------------------------------------------------------

def lambert_w_m1(z: float, tol: float = 1e-12) -> float:
    """Lower branch ``W_{-1}(z)`` for ``-1/e <= z < 0``.

    Solves ``w + log(-w) = log(-z)`` on ``w <= -1`` with safeguarded Newton
    steps inside a shrinking bracket.
    """
    if not (-1.0 / math.e - 1e-15 <= z < 0.0):
        raise ValueError("W_{-1} is real only on [-1/e, 0)")
    if z <= -1.0 / math.e:
        return -1.0
    target = math.log(-z)
    x = -target  # >= 1
    lo, hi = -2.0 * x - 1.0, -1.0

    def g(w):
        return w + math.log(-w) - target

    w = 0.5 * (lo + hi)
    for _ in range(200):
        gw = g(w)
        if gw > 0:
            hi = w
        else:
            lo = w
        deriv = 1.0 + 1.0 / w
        nxt = w - gw / deriv if deriv > 0 else 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        done = abs(nxt - w) <= tol * max(1.0, abs(w)) or hi - lo <= tol * max(1.0, abs(w))
        w = nxt
        if done:
            break
    # final Newton polish; harmless near the branch point where the slope vanishes
    deriv = 1.0 + 1.0 / w
    if deriv > 1e-6:
        polished = w - g(w) / deriv
        if polished <= -1.0:
            w = polished
    return w


def erlang_tail(nu: float, n_r: int) -> float:
    """``Pr[Y > y]`` in units of ``nu = gamma * y``: ``exp(-nu) sum_{u<n_r} nu^u / u!``."""
    term, total = 1.0, 1.0
    for u in range(1, n_r):
        term *= nu / u
        total += term
    return math.exp(-nu) * total


def erlang_min_cdf(y: float, gamma: float, n_r: int) -> float:
    """CDF of the minimum objective ``sigma^2 sum_u |v_u|^2`` (Erlang(n_r, gamma))."""
    if y < 0:
        raise ValueError("y must be non-negative")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if math.isinf(y):
        return 1.0
    return 1.0 - erlang_tail(gamma * y, n_r)


def threshold_nu(P: float, n_r: int = 2) -> float:
    """The factor ``nu`` with ``Pr[E_min > sigma^2 nu] = P``.

    Uses ``nu = -1 - W_{-1}(-P/e)`` for two receive antennas and bisection
    on the Erlang tail otherwise.
    """
    if not 0.0 < P < 1.0:
        raise ValueError("P must lie strictly between 0 and 1")
    if n_r < 1:
        raise ValueError("n_r must be positive")
    if n_r == 2:
        return -1.0 - lambert_w_m1(-P / math.e)
    lo, hi = 0.0, 1.0
    while erlang_tail(hi, n_r) > P:
        hi *= 2.0
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if erlang_tail(mid, n_r) > P:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def proposed_threshold(sigma2: float, n_r: int, P: float) -> float:
    """Initial threshold ``sigma^2 * nu(P)``; undershoots ``E_min`` with probability ``P``."""
    return sigma2 * threshold_nu(P, n_r)


class PolicyKind(enum.Enum):
    RANDOM = "random"
    MMSE = "mmse"
    PROPOSED = "proposed"
    COMBINATION = "combination"


@dataclass(frozen=True)
class ThresholdPolicy:
    kind: PolicyKind = PolicyKind.RANDOM
    P: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind in (PolicyKind.PROPOSED, PolicyKind.COMBINATION):
            if self.P is None or not 0.0 < self.P < 1.0:
                raise ValueError(f"{self.kind.value} threshold needs 0 < P < 1")

    @property
    def label(self) -> str:
        if self.P is None:
            return self.kind.value
        return f"{self.kind.value}(P={self.P:g})"


def initial_threshold(
    instance: MimoInstance,
    policy: ThresholdPolicy,
    rng: np.random.Generator,
    poly: HuboPolynomial | None = None,
) -> tuple[float, np.ndarray, bool]:
    """Initial ``(y0, b0, evaluated)`` for a detection run.

    ``evaluated`` reports whether ``y0`` needed a classical objective
    evaluation (everything except the pure proposed threshold does).
    """
    if poly is None:
        poly = build_mld_hubo(instance)
    kind = policy.kind
    if kind is PolicyKind.RANDOM:
        b0 = rng.integers(0, 2, size=instance.n).astype(np.int8)
        return evaluate(poly, b0), b0, True
    if kind is PolicyKind.PROPOSED:
        b0 = rng.integers(0, 2, size=instance.n).astype(np.int8)
        return proposed_threshold(instance.sigma2, instance.n_r, policy.P), b0, False
    b_mmse = mmse_detect(instance)
    y_bar = evaluate(poly, b_mmse)
    if kind is PolicyKind.MMSE:
        return y_bar, b_mmse, True
    y_tilde = proposed_threshold(instance.sigma2, instance.n_r, policy.P)
    return min(y_bar, y_tilde), b_mmse, True


# worked example fixture ------------------------------------------------------------

EXAMPLE_CHANNEL = np.array(
    [
        [0.748510757437062 - 0.014877263039446401j, 1.3215983896521515 + 0.06298233870206783j],
        [0.6371630706424066 - 0.14262155021296025j, -0.3888005272494009 - 0.15170387681055802j],
    ]
)
EXAMPLE_BITS = (0, 0, 1, 1, 0, 1, 0, 1)


def example_instance(snr: float = math.inf, rng: np.random.Generator | None = None,
                  modulation: "Modulation | str" = Modulation.QAM16,
                  tx_bits: Sequence[int] | None = None) -> MimoInstance:
    """The fixed 2x2 channel of the 16-QAM worked example.

    By default the transmit bits are pinned to ``00110101`` and the receive is
    noiseless; pass ``snr`` and ``rng`` for a noisy draw.
    """
    modulation = Modulation.parse(modulation)
    if rng is None:
        rng = np.random.default_rng(0)
    if tx_bits is None and modulation is Modulation.QAM16:
        tx_bits = EXAMPLE_BITS
    return simulate_channel(2, 2, modulation, snr, rng, H=EXAMPLE_CHANNEL, tx_bits=tx_bits)
