"""Real-coefficient pseudo-Boolean polynomials (HUBO objectives).

A polynomial over ``n`` binary variables is stored as a mapping from
monomials to coefficients. A monomial is the sorted tuple of its variable
indices; ``()`` is the constant term. Since ``b_i**2 == b_i`` every product
is reduced to a set of distinct indices.

Assignments are indexed big-endian: ``b_0`` is the most significant bit of the
integer key, so integer order equals lexicographic order of bit-vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Real
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels

__all__ = [
    "HuboPolynomial",
    "ValueBounds",
    "CapacityError",
    "evaluate",
    "brute_force_min",
    "bounds",
    "required_qubits_m",
    "multiplied_integer_approximation",
    "bits_to_index",
    "index_to_bits",
    "energy_table",
    "loads",
    "dumps",
]

#: Coefficients whose magnitude falls below this after merging are dropped.
ZERO_TOL = 1e-12
#: Largest n accepted by exhaustive routines.
MAX_BRUTE_FORCE_N = 30
#: Largest n for which bounds() enumerates instead of relaxing.
MAX_EXACT_BOUNDS_N = 20
_CHUNK_BITS = 22

Monomial = tuple


class CapacityError(ValueError):
    """Raised when an exhaustive routine is asked to enumerate too many assignments."""


def _canonical(monomial: Iterable[int], n: int) -> Monomial:
    mono = tuple(sorted(set(int(i) for i in monomial)))
    if mono and (mono[0] < 0 or mono[-1] >= n):
        raise ValueError(f"monomial {mono} has an index outside [0, {n})")
    return mono


class HuboPolynomial:
    """Sparse polynomial ``E(b) = sum_S c_S prod_{i in S} b_i`` over ``n`` bits.

    Instances are treated as immutable; arithmetic returns new objects.
    Duplicate monomials are merged on construction and near-zero coefficients
    (``|c| < ZERO_TOL``) are discarded.
    """

    __slots__ = ("n", "_terms", "_arrays")

    def __init__(self, n: int, terms: Mapping[Iterable[int], float] | Iterable = ()):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = int(n)
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[Monomial, float] = {}
        for mono, coeff in items:
            key = _canonical(mono, self.n)
            merged[key] = merged.get(key, 0.0) + float(coeff)
        self._terms = {k: v for k, v in sorted(merged.items(), key=_term_order) if abs(v) >= ZERO_TOL}
        self._arrays = None

    @classmethod
    def _raw(cls, n: int, terms: dict[Monomial, float]) -> "HuboPolynomial":
        obj = cls.__new__(cls)
        obj.n = n
        obj._terms = {k: float(v) for k, v in sorted(terms.items(), key=_term_order) if abs(v) >= ZERO_TOL}
        obj._arrays = None
        return obj

    @classmethod
    def constant(cls, n: int, value: float) -> "HuboPolynomial":
        return cls(n, {(): value})

    @classmethod
    def variable(cls, n: int, index: int, coeff: float = 1.0) -> "HuboPolynomial":
        return cls(n, {(index,): coeff})

    @property
    def terms(self) -> dict[Monomial, float]:
        """A copy of the monomial -> coefficient map."""
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def __repr__(self) -> str:
        return f"HuboPolynomial(n={self.n}, terms={self._terms!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, HuboPolynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, tuple(self._terms.items())))

    def coefficient(self, monomial: Iterable[int]) -> float:
        return self._terms.get(_canonical(monomial, self.n), 0.0)

    @property
    def constant_term(self) -> float:
        return self._terms.get((), 0.0)

    @property
    def degree(self) -> int:
        return max((len(k) for k in self._terms), default=0)

    def degree_counts(self) -> dict[int, int]:
        """Number of nonzero terms per degree."""
        counts: dict[int, int] = {}
        for mono in self._terms:
            counts[len(mono)] = counts.get(len(mono), 0) + 1
        return counts

    def is_integral(self, tol: float = 1e-9) -> bool:
        return all(abs(c - round(c)) <= tol for c in self._terms.values())

    # arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "HuboPolynomial":
        if isinstance(other, HuboPolynomial):
            if other.n != self.n:
                raise ValueError("polynomials over different variable counts")
            return other
        if isinstance(other, Real):
            return HuboPolynomial._raw(self.n, {(): float(other)})
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out.get(k, 0.0) + v
        return HuboPolynomial._raw(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return HuboPolynomial._raw(self.n, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Real):
            return HuboPolynomial._raw(self.n, {k: v * float(other) for k, v in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Monomial, float] = {}
        for ka, va in self._terms.items():
            sa = set(ka)
            for kb, vb in other._terms.items():
                key = tuple(sorted(sa.union(kb))) if kb else ka
                out[key] = out.get(key, 0.0) + va * vb
        return HuboPolynomial._raw(self.n, out)

    __rmul__ = __mul__

    def map_coefficients(self, fn) -> "HuboPolynomial":
        return HuboPolynomial._raw(self.n, {k: fn(v) for k, v in self._terms.items()})

    # kernel views -------------------------------------------------------

    def mask_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Big-endian key masks and coefficients as arrays for the kernels."""
        if self._arrays is None:
            masks = np.array([_mono_mask(k, self.n) for k in self._terms], dtype=np.int64)
            coeffs = np.array(list(self._terms.values()), dtype=np.float64)
            self._arrays = (masks, coeffs)
        return self._arrays

    def evaluate(self, bits: Sequence[int]) -> float:
        return evaluate(self, bits)


def _term_order(item):
    mono = item[0]
    return (len(mono), mono)


def _mono_mask(mono: Monomial, n: int) -> int:
    mask = 0
    for i in mono:
        mask |= 1 << (n - 1 - i)
    return mask


def bits_to_index(bits: Sequence[int]) -> int:
    """Big-endian integer for a bit-vector (``bits[0]`` is the MSB)."""
    idx = 0
    for b in bits:
        idx = (idx << 1) | (1 if b else 0)
    return idx


def index_to_bits(index: int, n: int) -> tuple[int, ...]:
    return tuple((index >> (n - 1 - i)) & 1 for i in range(n))


@dataclass(frozen=True)
class ValueBounds:
    """Interval guaranteed to contain every attainable objective value."""

    e_min: float
    e_max: float

    def __post_init__(self):
        if self.e_min > self.e_max:
            raise ValueError("e_min must not exceed e_max")

    @property
    def span(self) -> float:
        return self.e_max - self.e_min


def evaluate(poly: HuboPolynomial, bits: Sequence[int]) -> float:
    """Objective value of ``poly`` at the assignment ``bits``."""
    if len(bits) != poly.n:
        raise ValueError(f"expected {poly.n} bits, got {len(bits)}")
    total = 0.0
    for mono, coeff in poly:
        if all(bits[i] for i in mono):
            total += coeff
    return total


def energy_table(poly: HuboPolynomial) -> np.ndarray:
    """Objective values for all ``2**n`` assignments in big-endian index order."""
    if poly.n > MAX_BRUTE_FORCE_N:
        raise CapacityError(f"n={poly.n} exceeds the enumeration limit {MAX_BRUTE_FORCE_N}")
    masks, coeffs = poly.mask_arrays()
    return _kernels.subset_sum_table(poly.n, masks, coeffs)


def _chunked_min(poly: HuboPolynomial) -> tuple[int, float]:
    # fix the leading `hi` variables and enumerate the remaining `lo` ones
    n = poly.n
    lo = _CHUNK_BITS
    hi = n - lo
    masks, coeffs = poly.mask_arrays()
    hi_masks = masks >> lo
    lo_masks = masks & ((1 << lo) - 1)
    best_idx, best_val = 0, math.inf
    for prefix in range(1 << hi):
        alive = (hi_masks & prefix) == hi_masks
        table = _kernels.subset_sum_table(lo, lo_masks[alive], coeffs[alive])
        j = int(np.argmin(table))
        if table[j] < best_val:
            best_idx, best_val = (prefix << lo) | j, float(table[j])
    return best_idx, best_val


def brute_force_min(poly: HuboPolynomial) -> tuple[tuple[int, ...], float]:
    """Exhaustive minimum; ties go to the lexicographically smallest bit-vector."""
    if poly.n > MAX_BRUTE_FORCE_N:
        raise CapacityError(f"n={poly.n} exceeds the enumeration limit {MAX_BRUTE_FORCE_N}")
    if poly.n > _CHUNK_BITS + 2:
        idx, val = _chunked_min(poly)
    else:
        table = energy_table(poly)
        idx = int(np.argmin(table))
        val = float(table[idx])
    return index_to_bits(idx, poly.n), val


def bounds(poly: HuboPolynomial, exact: bool | None = None) -> ValueBounds:
    """Bounds on the objective.

    Enumerates all assignments when ``n <= MAX_EXACT_BOUNDS_N`` (or when
    ``exact=True``); otherwise uses the sign-split relaxation
    ``sum(min(c, 0)) <= E(b) <= sum(max(c, 0))``.
    """
    if exact is None:
        exact = poly.n <= MAX_EXACT_BOUNDS_N
    if exact:
        table = energy_table(poly)
        return ValueBounds(float(table.min()), float(table.max()))
    coeffs = [c for _, c in poly]
    lo = sum(min(c, 0.0) for c in coeffs)
    hi = sum(max(c, 0.0) for c in coeffs)
    return ValueBounds(lo, hi)


def required_qubits_m(vb: ValueBounds, mode: str = "integer") -> int:
    """Smallest value-register width that represents E, E - y and the span.

    Finds the least ``m`` with ``-2**(m-1) <= min(e_min, -span)`` and
    ``max(e_max, span) < 2**(m-1)``. The same rule serves both modes; for real
    values it is the range condition of the direct encoding.
    """
    if mode not in ("integer", "real"):
        raise ValueError(f"unknown mode {mode!r}")
    low = min(vb.e_min, -vb.span)
    high = max(vb.e_max, vb.span)
    m = 1
    while not (-(2.0 ** (m - 1)) <= low and high < 2.0 ** (m - 1)):
        m += 1
    return m


def multiplied_integer_approximation(
    poly: HuboPolynomial, factor: float, rounding: str = "nearest"
) -> HuboPolynomial:
    """Scale every coefficient by ``factor`` and round to an integer.

    ``rounding`` is ``"nearest"`` (half away from zero) or ``"floor"``.
    """
    if not factor > 0:
        raise ValueError("factor must be positive")
    if rounding == "nearest":
        rnd = _round_half_away
    elif rounding == "floor":
        rnd = math.floor
    else:
        raise ValueError(f"unknown rounding {rounding!r}")
    return poly.map_coefficients(lambda c: float(rnd(c * factor)))


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


# text format ------------------------------------------------------------

def dumps(poly: HuboPolynomial) -> str:
    """Serialize as ``coeff i1 i2 ...`` lines preceded by an ``n`` header."""
    lines = [f"n {poly.n}"]
    for mono, coeff in poly:
        lines.append(" ".join([repr(float(coeff)), *map(str, mono)]))
    return "\n".join(lines) + "\n"


def loads(text: str, n: int | None = None) -> HuboPolynomial:
    """Parse the line format written by :func:`dumps`.

    The ``n`` header is optional; without it the variable count is one more
    than the largest index seen (or the ``n`` argument when given).
    """
    header_n = None
    terms: list[tuple[tuple[int, ...], float]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "n":
            header_n = int(fields[1])
            continue
        try:
            coeff = float(fields[0])
            mono = tuple(int(f) for f in fields[1:])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}") from exc
        if len(set(mono)) != len(mono):
            raise ValueError(f"line {lineno}: repeated variable index")
        terms.append((mono, coeff))
    if n is None:
        n = header_n
    if n is None:
        n = 1 + max((max(m) for m, _ in terms if m), default=-1)
    return HuboPolynomial(n, terms)
