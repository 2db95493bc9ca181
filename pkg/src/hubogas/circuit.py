"""Statevector simulation of the GAS circuit family.

The register layout is key-register first: the flat amplitude index is
``key * 2**m + value`` where ``key`` is the big-endian integer of the
assignment ``b`` and ``value`` is the unsigned reading of the ``m``-qubit
value register. Values are decoded as two's complement, so the register's
most significant qubit is the sign.

The state preparation operator is

    A_y = IQFT_value . prod_t CU_G(theta_t) . H^(n+m)

with one controlled phase ladder per polynomial term. A ladder with angle
``theta`` multiplies ``|b>|l>`` by ``exp(1j * l * theta)`` whenever every
control qubit of ``b`` is set, so the accumulated phase on ``|b>|l>`` is
``l * 2*pi*(E(b) - y) / 2**m`` and the inverse QFT reads out ``E(b) - y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .poly import HuboPolynomial, index_to_bits

__all__ = [
    "PhaseRotation",
    "PreparedCircuit",
    "Statevector",
    "MeasurementOutcome",
    "prepare",
    "apply_state_preparation",
    "apply_state_preparation_adjoint",
    "fejer_amplitudes",
    "apply_oracle",
    "reflect_about_zero",
    "apply_diffusion",
    "grover_power",
    "measure",
    "probabilities",
    "optimal_rotation_count",
    "grover_success_probability",
    "signed_value",
    "dump_circuit",
    "dump_amplitudes",
]


@dataclass(frozen=True)
class PhaseRotation:
    """A (multi-)controlled ``U_G(theta)`` ladder over the value register.

    ``controls`` are key-register variable indices; an empty tuple means the
    ladder is applied unconditionally. The ladder itself is
    ``R(2**(m-1) theta) x ... x R(theta)``.
    """

    theta: float
    controls: tuple[int, ...]

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")

    def ladder_angles(self, m: int) -> list[float]:
        """Per-qubit phase-gate angles, most significant value qubit first."""
        return [(2 ** (m - 1 - k)) * self.theta for k in range(m)]


@dataclass
class PreparedCircuit:
    """The operator ``A_y`` for a polynomial, threshold and register width."""

    poly: HuboPolynomial
    y: float
    m: int
    rotations: list[PhaseRotation]
    _phi: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.poly.n

    @property
    def num_qubits(self) -> int:
        return self.n + self.m

    def key_phases(self) -> np.ndarray:
        """Total ladder angle accumulated by each key state, ``2 pi (E(b)-y) / 2**m``."""
        if self._phi is None:
            masks = np.array(
                [sum(1 << (self.n - 1 - i) for i in rot.controls) for rot in self.rotations],
                dtype=np.int64,
            )
            thetas = np.array([rot.theta for rot in self.rotations], dtype=np.float64)
            self._phi = _kernels.subset_sum_table(self.n, masks, thetas)
        return self._phi


@dataclass
class Statevector:
    """Amplitudes over ``n_key + n_val`` qubits; operators mutate ``amps`` in place."""

    n_key: int
    n_val: int
    amps: np.ndarray

    @classmethod
    def zero(cls, n_key: int, n_val: int) -> "Statevector":
        amps = np.zeros(1 << (n_key + n_val), dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_key, n_val, amps)

    @property
    def grid(self) -> np.ndarray:
        """``(2**n_key, 2**n_val)`` view of the amplitudes."""
        return self.amps.reshape(1 << self.n_key, 1 << self.n_val)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amps, self.amps).real))

    def copy(self) -> "Statevector":
        return Statevector(self.n_key, self.n_val, self.amps.copy())


@dataclass(frozen=True)
class MeasurementOutcome:
    key_bits: tuple[int, ...]
    value_register: int


def signed_value(level: int, m: int) -> int:
    """Two's-complement reading of an unsigned ``m``-bit register value."""
    return level - (1 << m) if level >= (1 << (m - 1)) else level


def prepare(poly: HuboPolynomial, y: float, m: int) -> PreparedCircuit:
    """Build ``A_y`` with one ladder per nonzero term of ``poly - y``.

    Each term ``c * prod b_i`` becomes a ladder with ``theta = 2 pi c / 2**m``
    controlled on its variables; the threshold is folded into the constant.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    shifted = poly - y
    scale = 2.0 * math.pi / (1 << m)
    rotations = [PhaseRotation(scale * c, mono) for mono, c in shifted]
    return PreparedCircuit(poly, float(y), m, rotations)


def _iqft_value(state: Statevector) -> None:
    grid = state.grid
    grid[...] = np.fft.fft(grid, axis=1, norm="ortho")


def _qft_value(state: Statevector) -> None:
    grid = state.grid
    grid[...] = np.fft.ifft(grid, axis=1, norm="ortho")


def _apply_a(state: Statevector, circ: PreparedCircuit) -> Statevector:
    _kernels.fwht(state.amps)
    _kernels.apply_key_phases(state.grid, circ.key_phases(), 1.0)
    _iqft_value(state)
    return state


def apply_state_preparation(circ: PreparedCircuit, gatewise: bool = False) -> Statevector:
    """Return ``A_y |0>``.

    With ``gatewise=True`` every controlled ladder is applied one at a time,
    exactly as emitted by :func:`prepare`; the default folds the ladders into
    one diagonal phase per key state first.
    """
    state = Statevector.zero(circ.n, circ.m)
    if not gatewise:
        return _apply_a(state, circ)
    _kernels.fwht(state.amps)
    grid = state.grid
    for rot in circ.rotations:
        mask = sum(1 << (circ.n - 1 - i) for i in rot.controls)
        _kernels.controlled_phase_ladder(grid, mask, rot.theta)
    _iqft_value(state)
    return state


def apply_state_preparation_adjoint(state: Statevector, circ: PreparedCircuit) -> Statevector:
    """Apply ``A_y^H`` in place."""
    _qft_value(state)
    _kernels.apply_key_phases(state.grid, circ.key_phases(), -1.0)
    _kernels.fwht(state.amps)
    return state


def fejer_amplitudes(a: float, m: int) -> np.ndarray:
    """Value-register amplitudes after encoding the real number ``a`` on ``m`` qubits.

    Entry ``l`` is ``<g(2 pi a / 2**m), g(2 pi l / 2**m)>`` with
    ``g(t) = [1, e^{jt}, ..., e^{j(2**m-1)t}] / sqrt(2**m)``, evaluated with
    the closed-form Dirichlet kernel. Index ``l`` is the unsigned register
    value; use :func:`signed_value` to read it.
    """
    size = 1 << m
    if not (-(size // 2) <= a < size // 2):
        raise ValueError(f"a={a} outside the representable range for m={m}")
    levels = np.arange(size)
    delta = 2.0 * math.pi * (a - levels) / size
    out = np.empty(size, dtype=np.complex128)
    half = np.sin(delta / 2.0)
    regular = np.abs(half) > 1e-12
    d = delta[regular]
    out[regular] = np.exp(0.5j * (size - 1) * d) * np.sin(size * d / 2.0) / (size * half[regular])
    for idx in np.flatnonzero(~regular):
        k = np.arange(size)
        out[idx] = np.exp(1j * k * delta[idx]).sum() / size
    return out


def apply_oracle(state: Statevector) -> Statevector:
    """Z on the value register's sign qubit: negate every negative-value branch."""
    _kernels.flip_negative_values(state.grid)
    return state


def reflect_about_zero(amps: np.ndarray) -> np.ndarray:
    """The diagonal operator with +1 on ``|0...0>`` and -1 elsewhere, in place."""
    first = amps[0]
    amps *= -1
    amps[0] = first
    return amps


def apply_diffusion(state: Statevector, circ: PreparedCircuit) -> Statevector:
    """Apply ``A_y D A_y^H`` in place (reflection about ``A_y|0>``)."""
    apply_state_preparation_adjoint(state, circ)
    reflect_about_zero(state.amps)
    return _apply_a(state, circ)


def grover_power(circ: PreparedCircuit, L: int) -> Statevector:
    """Return ``G^L A_y |0>`` with ``G = A_y D A_y^H O``."""
    if L < 0:
        raise ValueError("L must be non-negative")
    state = apply_state_preparation(circ)
    for _ in range(L):
        apply_oracle(state)
        apply_diffusion(state, circ)
    return state


def probabilities(state: Statevector) -> np.ndarray:
    return state.amps.real ** 2 + state.amps.imag ** 2


def measure(state: Statevector, rng: np.random.Generator) -> MeasurementOutcome:
    """Sample one basis state without collapsing ``state``."""
    cdf = np.cumsum(probabilities(state))
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    idx = min(idx, cdf.shape[0] - 1)
    key, level = divmod(idx, 1 << state.n_val)
    return MeasurementOutcome(index_to_bits(key, state.n_key), signed_value(level, state.n_val))


def optimal_rotation_count(N: int, N_s: int) -> int:
    """``floor(pi/4 * sqrt(N / N_s))``."""
    if N_s <= 0:
        raise ValueError("optimal rotation count is undefined without solutions")
    if N_s > N:
        raise ValueError("N_s cannot exceed N")
    return int(math.floor(math.pi / 4.0 * math.sqrt(N / N_s)))


def grover_success_probability(N: int, N_s: int, L: int) -> float:
    """``sin^2((2L+1) asin(sqrt(N_s/N)))``, the ideal amplification curve."""
    if N_s <= 0:
        return 0.0
    theta = math.asin(math.sqrt(N_s / N))
    return math.sin((2 * L + 1) * theta) ** 2


def dump_circuit(circ: PreparedCircuit) -> str:
    """Text listing: ``m``, ``y`` headers, then ``theta/pi controls...`` per ladder."""
    lines = [f"m {circ.m}", f"y {circ.y!r}"]
    for rot in circ.rotations:
        lines.append(" ".join([repr(rot.theta / math.pi), *map(str, rot.controls)]))
    return "\n".join(lines) + "\n"


def dump_amplitudes(state: Statevector, tol: float = 0.0) -> str:
    """``index real imag`` lines for every amplitude with modulus above ``tol``."""
    lines = []
    for idx, amp in enumerate(state.amps):
        if abs(amp) > tol:
            lines.append(f"{idx} {float(amp.real)!r} {float(amp.imag)!r}")
    return "\n".join(lines) + "\n"


def joint_distribution(state: Statevector, tol: float = 1e-15) -> dict[tuple[tuple[int, ...], int], float]:
    """Map ``(key_bits, signed value) -> probability`` for every non-negligible basis state."""
    probs = probabilities(state).reshape(1 << state.n_key, 1 << state.n_val)
    out = {}
    for key, level in zip(*np.nonzero(probs > tol)):
        out[(index_to_bits(int(key), state.n_key), signed_value(int(level), state.n_val))] = float(
            probs[key, level]
        )
    return out


def key_marginal(state: Statevector) -> np.ndarray:
    """Probability of each key state, summed over the value register."""
    return probabilities(state).reshape(1 << state.n_key, 1 << state.n_val).sum(axis=1)


def bits_label(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)
