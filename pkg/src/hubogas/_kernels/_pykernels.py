"""Numpy implementations of the hot kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and the same in-place semantics.
"""
import numpy as np

NAME = "python"


def subset_sum_table(n, masks, coeffs):
    """Value of ``sum(coeffs[t] for masks[t] subset of b)`` for every b < 2**n."""
    table = np.zeros(1 << n, dtype=np.float64)
    np.add.at(table, np.asarray(masks, dtype=np.int64), np.asarray(coeffs, dtype=np.float64))
    # zeta transform over the subset lattice, one bit at a time
    for k in range(n):
        view = table.reshape(-1, 2, 1 << k)
        view[:, 1, :] += view[:, 0, :]
    return table


def fwht(vec):
    """Normalized Walsh-Hadamard transform of a complex vector, in place."""
    size = vec.shape[0]
    h = 1
    while h < size:
        view = vec.reshape(-1, 2, h)
        a = view[:, 0, :].copy()
        view[:, 0, :] += view[:, 1, :]
        view[:, 1, :] *= -1
        view[:, 1, :] += a
        h <<= 1
    vec *= 1.0 / np.sqrt(size)
    return vec


def controlled_phase_ladder(amps, mask, theta):
    """Multiply ``amps[b, l]`` by ``exp(1j*l*theta)`` on rows b that contain ``mask``."""
    rows = np.arange(amps.shape[0])
    sel = (rows & mask) == mask
    ladder = np.exp(1j * theta * np.arange(amps.shape[1]))
    amps[sel, :] *= ladder
    return amps


def apply_key_phases(amps, phi, sign):
    """Multiply ``amps[b, l]`` by ``exp(sign*1j*l*phi[b])`` for every row."""
    levels = np.arange(amps.shape[1], dtype=np.float64)
    amps *= np.exp((sign * 1j) * np.outer(phi, levels))
    return amps


def flip_negative_values(amps):
    """Negate the half of the value register whose most significant bit is set."""
    half = amps.shape[1] // 2
    amps[:, half:] *= -1
    return amps


def residual_norms(heff, r, symbols):
    """Squared residual ``||r - heff @ s||^2`` for every row ``s`` of ``symbols``."""
    diff = r[None, :] - symbols @ heff.T
    return (diff.real ** 2 + diff.imag ** 2).sum(axis=1)
