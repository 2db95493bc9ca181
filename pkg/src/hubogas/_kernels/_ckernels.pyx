# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()

NAME = "cython"


def subset_sum_table(int n, masks, coeffs):
    cdef cnp.int64_t[::1] mk = np.ascontiguousarray(masks, dtype=np.int64)
    cdef double[::1] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    out = np.zeros(size, dtype=np.float64)
    cdef double[::1] table = out
    cdef Py_ssize_t t, b, bit
    for t in range(mk.shape[0]):
        table[mk[t]] += cf[t]
    for bit in range(n):
        step = (<Py_ssize_t>1) << bit
        for b in range(size):
            if b & step:
                table[b] += table[b ^ step]
    return out


def fwht(double complex[::1] vec):
    cdef Py_ssize_t size = vec.shape[0]
    cdef Py_ssize_t h = 1, i, j
    cdef double complex a, c
    cdef double scale = 1.0 / sqrt(<double>size)
    while h < size:
        for i in range(0, size, 2 * h):
            for j in range(i, i + h):
                a = vec[j]
                c = vec[j + h]
                vec[j] = a + c
                vec[j + h] = a - c
        h <<= 1
    for i in range(size):
        vec[i] = vec[i] * scale
    return np.asarray(vec)


def controlled_phase_ladder(double complex[:, ::1] amps, long long mask, double theta):
    cdef Py_ssize_t rows = amps.shape[0], cols = amps.shape[1], b, l
    cdef double complex[::1] ladder = np.empty(cols, dtype=np.complex128)
    for l in range(cols):
        ladder[l] = cos(theta * l) + 1j * sin(theta * l)
    for b in range(rows):
        if (b & mask) == mask:
            for l in range(cols):
                amps[b, l] = amps[b, l] * ladder[l]
    return np.asarray(amps)


def apply_key_phases(double complex[:, ::1] amps, phi, double sign):
    cdef double[::1] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef Py_ssize_t rows = amps.shape[0], cols = amps.shape[1], b, l
    cdef double angle
    for b in range(rows):
        for l in range(cols):
            angle = sign * ph[b] * l
            amps[b, l] = amps[b, l] * (cos(angle) + 1j * sin(angle))
    return np.asarray(amps)


def flip_negative_values(double complex[:, ::1] amps):
    cdef Py_ssize_t rows = amps.shape[0], cols = amps.shape[1], b, l
    cdef Py_ssize_t half = cols // 2
    for b in range(rows):
        for l in range(half, cols):
            amps[b, l] = -amps[b, l]
    return np.asarray(amps)


def residual_norms(heff, r, symbols):
    cdef double complex[:, ::1] h = np.ascontiguousarray(heff, dtype=np.complex128)
    cdef double complex[::1] rv = np.ascontiguousarray(r, dtype=np.complex128)
    cdef double complex[:, ::1] s = np.ascontiguousarray(symbols, dtype=np.complex128)
    cdef Py_ssize_t K = s.shape[0], nr = h.shape[0], nt = h.shape[1], k, u, t
    out = np.empty(K, dtype=np.float64)
    cdef double[::1] o = out
    cdef double complex acc
    cdef double total
    for k in range(K):
        total = 0.0
        for u in range(nr):
            acc = rv[u]
            for t in range(nt):
                acc = acc - h[u, t] * s[k, t]
            total += acc.real * acc.real + acc.imag * acc.imag
        o[k] = total
    return out
