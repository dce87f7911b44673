# cython: language_level=3
"""Compiled Pauli-frame trial loop.

Must stay bit-for-bit identical to ``carrier_sim._frame_py``.
"""
import numpy as np

cimport numpy as cnp
from libc.stdint cimport int8_t, int64_t, uint64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline int popcount_parity(uint64_t v) nogil:
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return <int>(v & 1)


def run_trials(
    uint64_t seed,
    int64_t start,
    int64_t trials,
    const double[::1] cum,
    const uint64_t[::1] term_x,
    const uint64_t[::1] term_z,
    const int8_t[::1] term_sign,
    const int64_t[:, ::1] gates,
    int n_qubits,
):
    cdef cnp.ndarray[uint64_t, ndim=1] out_x = np.empty(trials, dtype=np.uint64)
    cdef cnp.ndarray[uint64_t, ndim=1] out_z = np.empty(trials, dtype=np.uint64)
    cdef cnp.ndarray[int8_t, ndim=1] out_s = np.empty(trials, dtype=np.int8)
    cdef uint64_t[::1] ox = out_x
    cdef uint64_t[::1] oz = out_z
    cdef int8_t[::1] osg = out_s
    cdef Py_ssize_t n_terms = cum.shape[0]
    cdef Py_ssize_t n_gates = gates.shape[0]
    cdef uint64_t base = mix64(seed)
    cdef Py_ssize_t t, i, g
    cdef uint64_t r, x, z, bc, bt, xb, zb
    cdef double u
    cdef int8_t s
    cdef int64_t kind
    with nogil:
        for t in range(trials):
            r = mix64(base + <uint64_t>(start + t + 1) * GOLDEN)
            u = <double>(r >> 11) * (1.0 / 9007199254740992.0)
            i = 0
            while i < n_terms - 1 and u >= cum[i]:
                i += 1
            x = term_x[i]
            z = term_z[i]
            s = term_sign[i]
            for g in range(n_gates):
                kind = gates[g, 0]
                bc = (<uint64_t>1) << (n_qubits - 1 - gates[g, 1])
                if kind == 0:
                    bt = (<uint64_t>1) << (n_qubits - 1 - gates[g, 2])
                    if x & bc:
                        x ^= bt
                    if z & bt:
                        z ^= bc
                elif kind == 1:
                    xb = x & bc
                    zb = z & bc
                    if xb and zb:
                        s = -s
                    x = (x & ~bc) | zb
                    z = (z & ~bc) | xb
                elif kind == 2:
                    if z & bc:
                        s = -s
                elif kind == 3:
                    if x & bc:
                        s = -s
            ox[t] = x
            oz[t] = z
            osg[t] = s
    return out_x, out_z, out_s


def count_parity(const uint64_t[::1] words, uint64_t mask):
    """Number of words with odd overlap with ``mask``."""
    cdef Py_ssize_t t
    cdef int64_t total = 0
    with nogil:
        for t in range(words.shape[0]):
            total += popcount_parity(words[t] & mask)
    return total
