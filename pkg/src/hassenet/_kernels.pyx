# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tableau and GF(2) kernels.

Mirrors ``_kernels_py`` exactly; ``hassenet.kernels`` picks one at import.
Tableaux are ``x, z`` of shape (2n, n) and ``r`` of shape (2n,), all uint8,
rows 0..n-1 destabilizers and n..2n-1 stabilizers.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint8_t, uint64_t, int32_t
from libc.stdlib cimport malloc, free, calloc

cnp.import_array()

DEF H = 0
DEF S = 1
DEF SDG = 2
DEF X = 3
DEF Y = 4
DEF Z = 5
DEF CNOT = 6
DEF CZ = 7
DEF SWAP = 8


cdef inline void _gate(uint8_t[:, ::1] x, uint8_t[:, ::1] z, uint8_t[::1] r,
                       int code, int a, int b) nogil:
    cdef Py_ssize_t i, rows = x.shape[0]
    cdef uint8_t t, xa, za, xb, zb
    if code == H:
        for i in range(rows):
            xa = x[i, a]
            za = z[i, a]
            r[i] ^= xa & za
            x[i, a] = za
            z[i, a] = xa
    elif code == S:
        for i in range(rows):
            xa = x[i, a]
            r[i] ^= xa & z[i, a]
            z[i, a] ^= xa
    elif code == SDG:
        for i in range(rows):
            xa = x[i, a]
            r[i] ^= xa & (z[i, a] ^ 1)
            z[i, a] ^= xa
    elif code == X:
        for i in range(rows):
            r[i] ^= z[i, a]
    elif code == Y:
        for i in range(rows):
            r[i] ^= x[i, a] ^ z[i, a]
    elif code == Z:
        for i in range(rows):
            r[i] ^= x[i, a]
    elif code == CNOT:
        for i in range(rows):
            xa = x[i, a]
            za = z[i, a]
            xb = x[i, b]
            zb = z[i, b]
            r[i] ^= xa & zb & (xb ^ za ^ 1)
            x[i, b] = xb ^ xa
            z[i, a] = za ^ zb
    elif code == CZ:
        for i in range(rows):
            xa = x[i, a]
            za = z[i, a]
            xb = x[i, b]
            zb = z[i, b]
            r[i] ^= xa & xb & (za ^ zb)
            z[i, a] = za ^ xb
            z[i, b] = zb ^ xa
    elif code == SWAP:
        for i in range(rows):
            t = x[i, a]
            x[i, a] = x[i, b]
            x[i, b] = t
            t = z[i, a]
            z[i, a] = z[i, b]
            z[i, b] = t


def apply_gate(uint8_t[:, ::1] x, uint8_t[:, ::1] z, uint8_t[::1] r,
               int code, int a, int b=-1):
    with nogil:
        _gate(x, z, r, code, a, b)


def apply_program(uint8_t[:, ::1] x, uint8_t[:, ::1] z, uint8_t[::1] r,
                  int32_t[:, ::1] ops):
    cdef Py_ssize_t k
    with nogil:
        for k in range(ops.shape[0]):
            _gate(x, z, r, ops[k, 0], ops[k, 1], ops[k, 2])


cdef inline int _g(uint8_t x1, uint8_t z1, uint8_t x2, uint8_t z2) nogil:
    if x1 == 0 and z1 == 0:
        return 0
    if x1 == 1 and z1 == 1:
        return <int>z2 - <int>x2
    if x1 == 1:
        return <int>z2 * (2 * <int>x2 - 1)
    return <int>x2 * (1 - 2 * <int>z2)


cdef void _rowsum_into(uint8_t* hx, uint8_t* hz, uint8_t* hr,
                       uint8_t* ix, uint8_t* iz, uint8_t ir, Py_ssize_t n) nogil:
    cdef Py_ssize_t j
    cdef int acc = 2 * hr[0] + 2 * ir
    for j in range(n):
        acc += _g(ix[j], iz[j], hx[j], hz[j])
    acc = ((acc % 4) + 4) % 4
    hr[0] = 1 if acc == 2 else 0
    for j in range(n):
        hx[j] ^= ix[j]
        hz[j] ^= iz[j]


def measure_z(uint8_t[:, ::1] x, uint8_t[:, ::1] z, uint8_t[::1] r,
              int q, int rbit):
    """Measure qubit ``q`` in Z; ``rbit`` is used when the outcome is random.

    Returns ``(outcome, was_random)``.
    """
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t i, j, p = -1
    cdef uint8_t* sx
    cdef uint8_t* sz
    cdef uint8_t sr = 0
    for i in range(n, 2 * n):
        if x[i, q]:
            p = i
            break
    if p >= 0:
        with nogil:
            for i in range(2 * n):
                if i != p and x[i, q]:
                    _rowsum_into(&x[i, 0], &z[i, 0], &r[i],
                                 &x[p, 0], &z[p, 0], r[p], n)
            for j in range(n):
                x[p - n, j] = x[p, j]
                z[p - n, j] = z[p, j]
                x[p, j] = 0
                z[p, j] = 0
            r[p - n] = r[p]
            z[p, q] = 1
            r[p] = rbit & 1
        return int(rbit & 1), True
    sx = <uint8_t*> calloc(n, 1)
    sz = <uint8_t*> calloc(n, 1)
    try:
        with nogil:
            for i in range(n):
                if x[i, q]:
                    _rowsum_into(sx, sz, &sr, &x[i + n, 0], &z[i + n, 0],
                                 r[i + n], n)
    finally:
        free(sx)
        free(sz)
    return int(sr), False


def gf2_rank(mat):
    """Rank over GF(2) of a 0/1 matrix, by bit-packed elimination."""
    cdef cnp.ndarray[uint8_t, ndim=2] m = np.ascontiguousarray(mat, dtype=np.uint8)
    cdef Py_ssize_t rows = m.shape[0], cols = m.shape[1]
    if rows == 0 or cols == 0:
        return 0
    cdef Py_ssize_t words = (cols + 63) // 64
    cdef uint64_t* buf = <uint64_t*> calloc(rows * words, sizeof(uint64_t))
    cdef uint64_t* tmp
    cdef Py_ssize_t i, j, w, c, piv, rank = 0
    cdef uint64_t bit, t
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(rows):
                for j in range(cols):
                    if m[i, j] & 1:
                        buf[i * words + j // 64] |= (<uint64_t>1) << (j % 64)
            for c in range(cols):
                if rank == rows:
                    break
                w = c // 64
                bit = (<uint64_t>1) << (c % 64)
                piv = -1
                for i in range(rank, rows):
                    if buf[i * words + w] & bit:
                        piv = i
                        break
                if piv < 0:
                    continue
                if piv != rank:
                    for j in range(words):
                        t = buf[piv * words + j]
                        buf[piv * words + j] = buf[rank * words + j]
                        buf[rank * words + j] = t
                for i in range(rank + 1, rows):
                    if buf[i * words + w] & bit:
                        for j in range(w, words):
                            buf[i * words + j] ^= buf[rank * words + j]
                rank += 1
    finally:
        free(buf)
    return int(rank)
