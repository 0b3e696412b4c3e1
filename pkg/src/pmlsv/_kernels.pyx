# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled matrix-vector product for 0/1 matrices stored as packed bits.

Row ``i`` of the matrix is ``packed[i]``, little-endian bit order: bit ``k`` of
byte ``b`` is column ``8 * b + k``. For each byte position a 256-entry table of
partial sums of ``x`` is built once per call, so each row costs one lookup per
byte instead of eight multiply-adds.
"""

import numpy as np

from libc.stdint cimport uint8_t


def packed_matvec(const uint8_t[:, ::1] packed, const double[::1] x, double scale):
    """Return ``scale * (B @ x)`` where ``B`` is the bit matrix in `packed`."""
    cdef Py_ssize_t n_rows = packed.shape[0]
    cdef Py_ssize_t n_bytes = packed.shape[1]
    cdef Py_ssize_t n_cols = x.shape[0]
    if n_cols > 8 * n_bytes:
        raise ValueError("x is longer than the packed row width")

    table_arr = np.empty((n_bytes, 256), dtype=np.float64)
    cdef double[:, ::1] table = table_arr
    cdef double xb[8]
    cdef Py_ssize_t i, b, v, k, h
    for b in range(n_bytes):
        for k in range(8):
            xb[k] = x[8 * b + k] if 8 * b + k < n_cols else 0.0
        table[b, 0] = 0.0
        # entries [h, 2h) extend entries [0, h) by bit k
        for k in range(8):
            h = 1 << k
            for v in range(h):
                table[b, h + v] = table[b, v] + xb[k]

    out_arr = np.empty(n_rows, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef const uint8_t* row
    cdef double* tab = &table[0, 0]
    cdef double s0, s1, s2, s3
    cdef Py_ssize_t tail = n_bytes - n_bytes % 4
    for i in range(n_rows):
        row = &packed[i, 0]
        s0 = s1 = s2 = s3 = 0.0
        for b in range(0, tail, 4):
            s0 += tab[(b << 8) + row[b]]
            s1 += tab[((b + 1) << 8) + row[b + 1]]
            s2 += tab[((b + 2) << 8) + row[b + 2]]
            s3 += tab[((b + 3) << 8) + row[b + 3]]
        for b in range(tail, n_bytes):
            s0 += tab[(b << 8) + row[b]]
        out[i] = ((s0 + s1) + (s2 + s3)) * scale
    return out_arr
