# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan kernels; same contract as ``_scan_py``."""

import numpy as np

from libc.stdint cimport uint8_t, uint64_t

cdef uint64_t INVALID = 0xFFFFFFFFFFFFFFFFULL
cdef int ID_BITS = 48
cdef uint64_t ID_MASK = (1ULL << 48) - 1


def scan_codes(const float[:, ::1] lut, const uint8_t[:, ::1] codes,
               const uint64_t[::1] ids):
    cdef Py_ssize_t n = codes.shape[0]
    cdef Py_ssize_t nsub = codes.shape[1]
    cdef Py_ssize_t i, m, k = 0
    cdef float acc
    out_d = np.empty(n, dtype=np.float32)
    out_i = np.empty(n, dtype=np.uint64)
    cdef float[::1] d = out_d
    cdef uint64_t[::1] oi = out_i
    with nogil:
        for i in range(n):
            if ids[i] == INVALID:
                continue
            acc = 0.0
            for m in range(nsub):
                acc = acc + lut[m, codes[i, m]]
            d[k] = acc
            oi[k] = ids[i]
            k += 1
    return out_d[:k], out_i[:k]


def scan_misc(const float[:, ::1] lut, const uint8_t[:, ::1] codes,
              const uint64_t[::1] ids, const uint8_t[::1] visited):
    cdef Py_ssize_t n = codes.shape[0]
    cdef Py_ssize_t nsub = codes.shape[1]
    cdef Py_ssize_t i, m, k = 0
    cdef float acc
    cdef uint64_t sid
    out_d = np.empty(n, dtype=np.float32)
    out_i = np.empty(n, dtype=np.uint64)
    cdef float[::1] d = out_d
    cdef uint64_t[::1] oi = out_i
    with nogil:
        for i in range(n):
            acc = 0.0
            for m in range(nsub):
                acc = acc + lut[m, codes[i, m]]
            sid = ids[i]
            if visited[<Py_ssize_t>((sid >> ID_BITS) - 1)]:
                continue
            d[k] = acc
            oi[k] = sid & ID_MASK
            k += 1
    return out_d[:k], out_i[:k], n
