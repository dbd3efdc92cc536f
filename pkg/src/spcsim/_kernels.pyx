# Compiled hot kernels: in-place fast Walsh-Hadamard butterflies and
# bit-packed mask matvec/rmatvec. Mirrors `_kernels_np.py` exactly.

import numpy as np

cimport cython


def fwht_inplace(double[:, ::1] a):
    """Unnormalized natural-order Walsh-Hadamard transform of each row."""
    cdef Py_ssize_t batch = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    cdef Py_ssize_t r, h, i, j
    cdef double x, y
    for r in range(batch):
        h = 1
        while h < n:
            i = 0
            while i < n:
                for j in range(i, i + h):
                    x = a[r, j]
                    y = a[r, j + h]
                    a[r, j] = x + y
                    a[r, j + h] = x - y
                i += 2 * h
            h *= 2
    return np.asarray(a)


cdef unsigned char _CTZ8[256]
for _b in range(256):
    _t = 0
    if _b == 0:
        _CTZ8[_b] = 8
    else:
        while not (_b >> _t) & 1:
            _t += 1
        _CTZ8[_b] = _t


@cython.boundscheck(False)
@cython.wraparound(False)
def packed_matvec(const unsigned char[:, ::1] packed, const double[::1] x,
                  Py_ssize_t nbits, double[::1] out):
    """out[r] = sum of x[c] over the set bits c of packed row r.

    Uses per-byte subset-sum tables (256 entries per byte position, built
    once per call by DP over the lowest set bit).
    """
    cdef Py_ssize_t rows = packed.shape[0]
    cdef Py_ssize_t nbytes = packed.shape[1]
    cdef Py_ssize_t j, b, r, c
    cdef unsigned int t, low
    cdef double acc
    table_arr = np.zeros((nbytes, 256), dtype=np.float64)
    cdef double[:, ::1] table = table_arr
    for j in range(nbytes):
        for b in range(1, 256):
            low = b & (-b)
            t = _CTZ8[low]
            c = 8 * j + t
            if c < nbits:
                table[j, b] = table[j, b ^ low] + x[c]
            else:
                table[j, b] = table[j, b ^ low]
    for r in range(rows):
        acc = 0.0
        for j in range(nbytes):
            acc += table[j, packed[r, j]]
        out[r] = acc
    return np.asarray(out)


@cython.boundscheck(False)
@cython.wraparound(False)
def packed_rmatvec(const unsigned char[:, ::1] packed, const double[::1] y,
                   Py_ssize_t nbits, double[::1] out):
    """out[c] = sum of y[r] over rows r whose bit c is set."""
    cdef Py_ssize_t rows = packed.shape[0]
    cdef Py_ssize_t nbytes = packed.shape[1]
    cdef Py_ssize_t j, r, c
    cdef unsigned int b, t
    acc_arr = np.zeros((nbytes, 256), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    cdef Py_ssize_t i
    for i in range(out.shape[0]):
        out[i] = 0.0
    for r in range(rows):
        for j in range(nbytes):
            acc[j, packed[r, j]] += y[r]
    for j in range(nbytes):
        for b in range(1, 256):
            t = 0
            while t < 8:
                if (b >> t) & 1:
                    c = 8 * j + t
                    if c < nbits:
                        out[c] += acc[j, b]
                t += 1
    return np.asarray(out)
