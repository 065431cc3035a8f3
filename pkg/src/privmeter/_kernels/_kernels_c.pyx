# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled modular arithmetic kernels (scalar loops, no temporaries)."""

import numpy as np

cimport numpy as cnp

BACKEND = "c"

cdef extern from *:
    pass

cdef inline unsigned long long _pow_one(unsigned long long b,
                                        unsigned long long e,
                                        unsigned long long m) nogil:
    cdef unsigned long long r = 1
    b %= m
    while e:
        if e & 1:
            r = (r * b) % m
        b = (b * b) % m
        e >>= 1
    return r


def _check_modulus(m):
    m = int(m)
    if not 1 < m < (1 << 32):
        raise ValueError(f"modulus must be in (1, 2**32), got {m}")
    return m


def mul_mod(a, b, m):
    """Elementwise (a * b) % m on uint64 arrays (broadcasts)."""
    cdef unsigned long long mm = _check_modulus(m)
    a_arr, b_arr = np.broadcast_arrays(np.asarray(a, dtype=np.uint64),
                                       np.asarray(b, dtype=np.uint64))
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] av = np.ascontiguousarray(a_arr).ravel()
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] bv = np.ascontiguousarray(b_arr).ravel()
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(av.shape[0], dtype=np.uint64)
    cdef Py_ssize_t i, n = av.shape[0]
    with nogil:
        for i in range(n):
            out[i] = ((av[i] % mm) * (bv[i] % mm)) % mm
    return out.reshape(a_arr.shape)


def pow_mod(base, exp, m):
    """Elementwise pow(base, exp, m); exp may be a scalar."""
    cdef unsigned long long mm = _check_modulus(m)
    b_arr, e_arr = np.broadcast_arrays(np.asarray(base, dtype=np.uint64),
                                       np.asarray(exp, dtype=np.uint64))
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] bv = np.ascontiguousarray(b_arr).ravel()
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] ev = np.ascontiguousarray(e_arr).ravel()
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(bv.shape[0], dtype=np.uint64)
    cdef Py_ssize_t i, n = bv.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _pow_one(bv[i], ev[i], mm)
    return out.reshape(b_arr.shape)
