# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Signatures mirror :mod:`phaseqrng._kernels_py`."""

import numpy as np

from libc.math cimport cos, sin
from libc.stdint cimport uint64_t


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def toeplitz_parity(const uint64_t[::1] seed_words, const uint64_t[::1] x_words,
                    Py_ssize_t m):
    cdef Py_ssize_t nw = x_words.shape[0]
    if seed_words.shape[0] < ((m - 1) >> 6) + nw + 1:
        raise ValueError("seed_words too short for m rows")
    out = np.empty(m, dtype=np.uint8)
    cdef unsigned char[::1] y = out
    cdef Py_ssize_t i, w, q
    cdef unsigned int s
    cdef uint64_t acc
    with nogil:
        for i in range(m):
            q = i >> 6
            s = i & 63
            acc = 0
            if s == 0:
                for w in range(nw):
                    acc ^= seed_words[q + w] & x_words[w]
            else:
                for w in range(nw):
                    acc ^= ((seed_words[q + w] >> s)
                            | (seed_words[q + w + 1] << (64 - s))) & x_words[w]
            y[i] = __builtin_popcountll(acc) & 1
    return out


def superpose(const double[::1] phase, Py_ssize_t delay, Py_ssize_t order,
              double amplitude, double theta):
    cdef Py_ssize_t warm = order * delay
    cdef Py_ssize_t n_out = phase.shape[0] - warm
    if delay < 1 or order < 1 or n_out < 1:
        raise ValueError("phase path too short for delay * order")
    cdef Py_ssize_t n = phase.shape[0]
    cdef Py_ssize_t t, k, idx
    re_arr = np.empty(n)
    im_arr = np.empty(n)
    cre_arr = np.empty(order + 1)
    cim_arr = np.empty(order + 1)
    out = np.empty(n_out)
    cdef double[::1] re = re_arr, im = im_arr, cre = cre_arr, cim = cim_arr, o = out
    cdef double a = 1.0, sre, sim, dre, dim
    for k in range(1, order + 1):
        a *= amplitude
        cre[k] = a * cos(k * theta)
        cim[k] = -a * sin(k * theta)
    with nogil:
        for t in range(n):
            re[t] = cos(phase[t])
            im[t] = sin(phase[t])
        for t in range(n_out):
            idx = t + warm
            sre = 0.0
            sim = 0.0
            for k in range(1, order + 1):
                idx -= delay
                sre += cre[k] * re[idx] - cim[k] * im[idx]
                sim += cre[k] * im[idx] + cim[k] * re[idx]
            dre = re[t + warm] - sre
            dim = im[t + warm] - sim
            o[t] = dre * dre + dim * dim
    return out
