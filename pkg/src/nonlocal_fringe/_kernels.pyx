# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops; :mod:`nonlocal_fringe._fallback` mirrors each one in numpy."""

import numpy as np
from libc.math cimport sqrt, cos, sin, floor


def ar1_field(const double complex[::1] noise, double rho):
    cdef Py_ssize_t n = noise.shape[0], i
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double s = sqrt(1.0 - rho * rho)
    if n == 0:
        return out
    o[0] = noise[0]
    for i in range(1, n):
        o[i] = rho * o[i - 1] + s * noise[i]
    return out


def pair_histogram(const double[::1] t1, const double[::1] t2, double tau_max, double bin_width):
    cdef Py_ssize_t nbins = <Py_ssize_t>(2.0 * tau_max / bin_width + 0.5)
    counts = np.zeros(nbins, dtype=np.int64)
    cdef long long[::1] c = counts
    cdef Py_ssize_t n1 = t1.shape[0], n2 = t2.shape[0], i, j, lo = 0, k
    cdef double t, d
    for i in range(n1):
        t = t1[i]
        while lo < n2 and t2[lo] - t < -tau_max:
            lo += 1
        j = lo
        while j < n2:
            d = t2[j] - t
            if d >= tau_max:
                break
            k = <Py_ssize_t>floor((d + tau_max) / bin_width)
            if 0 <= k < nbins:
                c[k] += 1
            j += 1
    return counts


def classify_trials(
    const double[::1] u_herald,
    const double[::1] u_pattern,
    const double[::1] dtheta,
    double psi,
    double genuine_fraction,
    const double[::1] a,
    const double[::1] b_re,
    const double[::1] b_im,
    double q_noise,
):
    counts = np.zeros(4, dtype=np.int64)
    cdef long long[::1] c = counts
    cdef Py_ssize_t n = u_herald.shape[0], i, k
    cdef double th, cs, sn, acc, u
    for i in range(n):
        u = u_pattern[i]
        if u_herald[i] < genuine_fraction:
            th = psi + dtheta[i]
            cs = cos(th)
            sn = sin(th)
            acc = 0.0
            for k in range(4):
                acc = acc + (a[k] + b_re[k] * cs - b_im[k] * sn)
                if u < acc:
                    c[k] += 1
                    break
        elif u < 4.0 * q_noise:
            k = <Py_ssize_t>(u / q_noise)
            if k > 3:
                k = 3
            c[k] += 1
    return counts
