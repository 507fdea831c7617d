# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels.

Mirror of the pure-Python kernels, expression for expression; the build
disables floating-point contraction so both backends emit identical bytes.
See the Python module for the semantics; this file only changes the loop
machinery (typed memoryviews, nogil).
"""

import numpy as np

from libc.math cimport INFINITY, NAN, ceil, exp, log, pow

cdef unsigned long long _GAMMA = 0x9E3779B97F4A7C15ULL
cdef double _U01 = 2.0 ** -53

DEF _KIND_ATOM = 0
DEF _FLAG_SURVIVED = 0
DEF _FLAG_EXPLODED = 1
DEF _FLAG_INCONCLUSIVE = 2
DEF _FLAG_EXTINCT = 3

KIND_ATOM = 0
KIND_PARETO = 1

FLAG_SURVIVED = 0
FLAG_EXPLODED = 1
FLAG_INCONCLUSIVE = 2
FLAG_EXTINCT = 3


cdef inline unsigned long long _mix64(unsigned long long z) nogil:
    z ^= z >> 30
    z *= 0xBF58476D1CE4E5B9ULL
    z ^= z >> 27
    z *= 0x94D049BB133111EBULL
    z ^= z >> 31
    return z


cdef inline unsigned long long _stream_state(unsigned long long seed, unsigned long long path) nogil:
    return _mix64(seed ^ _mix64((path + 1) * _GAMMA))


def u01_stream(seed, path, n):
    """First n uniforms of the (seed, path) stream; test hook."""
    cdef double[::1] out = np.empty(n)
    cdef unsigned long long s = _stream_state(seed, path)
    cdef Py_ssize_t i
    for i in range(n):
        s = s + _GAMMA
        out[i] = ((_mix64(s) >> 11) + 0.5) * _U01
    return np.asarray(out)


def kernel_backend():
    return "cython"


def csbp_paths(
    double x,
    double D,
    double[::1] masses,
    long long[::1] kinds,
    double[::1] par_a,
    double[::1] par_b,
    double[::1] times,
    double horizon,
    double M,
    long long max_events,
    unsigned long long seed,
    Py_ssize_t path_lo,
    Py_ssize_t path_hi,
    double[:, ::1] states,
    double[::1] absorb_time,
    signed char[::1] flags,
    long long[::1] events,
):
    cdef Py_ssize_t n_parts = masses.shape[0]
    cdef Py_ssize_t n_times = times.shape[0]
    cdef double total_mass = 0.0
    cdef double[::1] cum = np.empty(n_parts)
    cdef Py_ssize_t i, k, path
    cdef unsigned long long s
    cdef double z, tn, u, E, tau, arg, te, tc, stop, r, h, atime
    cdef long long ev
    cdef signed char flag

    for i in range(n_parts):
        total_mass += masses[i]
        cum[i] = total_mass

    with nogil:
        for path in range(path_lo, path_hi):
            s = _stream_state(seed, path)
            z = x
            tn = 0.0
            k = 0
            ev = 0
            flag = _FLAG_SURVIVED
            atime = INFINITY

            while True:
                s = s + _GAMMA
                u = ((_mix64(s) >> 11) + 0.5) * _U01
                E = -log(u)
                if total_mass <= 0.0:
                    tau = INFINITY
                elif D == 0.0:
                    tau = E / (total_mass * z)
                else:
                    arg = 1.0 - E * D / (total_mass * z)
                    tau = INFINITY if arg <= 0.0 else -log(arg) / D
                te = tn + tau
                if D < 0.0:
                    tc = tn + log(M / z) / -D
                else:
                    tc = INFINITY
                stop = te if te < tc else tc

                while k < n_times and times[k] < stop and times[k] <= horizon:
                    states[path, k] = z * exp(-D * (times[k] - tn))
                    k += 1

                if tc <= te and tc <= horizon:
                    flag = _FLAG_EXPLODED
                    atime = tc
                    while k < n_times:
                        states[path, k] = INFINITY
                        k += 1
                    break
                if te > horizon:
                    break

                z = z * exp(-D * tau)
                i = 0
                if n_parts > 1:
                    s = s + _GAMMA
                    u = ((_mix64(s) >> 11) + 0.5) * _U01
                    r = u * total_mass
                    while i < n_parts - 1 and r > cum[i]:
                        i += 1
                if kinds[i] == _KIND_ATOM:
                    h = par_a[i]
                else:
                    s = s + _GAMMA
                    u = ((_mix64(s) >> 11) + 0.5) * _U01
                    h = par_a[i] * pow(u, -par_b[i])
                z = z + h
                ev += 1
                tn = te

                if z >= M:
                    flag = _FLAG_EXPLODED
                    atime = tn
                    while k < n_times:
                        states[path, k] = INFINITY
                        k += 1
                    break
                if ev >= max_events:
                    flag = _FLAG_INCONCLUSIVE
                    atime = NAN
                    while k < n_times:
                        states[path, k] = NAN
                        k += 1
                    break

            absorb_time[path] = atime
            flags[path] = flag
            events[path] = ev


def dsbp_paths(
    double n0,
    double c,
    double[::1] cdf,
    double tail_coef,
    double tail_inv_alpha,
    double[::1] times,
    double horizon,
    double M,
    long long max_events,
    unsigned long long seed,
    Py_ssize_t path_lo,
    Py_ssize_t path_hi,
    double[:, ::1] states,
    double[::1] absorb_time,
    signed char[::1] flags,
    long long[::1] events,
):
    cdef Py_ssize_t size = cdf.shape[0]
    cdef Py_ssize_t n_times = times.shape[0]
    cdef double top = cdf[size - 1]
    cdef Py_ssize_t k, path, lo, hi, mid
    cdef unsigned long long s
    cdef double z, tn, u, te, j, atime
    cdef long long ev
    cdef signed char flag

    with nogil:
        for path in range(path_lo, path_hi):
            s = _stream_state(seed, path)
            z = n0
            tn = 0.0
            k = 0
            ev = 0
            flag = _FLAG_SURVIVED
            atime = INFINITY

            while True:
                s = s + _GAMMA
                u = ((_mix64(s) >> 11) + 0.5) * _U01
                te = tn + -log(u) / (c * z)

                while k < n_times and times[k] < te and times[k] <= horizon:
                    states[path, k] = z
                    k += 1

                if te > horizon:
                    break

                s = s + _GAMMA
                u = ((_mix64(s) >> 11) + 0.5) * _U01
                if u > top:
                    j = ceil(pow((1.0 - u) * tail_coef, -tail_inv_alpha))
                    if j < size:
                        j = size
                else:
                    lo = 0
                    hi = size
                    while lo < hi:
                        mid = (lo + hi) >> 1
                        if cdf[mid] < u:
                            lo = mid + 1
                        else:
                            hi = mid
                    j = lo
                z = z - 1.0 + j
                ev += 1
                tn = te

                if z <= 0.0:
                    flag = _FLAG_EXTINCT
                    atime = tn
                    while k < n_times:
                        states[path, k] = 0.0
                        k += 1
                    break
                if z >= M:
                    flag = _FLAG_EXPLODED
                    atime = tn
                    while k < n_times:
                        states[path, k] = INFINITY
                        k += 1
                    break
                if ev >= max_events:
                    flag = _FLAG_INCONCLUSIVE
                    atime = NAN
                    while k < n_times:
                        states[path, k] = NAN
                        k += 1
                    break

            absorb_time[path] = atime
            flags[path] = flag
            events[path] = ev
