"""Pure-Python simulation kernels, bit-identical to the compiled ones.

Both implementations walk the same event-driven loop with the same
counter-based splitmix64 generator and the same fixed draw order per event
(waiting time; component choice only when there are several jump parts;
jump size only for non-atomic parts / offspring count for the discrete
kernel). Every floating-point expression is written with the same structure
as the compiled version and the extension is built with contraction
disabled, so the two backends produce identical bytes and either can
validate the other.

Path RNG streams are keyed by (seed, path index), never by thread, so an
ensemble is reproducible under any partitioning of paths across workers.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_U01 = 2.0**-53

KIND_ATOM = 0
KIND_PARETO = 1

FLAG_SURVIVED = 0
FLAG_EXPLODED = 1
FLAG_INCONCLUSIVE = 2
FLAG_EXTINCT = 3

_INF = math.inf
_NAN = math.nan


def _mix64(z: int) -> int:
    z &= _MASK
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK
    z ^= z >> 31
    return z


def _stream_state(seed: int, path: int) -> int:
    return _mix64((seed ^ _mix64(((path + 1) * _GAMMA) & _MASK)) & _MASK)


def u01_stream(seed: int, path: int, n: int):
    """First n uniforms of the (seed, path) stream; test hook."""
    import numpy as np

    out = np.empty(n)
    s = _stream_state(seed, path)
    for i in range(n):
        s = (s + _GAMMA) & _MASK
        out[i] = ((_mix64(s) >> 11) + 0.5) * _U01
    return out


def kernel_backend() -> str:
    return "python"


def csbp_paths(
    x: float,
    D: float,
    masses,
    kinds,
    par_a,
    par_b,
    times,
    horizon: float,
    M: float,
    max_events: int,
    seed: int,
    path_lo: int,
    path_hi: int,
    states,
    absorb_time,
    flags,
    events,
):
    """Event-driven paths of a finite-activity finite-variation mechanism.

    Between jumps the state decays deterministically, z(s) = z exp(-D s);
    jumps arrive at rate z * total_mass and add a size drawn from the
    normalized jump parts. Crossing M counts as explosion at the crossing
    time. Marginals strictly before an event time record the pre-jump
    state; marginals after explosion are +inf, after an inconclusive stop
    NaN. Rows of the output arrays are indexed by path.
    """
    n_parts = len(masses)
    total_mass = 0.0
    cum = [0.0] * n_parts
    for i in range(n_parts):
        total_mass += masses[i]
        cum[i] = total_mass
    n_times = len(times)

    for path in range(path_lo, path_hi):
        s = _stream_state(seed, path)
        z = x
        tn = 0.0
        k = 0
        ev = 0
        flag = FLAG_SURVIVED
        atime = _INF

        while True:
            s = (s + _GAMMA) & _MASK
            u = ((_mix64(s) >> 11) + 0.5) * _U01
            E = -math.log(u)
            if total_mass <= 0.0:
                tau = _INF
            elif D == 0.0:
                tau = E / (total_mass * z)
            else:
                arg = 1.0 - E * D / (total_mass * z)
                tau = _INF if arg <= 0.0 else -math.log(arg) / D
            te = tn + tau
            if D < 0.0:
                tc = tn + math.log(M / z) / -D
            else:
                tc = _INF
            stop = te if te < tc else tc

            while k < n_times and times[k] < stop and times[k] <= horizon:
                states[path, k] = z * math.exp(-D * (times[k] - tn))
                k += 1

            if tc <= te and tc <= horizon:
                flag = FLAG_EXPLODED
                atime = tc
                while k < n_times:
                    states[path, k] = _INF
                    k += 1
                break
            if te > horizon:
                break

            z = z * math.exp(-D * tau)
            i = 0
            if n_parts > 1:
                s = (s + _GAMMA) & _MASK
                u = ((_mix64(s) >> 11) + 0.5) * _U01
                r = u * total_mass
                while i < n_parts - 1 and r > cum[i]:
                    i += 1
            if kinds[i] == KIND_ATOM:
                h = par_a[i]
            else:
                s = (s + _GAMMA) & _MASK
                u = ((_mix64(s) >> 11) + 0.5) * _U01
                h = par_a[i] * math.pow(u, -par_b[i])
            z = z + h
            ev += 1
            tn = te

            if z >= M:
                flag = FLAG_EXPLODED
                atime = tn
                while k < n_times:
                    states[path, k] = _INF
                    k += 1
                break
            if ev >= max_events:
                flag = FLAG_INCONCLUSIVE
                atime = _NAN
                while k < n_times:
                    states[path, k] = _NAN
                    k += 1
                break

        absorb_time[path] = atime
        flags[path] = flag
        events[path] = ev


def dsbp_paths(
    n0: float,
    c: float,
    cdf,
    tail_coef: float,
    tail_inv_alpha: float,
    times,
    horizon: float,
    M: float,
    max_events: int,
    seed: int,
    path_lo: int,
    path_hi: int,
    states,
    absorb_time,
    flags,
    events,
):
    """Event-driven paths of a discrete-state branching process.

    Each of the z living individuals is replaced at rate c by an offspring
    count drawn by inverse CDF on the precomputed table, with the analytic
    tail fallback past its end. Hitting 0 is extinction (marginals 0
    afterward), reaching M is explosion (marginals +inf), exceeding the
    event budget is inconclusive (marginals NaN).
    """
    size = len(cdf)
    top = cdf[size - 1]
    n_times = len(times)

    for path in range(path_lo, path_hi):
        s = _stream_state(seed, path)
        z = n0
        tn = 0.0
        k = 0
        ev = 0
        flag = FLAG_SURVIVED
        atime = _INF

        while True:
            s = (s + _GAMMA) & _MASK
            u = ((_mix64(s) >> 11) + 0.5) * _U01
            te = tn + -math.log(u) / (c * z)

            while k < n_times and times[k] < te and times[k] <= horizon:
                states[path, k] = z
                k += 1

            if te > horizon:
                break

            s = (s + _GAMMA) & _MASK
            u = ((_mix64(s) >> 11) + 0.5) * _U01
            if u > top:
                j = math.ceil(math.pow((1.0 - u) * tail_coef, -tail_inv_alpha))
                if j < size:
                    j = size
                j = float(j)
            else:
                lo = 0
                hi = size
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if cdf[mid] < u:
                        lo = mid + 1
                    else:
                        hi = mid
                j = float(lo)
            z = z - 1.0 + j
            ev += 1
            tn = te

            if z <= 0.0:
                flag = FLAG_EXTINCT
                atime = tn
                while k < n_times:
                    states[path, k] = 0.0
                    k += 1
                break
            if z >= M:
                flag = FLAG_EXPLODED
                atime = tn
                while k < n_times:
                    states[path, k] = _INF
                    k += 1
                break
            if ev >= max_events:
                flag = FLAG_INCONCLUSIVE
                atime = _NAN
                while k < n_times:
                    states[path, k] = _NAN
                    k += 1
                break

        absorb_time[path] = atime
        flags[path] = flag
        events[path] = ev
