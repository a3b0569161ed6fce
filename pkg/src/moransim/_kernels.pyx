# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation and solver kernels.

Mirror of ``moransim._pykernels``: identical draw order and identical
floating-point operation order, so results are bit-identical across the
two backends.  Keep in lockstep with the Python reference.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport log, log1p

import numpy as np

cimport numpy as cnp
from numpy.random cimport bitgen_t

cnp.import_array()

EXTINCTION = 0
FIXATION = 1
EARLY_STOP_FIXATION = 2
STEP_CAP_EXCEEDED = 3

cdef enum:
    REJECTION_WINDOW = 4096
    HVOL_RESYNC_INTERVAL = 1048576  # 1 << 20

cdef double REJECTION_SWITCH = 0.99
cdef double PCHANGE_SWITCH = 0.02

BACKEND = "ext"

cdef const char *CAPSULE_NAME = "BitGenerator"


cdef inline double _nd(bitgen_t *rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline Py_ssize_t _set_active(cnp.int32_t[::1] opp, cnp.int32_t[::1] adense,
                                   cnp.int32_t[::1] apos, Py_ssize_t v,
                                   Py_ssize_t asize) noexcept nogil:
    cdef Py_ssize_t i, last
    if opp[v] > 0:
        if apos[v] < 0:
            apos[v] = <cnp.int32_t>asize
            adense[asize] = <cnp.int32_t>v
            asize += 1
    else:
        if apos[v] >= 0:
            i = apos[v]
            last = adense[asize - 1]
            adense[i] = <cnp.int32_t>last
            apos[last] = <cnp.int32_t>i
            apos[v] = -1
            asize -= 1
    return asize


cdef inline Py_ssize_t _build_boundary(cnp.int64_t[::1] offsets,
                                       cnp.int32_t[::1] targets,
                                       cnp.uint8_t[::1] typ,
                                       cnp.int32_t[::1] opp,
                                       cnp.int32_t[::1] adense,
                                       cnp.int32_t[::1] apos,
                                       Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t v, ii, asize = 0
    cdef int cnt
    cdef cnp.uint8_t tv
    for v in range(n):
        apos[v] = -1
    for v in range(n):
        cnt = 0
        tv = typ[v]
        for ii in range(offsets[v], offsets[v + 1]):
            if typ[targets[ii]] != tv:
                cnt += 1
        opp[v] = cnt
        if cnt > 0:
            apos[v] = <cnp.int32_t>asize
            adense[asize] = <cnp.int32_t>v
            asize += 1
    return asize


def run_trial(cnp.int64_t[::1] offsets, cnp.int32_t[::1] targets,
              cnp.int32_t[::1] degrees, double[::1] inv_deg, double r,
              cnp.uint8_t[::1] typ, cnp.int32_t[::1] perm,
              cnp.int32_t[::1] where, cnp.int32_t[::1] opp,
              cnp.int32_t[::1] adense, cnp.int32_t[::1] apos,
              cnp.int32_t[::1] init, long long step_cap,
              double early_threshold, object bit_generator):
    """Compiled twin of ``_pykernels.run_trial``; same contract."""
    cdef Py_ssize_t n = typ.shape[0]
    cdef bitgen_t *rng
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, CAPSULE_NAME):
        raise ValueError("invalid BitGenerator capsule")
    rng = <bitgen_t *>PyCapsule_GetPointer(capsule, CAPSULE_NAME)

    cdef Py_ssize_t k = 0, asize = 0, v, i, j, ii, other, idx, src, tgt, seen, o
    cdef Py_ssize_t nm, dsrc, base
    cdef long long real_steps = 0, jump_steps = 0, attempts = 0, rejects = 0
    cdef long long hvol_updates = 0, g
    cdef double hvol = 0.0, fitness_total, total, p_change, u, x, acc, w
    cdef bint weighted = False
    cdef int new_type, st, code

    with bit_generator.lock:
        for v in range(n):
            typ[v] = 0
            perm[v] = <cnp.int32_t>v
            where[v] = <cnp.int32_t>v
        for i in range(init.shape[0]):
            v = init[i]
            typ[v] = 1
            j = where[v]
            other = perm[k]
            perm[k] = <cnp.int32_t>v
            perm[j] = <cnp.int32_t>other
            where[v] = <cnp.int32_t>k
            where[other] = <cnp.int32_t>j
            k += 1
            hvol += inv_deg[v]

        while True:
            if k == 0:
                code = EXTINCTION
                break
            if k == n:
                code = FIXATION
                break
            if early_threshold >= 0.0 and hvol >= early_threshold:
                code = EARLY_STOP_FIXATION
                break
            if real_steps >= step_cap:
                code = STEP_CAP_EXCEEDED
                break

            fitness_total = r * k + (n - k)

            if not weighted:
                if _nd(rng) < r * k / fitness_total:
                    idx = <Py_ssize_t>(_nd(rng) * k)
                    if idx >= k:
                        idx = k - 1
                    src = perm[idx]
                else:
                    nm = n - k
                    idx = <Py_ssize_t>(_nd(rng) * nm)
                    if idx >= nm:
                        idx = nm - 1
                    src = perm[k + idx]
                dsrc = degrees[src]
                j = <Py_ssize_t>(_nd(rng) * dsrc)
                if j >= dsrc:
                    j = dsrc - 1
                tgt = targets[offsets[src] + j]
                real_steps += 1
                attempts += 1
                if typ[tgt] != typ[src]:
                    jump_steps += 1
                    new_type = typ[src]
                    k, hvol, asize, hvol_updates = _do_flip(
                        offsets, targets, degrees, inv_deg, typ, perm, where,
                        opp, adense, apos, tgt, new_type, k, hvol, weighted,
                        asize, hvol_updates)
                else:
                    rejects += 1
                if attempts == REJECTION_WINDOW:
                    if rejects > REJECTION_WINDOW * REJECTION_SWITCH:
                        weighted = True
                        asize = _build_boundary(offsets, targets, typ, opp,
                                                adense, apos, n)
                    attempts = 0
                    rejects = 0
            else:
                total = 0.0
                for i in range(asize):
                    v = adense[i]
                    w = opp[v] * inv_deg[v]
                    if typ[v]:
                        w *= r
                    total += w
                p_change = total / fitness_total
                if p_change > PCHANGE_SWITCH:
                    weighted = False
                    attempts = 0
                    rejects = 0
                    continue
                u = _nd(rng)
                if p_change >= 1.0:
                    g = 1
                elif u <= 0.0:
                    g = step_cap - real_steps
                    if g < 1:
                        g = 1
                else:
                    g = 1 + <long long>(log(u) / log1p(-p_change))
                    if g < 1:
                        g = 1
                if real_steps + g > step_cap:
                    real_steps = step_cap
                    continue
                real_steps += g
                x = _nd(rng) * total
                acc = 0.0
                src = adense[asize - 1]
                for i in range(asize):
                    v = adense[i]
                    w = opp[v] * inv_deg[v]
                    if typ[v]:
                        w *= r
                    acc += w
                    if acc >= x:
                        src = v
                        break
                o = opp[src]
                j = <Py_ssize_t>(_nd(rng) * o)
                if j >= o:
                    j = o - 1
                st = typ[src]
                base = offsets[src]
                tgt = -1
                seen = -1
                for ii in range(degrees[src]):
                    if typ[targets[base + ii]] != st:
                        seen += 1
                        if seen == j:
                            tgt = targets[base + ii]
                            break
                jump_steps += 1
                k, hvol, asize, hvol_updates = _do_flip(
                    offsets, targets, degrees, inv_deg, typ, perm, where, opp,
                    adense, apos, tgt, st, k, hvol, weighted, asize,
                    hvol_updates)

            if hvol_updates >= HVOL_RESYNC_INTERVAL:
                hvol = 0.0
                for i in range(k):
                    hvol += inv_deg[perm[i]]
                hvol_updates = 0

    return code, real_steps, jump_steps, k, hvol


cdef inline (Py_ssize_t, double, Py_ssize_t, long long) _do_flip(
        cnp.int64_t[::1] offsets, cnp.int32_t[::1] targets,
        cnp.int32_t[::1] degrees, double[::1] inv_deg, cnp.uint8_t[::1] typ,
        cnp.int32_t[::1] perm, cnp.int32_t[::1] where, cnp.int32_t[::1] opp,
        cnp.int32_t[::1] adense, cnp.int32_t[::1] apos, Py_ssize_t v,
        int new_type, Py_ssize_t k, double hvol, bint weighted,
        Py_ssize_t asize, long long hvol_updates) noexcept nogil:
    cdef Py_ssize_t j, other, ii, y, base
    typ[v] = <cnp.uint8_t>new_type
    j = where[v]
    if new_type == 1:
        other = perm[k]
        perm[k] = <cnp.int32_t>v
        perm[j] = <cnp.int32_t>other
        where[v] = <cnp.int32_t>k
        where[other] = <cnp.int32_t>j
        k += 1
        hvol += inv_deg[v]
    else:
        other = perm[k - 1]
        perm[k - 1] = <cnp.int32_t>v
        perm[j] = <cnp.int32_t>other
        where[v] = <cnp.int32_t>(k - 1)
        where[other] = <cnp.int32_t>j
        k -= 1
        hvol -= inv_deg[v]
    hvol_updates += 1

    if weighted:
        opp[v] = degrees[v] - opp[v]
        asize = _set_active(opp, adense, apos, v, asize)
        base = offsets[v]
        for ii in range(degrees[v]):
            y = targets[base + ii]
            if typ[y] == <cnp.uint8_t>new_type:
                opp[y] -= 1
            else:
                opp[y] += 1
            asize = _set_active(opp, adense, apos, y, asize)
    return k, hvol, asize, hvol_updates


def gauss_seidel_fixation(cnp.int64_t[::1] offsets, cnp.int32_t[::1] targets,
                          double[::1] inv_deg, double r, int n, double[::1] h,
                          double tol, long long max_sweeps):
    """Compiled twin of ``_pykernels.gauss_seidel_fixation``; same contract."""
    cdef unsigned long long full = (1ULL << n) - 1
    cdef unsigned long long s
    cdef long long sweeps = 0
    cdef double resid = np.inf
    cdef double num, den, hn, d, ru, down
    cdef Py_ssize_t u, ii
    cdef int v

    with nogil:
        while sweeps < max_sweeps:
            resid = 0.0
            if sweeps % 2 == 0:
                s = 1
                while s < full:
                    num = 0.0
                    den = 0.0
                    for u in range(n):
                        if (s >> u) & 1:
                            ru = r * inv_deg[u]
                            down = h[s ^ (1ULL << u)]
                            for ii in range(offsets[u], offsets[u + 1]):
                                v = targets[ii]
                                if not (s >> v) & 1:
                                    num += ru * h[s | (1ULL << v)] + inv_deg[v] * down
                                    den += ru + inv_deg[v]
                    hn = num / den
                    d = hn - h[s]
                    if d < 0.0:
                        d = -d
                    if d > resid:
                        resid = d
                    h[s] = hn
                    s += 1
            else:
                s = full - 1
                while s > 0:
                    num = 0.0
                    den = 0.0
                    for u in range(n):
                        if (s >> u) & 1:
                            ru = r * inv_deg[u]
                            down = h[s ^ (1ULL << u)]
                            for ii in range(offsets[u], offsets[u + 1]):
                                v = targets[ii]
                                if not (s >> v) & 1:
                                    num += ru * h[s | (1ULL << v)] + inv_deg[v] * down
                                    den += ru + inv_deg[v]
                    hn = num / den
                    d = hn - h[s]
                    if d < 0.0:
                        d = -d
                    if d > resid:
                        resid = d
                    h[s] = hn
                    s -= 1
            sweeps += 1
            if resid < tol:
                break
    return sweeps, resid
