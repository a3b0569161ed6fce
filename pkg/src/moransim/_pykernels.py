"""Pure-Python simulation and solver kernels.

This module is the reference implementation; ``moransim._kernels`` is the
compiled mirror.  Both consume random draws in exactly the same order and
perform the same floating-point operations in the same order, so trial
outcomes and solver results are bit-identical across backends.  Keep the
two in lockstep when changing either.

Randomness contract: the only primitive consumed is a uniform double in
[0, 1) (one per call), taken from the caller's Philox bit generator.
Uniform integers are derived as ``min(int(u * m), m - 1)``.
"""

import math

import numpy as np

EXTINCTION = 0
FIXATION = 1
EARLY_STOP_FIXATION = 2
STEP_CAP_EXCEEDED = 3

# Sampler crossover: rejection sampling is cheaper while state changes are
# frequent; the exact weighted-boundary sampler wins once almost every full
# step is a no-op.  The reverse switch uses a higher threshold so the modes
# cannot oscillate rapidly.
REJECTION_WINDOW = 4096
REJECTION_SWITCH = 0.99
PCHANGE_SWITCH = 0.02
HVOL_RESYNC_INTERVAL = 1 << 20

BACKEND = "python"


def run_trial(offsets, targets, degrees, inv_deg, r, typ, perm, where, opp,
              adense, apos, init, step_cap, early_threshold, bit_generator):
    """Run one trial of the jump-chain Moran process to termination.

    ``typ``/``perm``/``where``/``opp``/``adense``/``apos`` are caller-owned
    workspace arrays (contents overwritten).  ``early_threshold < 0``
    disables early stopping.  Returns a tuple
    ``(outcome, real_steps, jump_steps, mutant_count, mutant_hvol)``.
    """
    n = typ.shape[0]
    nd = np.random.Generator(bit_generator).random

    typ[:] = 0
    perm[:] = np.arange(n, dtype=np.int32)
    where[:] = perm
    k = 0
    hvol = 0.0
    for i in range(init.shape[0]):
        v = int(init[i])
        typ[v] = 1
        j = where[v]
        other = perm[k]
        perm[k] = v
        perm[j] = other
        where[v] = k
        where[other] = j
        k += 1
        hvol += inv_deg[v]

    weighted = False
    asize = 0
    attempts = 0
    rejects = 0
    hvol_updates = 0
    real_steps = 0
    jump_steps = 0

    while True:
        if k == 0:
            return EXTINCTION, real_steps, jump_steps, k, hvol
        if k == n:
            return FIXATION, real_steps, jump_steps, k, hvol
        if early_threshold >= 0.0 and hvol >= early_threshold:
            return EARLY_STOP_FIXATION, real_steps, jump_steps, k, hvol
        if real_steps >= step_cap:
            return STEP_CAP_EXCEEDED, real_steps, jump_steps, k, hvol

        fitness_total = r * k + (n - k)

        if not weighted:
            # One full process step by rejection.
            if nd() < r * k / fitness_total:
                idx = int(nd() * k)
                if idx >= k:
                    idx = k - 1
                src = int(perm[idx])
            else:
                nm = n - k
                idx = int(nd() * nm)
                if idx >= nm:
                    idx = nm - 1
                src = int(perm[k + idx])
            dsrc = int(degrees[src])
            j = int(nd() * dsrc)
            if j >= dsrc:
                j = dsrc - 1
            tgt = int(targets[offsets[src] + j])
            real_steps += 1
            attempts += 1
            if typ[tgt] != typ[src]:
                jump_steps += 1
                new_type = int(typ[src])
                k, hvol, asize, hvol_updates = _flip(
                    offsets, targets, degrees, inv_deg, typ, perm, where, opp,
                    adense, apos, tgt, new_type, k, hvol, weighted, asize,
                    hvol_updates)
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
            # Exact weighted-boundary sampling of the next changing step.
            total = 0.0
            for i in range(asize):
                v = int(adense[i])
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
            u = nd()
            if p_change >= 1.0:
                g = 1
            elif u <= 0.0:
                g = step_cap - real_steps
                if g < 1:
                    g = 1
            else:
                g = 1 + int(math.log(u) / math.log1p(-p_change))
                if g < 1:
                    g = 1
            if real_steps + g > step_cap:
                real_steps = step_cap
                continue
            real_steps += g
            x = nd() * total
            acc = 0.0
            src = int(adense[asize - 1])
            for i in range(asize):
                v = int(adense[i])
                w = opp[v] * inv_deg[v]
                if typ[v]:
                    w *= r
                acc += w
                if acc >= x:
                    src = v
                    break
            o = int(opp[src])
            j = int(nd() * o)
            if j >= o:
                j = o - 1
            st = int(typ[src])
            base = offsets[src]
            tgt = -1
            seen = -1
            for ii in range(int(degrees[src])):
                cand = int(targets[base + ii])
                if typ[cand] != st:
                    seen += 1
                    if seen == j:
                        tgt = cand
                        break
            jump_steps += 1
            k, hvol, asize, hvol_updates = _flip(
                offsets, targets, degrees, inv_deg, typ, perm, where, opp,
                adense, apos, tgt, st, k, hvol, weighted, asize, hvol_updates)

        if hvol_updates >= HVOL_RESYNC_INTERVAL:
            hvol = 0.0
            for i in range(k):
                hvol += inv_deg[perm[i]]
            hvol_updates = 0


def _flip(offsets, targets, degrees, inv_deg, typ, perm, where, opp, adense,
          apos, v, new_type, k, hvol, weighted, asize, hvol_updates):
    """Flip vertex ``v`` to ``new_type``, maintaining all engine structures."""
    typ[v] = new_type
    j = int(where[v])
    if new_type == 1:
        other = int(perm[k])
        perm[k] = v
        perm[j] = other
        where[v] = k
        where[other] = j
        k += 1
        hvol += inv_deg[v]
    else:
        other = int(perm[k - 1])
        perm[k - 1] = v
        perm[j] = other
        where[v] = k - 1
        where[other] = j
        k -= 1
        hvol -= inv_deg[v]
    hvol_updates += 1

    if weighted:
        opp[v] = degrees[v] - opp[v]
        asize = _set_active(opp, adense, apos, v, asize)
        base = offsets[v]
        for ii in range(int(degrees[v])):
            y = int(targets[base + ii])
            if typ[y] == new_type:
                opp[y] -= 1
            else:
                opp[y] += 1
            asize = _set_active(opp, adense, apos, y, asize)
    return k, hvol, asize, hvol_updates


def _set_active(opp, adense, apos, v, asize):
    if opp[v] > 0:
        if apos[v] < 0:
            apos[v] = asize
            adense[asize] = v
            asize += 1
    else:
        if apos[v] >= 0:
            i = int(apos[v])
            last = int(adense[asize - 1])
            adense[i] = last
            apos[last] = i
            apos[v] = -1
            asize -= 1
    return asize


def _build_boundary(offsets, targets, typ, opp, adense, apos, n):
    """Recount opposite-type neighbor tallies and rebuild the active set."""
    apos[:] = -1
    asize = 0
    for v in range(n):
        cnt = 0
        tv = typ[v]
        for ii in range(int(offsets[v]), int(offsets[v + 1])):
            if typ[targets[ii]] != tv:
                cnt += 1
        opp[v] = cnt
        if cnt > 0:
            apos[v] = asize
            adense[asize] = v
            asize += 1
    return asize


def gauss_seidel_fixation(offsets, targets, inv_deg, r, n, h, tol, max_sweeps):
    """In-place Gauss-Seidel solve of the fixation-probability system.

    ``h`` is the 2^n state array with the absorbing entries preset
    (h[0] = 0, h[full] = 1).  States are swept in alternating bitmask
    order; transitions are generated on the fly from the adjacency, so the
    transition matrix is never materialized.  Returns (sweeps, residual)
    where residual is the max update displacement of the final sweep.
    """
    full = (1 << n) - 1
    sweeps = 0
    resid = math.inf
    while sweeps < max_sweeps:
        resid = 0.0
        if sweeps % 2 == 0:
            states = range(1, full)
        else:
            states = range(full - 1, 0, -1)
        for s in states:
            num = 0.0
            den = 0.0
            for u in range(n):
                if (s >> u) & 1:
                    ru = r * inv_deg[u]
                    down = h[s ^ (1 << u)]
                    for ii in range(int(offsets[u]), int(offsets[u + 1])):
                        v = int(targets[ii])
                        if not (s >> v) & 1:
                            num += ru * h[s | (1 << v)] + inv_deg[v] * down
                            den += ru + inv_deg[v]
            hn = num / den
            d = hn - h[s]
            if d < 0.0:
                d = -d
            if d > resid:
                resid = d
            h[s] = hn
        sweeps += 1
        if resid < tol:
            break
    return sweeps, resid
