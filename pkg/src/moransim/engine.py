"""Exact-distribution simulation of the Moran birth-death process.

The default run mode is the jump chain: only state-changing events are
sampled (fixation probabilities are invariant under dropping no-change
steps) and full-process step counts are recovered by geometric sampling.
Two samplers produce the changing events -- plain rejection of full steps,
and an exact weighted-boundary sampler the engine switches to when the
measured rejection rate makes full steps wasteful.  Both are
distributionally identical.

A compiled kernel is used when available; the pure-Python twin produces
bit-identical results, just slower.  Select with ``MORANSIM_PURE_PYTHON=1``.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _pykernels, rng
from .graphs import Graph, GraphError, is_connected

if os.environ.get("MORANSIM_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _pykernels


def backend():
    """Name of the active kernel backend: ``"ext"`` or ``"python"``."""
    return _impl.BACKEND


class OutcomeKind(enum.IntEnum):
    EXTINCTION = _pykernels.EXTINCTION
    FIXATION = _pykernels.FIXATION
    EARLY_STOP_FIXATION = _pykernels.EARLY_STOP_FIXATION
    STEP_CAP_EXCEEDED = _pykernels.STEP_CAP_EXCEEDED


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    real_steps: int
    jump_steps: int


@dataclass(frozen=True)
class MoranConfig:
    """Run parameters: fitness, seed, step cap, optional early stopping."""

    r: float
    seed: int = 0
    step_cap: int | None = None
    early_stop_c: float | None = None

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("fitness r must be positive")
        if self.early_stop_c is not None:
            if self.early_stop_c <= 0:
                raise ValueError("early_stop_c must be positive")
            if self.r <= 1.0:
                raise ValueError(
                    "early stopping needs r > 1 (threshold uses log base r)")


def default_step_cap(n, r):
    """Step budget from the polynomial absorption-time bound, with headroom."""
    return int(math.ceil(4.0 * r * n ** 4 / max(r - 1.0, 1.0 / n)))


def early_stop_threshold_value(g, r, c):
    """Mutant harmonic volume at which a run may be declared fixated."""
    delta = int(g.degrees.min())
    if delta < 1:
        raise GraphError("early stopping needs minimum degree >= 1")
    return c * math.log(g.n) / math.log(r) / delta


class ProcessState:
    """Mutable Moran state: mutant/non-mutant partition plus cached tallies.

    Mutants occupy ``perm[:mutant_count]`` and non-mutants the rest, with
    ``where`` giving each vertex's slot, so membership tests, flips, and
    uniform picks on either side are O(1).  Single-owner: not for
    concurrent mutation.
    """

    def __init__(self, g, mutants=()):
        n = g.n
        self.graph = g
        self.typ = np.zeros(n, dtype=np.uint8)
        self.perm = np.arange(n, dtype=np.int32)
        self.where = np.arange(n, dtype=np.int32)
        self.opp = np.zeros(n, dtype=np.int32)
        self.adense = np.zeros(n, dtype=np.int32)
        self.apos = np.full(n, -1, dtype=np.int32)
        self.mutant_count = 0
        self.mutant_hvol = 0.0
        self.steps_taken = 0
        self.jump_steps = 0
        self.boundary_ready = False
        for v in mutants:
            self.flip(int(v))

    def is_mutant(self, v):
        return bool(self.typ[v])

    def mutants(self):
        return np.sort(self.perm[:self.mutant_count].copy())

    def non_mutants(self):
        return np.sort(self.perm[self.mutant_count:].copy())

    def is_absorbing(self):
        return self.mutant_count in (0, self.graph.n)

    def flip(self, v):
        """Toggle vertex ``v`` between mutant and non-mutant."""
        g = self.graph
        new_type = 0 if self.typ[v] else 1
        k, hvol, asize, _ = _pykernels._flip(
            g.offsets, g.targets, g.degrees, g.inv_degrees, self.typ,
            self.perm, self.where, self.opp, self.adense, self.apos, v,
            new_type, self.mutant_count, self.mutant_hvol,
            self.boundary_ready, getattr(self, "_asize", 0), 0)
        self.mutant_count = k
        self.mutant_hvol = hvol
        self._asize = asize

    def ensure_boundary(self):
        g = self.graph
        self._asize = _pykernels._build_boundary(
            g.offsets, g.targets, self.typ, self.opp, self.adense, self.apos,
            g.n)
        self.boundary_ready = True


def _uniform_index(u, m):
    idx = int(u * m)
    return m - 1 if idx >= m else idx


def step(g, state, cfg, gen):
    """One full Moran step; returns whether the mutant set changed.

    The reproducer is drawn fitness-proportionally (uniform mutant with
    probability r|S| / (r|S| + n - |S|), else uniform non-mutant), then a
    uniform neighbor acquires its type.
    """
    if state.is_absorbing():
        raise GraphError("step on an absorbing state")
    n = g.n
    k = state.mutant_count
    fitness_total = cfg.r * k + (n - k)
    if gen.random() < cfg.r * k / fitness_total:
        src = int(state.perm[_uniform_index(gen.random(), k)])
    else:
        src = int(state.perm[k + _uniform_index(gen.random(), n - k)])
    d = int(g.degrees[src])
    tgt = int(g.targets[g.offsets[src] + _uniform_index(gen.random(), d)])
    state.steps_taken += 1
    changed = state.typ[tgt] != state.typ[src]
    if changed:
        state.flip(tgt)
        state.jump_steps += 1
    return bool(changed)


def step_jump(g, state, cfg, gen, sampler="rejection", advance_real_steps=True):
    """One state-changing event, with the exact conditional distribution.

    ``sampler="rejection"`` resamples full steps until one changes the
    state; ``sampler="weighted"`` samples the changing event directly from
    the boundary weights (mutant side r/deg, non-mutant side 1/deg) and, if
    ``advance_real_steps``, adds a geometric count of skipped full steps.
    """
    if state.is_absorbing():
        raise GraphError("step_jump on an absorbing state")
    if sampler == "rejection":
        while not step(g, state, cfg, gen):
            pass
        return
    if sampler != "weighted":
        raise ValueError("sampler must be 'rejection' or 'weighted'")
    if not state.boundary_ready:
        state.ensure_boundary()
    n = g.n
    k = state.mutant_count
    r = cfg.r
    asize = state._asize
    total = 0.0
    for i in range(asize):
        v = int(state.adense[i])
        w = state.opp[v] * g.inv_degrees[v]
        if state.typ[v]:
            w *= r
        total += w
    if advance_real_steps:
        p_change = total / (r * k + (n - k))
        u = gen.random()
        if p_change >= 1.0:
            jumps = 1
        elif u <= 0.0:
            jumps = 1
        else:
            jumps = max(1, 1 + int(math.log(u) / math.log1p(-p_change)))
        state.steps_taken += jumps
    x = gen.random() * total
    acc = 0.0
    src = int(state.adense[asize - 1])
    for i in range(asize):
        v = int(state.adense[i])
        w = state.opp[v] * g.inv_degrees[v]
        if state.typ[v]:
            w *= r
        acc += w
        if acc >= x:
            src = v
            break
    o = int(state.opp[src])
    j = _uniform_index(gen.random(), o)
    st = int(state.typ[src])
    tgt = -1
    seen = -1
    for cand in g.neighbors(src):
        if state.typ[cand] != st:
            seen += 1
            if seen == j:
                tgt = int(cand)
                break
    state.flip(tgt)
    state.jump_steps += 1


def make_workspace(g):
    """Reusable per-graph scratch arrays for :func:`run_trial_raw`."""
    n = g.n
    return {
        "typ": np.zeros(n, dtype=np.uint8),
        "perm": np.zeros(n, dtype=np.int32),
        "where": np.zeros(n, dtype=np.int32),
        "opp": np.zeros(n, dtype=np.int32),
        "adense": np.zeros(n, dtype=np.int32),
        "apos": np.zeros(n, dtype=np.int32),
    }


def run_trial_raw(g, ws, init, r, step_cap, early_threshold, bit_generator):
    """Run one trial on preallocated workspaces; see kernel docs."""
    return _impl.run_trial(
        g.offsets, g.targets, g.degrees, g.inv_degrees, float(r), ws["typ"],
        ws["perm"], ws["where"], ws["opp"], ws["adense"], ws["apos"],
        np.asarray(init, dtype=np.int32), int(step_cap),
        float(early_threshold), bit_generator)


def run_to_absorption(g, initial_mutants, cfg, trial=0):
    """Iterate jump steps until fixation, extinction, early stop, or cap."""
    if not is_connected(g):
        raise GraphError("run_to_absorption requires a connected graph")
    init = np.asarray(sorted(set(int(v) for v in initial_mutants)), dtype=np.int32)
    if init.size and (init.min() < 0 or init.max() >= g.n):
        raise GraphError("initial mutant outside the graph")
    cap = cfg.step_cap if cfg.step_cap is not None else default_step_cap(g.n, cfg.r)
    thresh = -1.0
    if cfg.early_stop_c is not None:
        thresh = early_stop_threshold_value(g, cfg.r, cfg.early_stop_c)
    ws = make_workspace(g)
    bg = rng.stream(cfg.seed, trial=trial)
    code, real_steps, jump_steps, _, _ = run_trial_raw(
        g, ws, init, cfg.r, cap, thresh, bg)
    return Outcome(OutcomeKind(code), int(real_steps), int(jump_steps))
