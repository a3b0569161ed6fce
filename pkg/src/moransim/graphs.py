"""Compressed undirected graphs and their structural functionals.

Vertices are dense integer ids ``0..n-1``.  Adjacency lives in a single
offsets+targets (CSR) pair with sorted neighbor lists; the sampling engine
walks it in a hot loop, so locality beats per-vertex containers.  Graphs
are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import rng


class GraphError(ValueError):
    """Structural problem with a graph or an operation's preconditions."""


class EdgeListError(GraphError):
    """Malformed edge-list input."""


class Graph:
    """Immutable undirected simple graph (no self-loops, no parallel edges)."""

    __slots__ = ("n", "offsets", "targets", "degrees", "inv_degrees")

    def __init__(self, n, edges):
        edges = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                           dtype=np.int64)
        if edges.size == 0:
            edges = edges.reshape(0, 2)
        if edges.ndim != 2 or edges.shape[1] != 2:
            raise GraphError("edges must be (m, 2) pairs")
        if n < 1:
            raise GraphError("graph needs at least one vertex")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise GraphError("vertex index out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            bad = edges[edges[:, 0] == edges[:, 1]][0]
            raise GraphError(f"self-loop at vertex {bad[0]}")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        canon = lo * n + hi
        if np.unique(canon).size != canon.size:
            order = np.argsort(canon, kind="stable")
            dup = np.nonzero(np.diff(canon[order]) == 0)[0][0]
            u, v = divmod(int(canon[order[dup]]), n)
            raise GraphError(f"duplicate edge ({u}, {v})")

        heads = np.concatenate([lo, hi])
        tails = np.concatenate([hi, lo])
        order = np.lexsort((tails, heads))
        self.n = int(n)
        self.targets = tails[order].astype(np.int32)
        counts = np.bincount(heads, minlength=n)
        self.offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=self.offsets[1:])
        self.degrees = counts.astype(np.int32)
        with np.errstate(divide="ignore"):
            self.inv_degrees = np.where(counts > 0, 1.0 / counts, 0.0)
        for arr in (self.offsets, self.targets, self.degrees, self.inv_degrees):
            arr.setflags(write=False)

    @property
    def m(self):
        """Number of undirected edges."""
        return self.targets.shape[0] // 2

    def neighbors(self, u):
        """Sorted neighbor ids of ``u`` (read-only view)."""
        return self.targets[self.offsets[u]:self.offsets[u + 1]]

    def degree(self, u):
        return int(self.degrees[u])

    def edges(self):
        """Each undirected edge once, as sorted (u, v) pairs."""
        out = []
        for u in range(self.n):
            for v in self.neighbors(u):
                if u < v:
                    out.append((u, int(v)))
        return out

    def __eq__(self, other):
        return (isinstance(other, Graph) and self.n == other.n
                and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.targets, other.targets))

    def __hash__(self):
        return hash((self.n, self.targets.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"

    def __reduce__(self):
        return (_rebuild_graph, (self.n, np.asarray(self.edges(), dtype=np.int64)))


def _rebuild_graph(n, edges):
    return Graph(n, edges)


class VertexSet:
    """Vertex set with O(1) add/discard/membership and O(1) indexed pick.

    Backed by a membership bitmap plus a dense index array; the engine
    uses the same layout internally for uniform sampling.
    """

    __slots__ = ("bitmap", "dense", "pos", "size")

    def __init__(self, n, members=()):
        self.bitmap = np.zeros(n, dtype=bool)
        self.dense = np.empty(n, dtype=np.int32)
        self.pos = np.full(n, -1, dtype=np.int32)
        self.size = 0
        for v in members:
            self.add(v)

    def add(self, v):
        if not self.bitmap[v]:
            self.bitmap[v] = True
            self.dense[self.size] = v
            self.pos[v] = self.size
            self.size += 1

    def discard(self, v):
        if self.bitmap[v]:
            self.bitmap[v] = False
            i = self.pos[v]
            last = self.dense[self.size - 1]
            self.dense[i] = last
            self.pos[last] = i
            self.pos[v] = -1
            self.size -= 1

    def pick(self, index):
        """Member at dense position ``index`` (pair with a uniform index draw)."""
        if not 0 <= index < self.size:
            raise IndexError("pick index out of range")
        return int(self.dense[index])

    def __contains__(self, v):
        return bool(self.bitmap[v])

    def __len__(self):
        return self.size

    def __iter__(self):
        return iter(self.dense[:self.size].tolist())

    def to_array(self):
        return np.sort(self.dense[:self.size].copy())


def _member_array(g, s):
    if isinstance(s, VertexSet):
        arr = s.dense[:s.size].astype(np.int64)
    else:
        arr = np.asarray(sorted(set(int(v) for v in s)), dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= g.n):
        raise GraphError("set contains vertices outside the graph")
    return arr


def volume(g, s):
    """Sum of degrees over ``s``; the empty set has volume 0."""
    members = _member_array(g, s)
    return int(g.degrees[members].sum()) if members.size else 0


def hvol(g, s):
    """Sum of reciprocal degrees over ``s``, accumulated ascending by degree.

    Uses exactly-rounded summation, so the absolute error versus the exact
    rational value stays below 1e-12.  Vertices of degree zero are rejected.
    """
    members = _member_array(g, s)
    if members.size == 0:
        return 0.0
    degs = g.degrees[members]
    if np.any(degs == 0):
        raise GraphError("hvol undefined: set contains an isolated vertex")
    return math.fsum(1.0 / float(d) for d in np.sort(degs))


def hvol_exact(g, s):
    """Exact rational harmonic volume; test-oracle companion of :func:`hvol`."""
    members = _member_array(g, s)
    total = Fraction(0)
    for v in members:
        d = int(g.degrees[v])
        if d == 0:
            raise GraphError("hvol undefined: set contains an isolated vertex")
        total += Fraction(1, d)
    return total


def is_connected(g):
    """BFS reachability from vertex 0."""
    if g.n == 1:
        return True
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    frontier = [0]
    reached = 1
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.neighbors(u):
                if not seen[v]:
                    seen[v] = True
                    reached += 1
                    nxt.append(int(v))
        frontier = nxt
    return reached == g.n


_EXACT_CUT_LIMIT = 24


def conductance_exact(g):
    """Exhaustive conductance: min over cuts of cut-edges / smaller-side volume.

    Enumerates the 2^(n-1) cuts through subsets containing vertex 0 and
    normalizes each cut on its volume-light side.  Limited to n <= 24.
    """
    if not is_connected(g):
        raise GraphError("conductance requires a connected graph")
    n = g.n
    if n > _EXACT_CUT_LIMIT:
        raise GraphError(
            f"n={n} too large for exhaustive conductance (limit {_EXACT_CUT_LIMIT});"
            " use conductance_spectral_lower for certified lower bounds")
    if n < 2:
        raise GraphError("conductance needs at least two vertices")
    masks = [0] * n
    for u in range(n):
        acc = 0
        for v in g.neighbors(u):
            acc |= 1 << int(v)
        masks[u] = acc
    degs = [int(d) for d in g.degrees]
    vol_all = 2 * g.m
    full = (1 << n) - 1
    best = float("inf")
    for x in range(1 << (n - 1)):
        s = (x << 1) | 1
        if s == full:
            continue
        vol_s = 0
        cut = 0
        rest = s
        comp = full ^ s
        while rest:
            u = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            vol_s += degs[u]
            cut += (masks[u] & comp).bit_count()
        if 2 * vol_s <= vol_all:
            best = min(best, cut / vol_s)
        vol_c = vol_all - vol_s
        if 2 * vol_c <= vol_all:
            best = min(best, cut / vol_c)
    return best


def conductance_spectral_lower(g, tol=1e-8, max_iter=None):
    """Certified lower bound on conductance for regular graphs.

    Cheeger-type bound (1 - lambda_2)/2 with lambda_2 estimated by power
    iteration on the normalized adjacency, deflated against the constant
    eigenvector.  The returned value inflates lambda_2 by the final
    iteration residual, so it errs on the conservative side.
    """
    if not is_connected(g):
        raise GraphError("spectral bound requires a connected graph")
    d = int(g.degrees[0])
    if not np.all(g.degrees == d):
        raise GraphError("spectral bound implemented for regular graphs only")
    n = g.n
    if n == 1:
        raise GraphError("conductance needs at least two vertices")
    if max_iter is None:
        max_iter = 100 * n + 1000

    ends = g.offsets[1:]

    def mat(x):
        # M = (B + I)/2 with B = A/d - J/n; spectrum of M is (lambda+1)/2 >= 0
        y = np.add.reduceat(x[g.targets], g.offsets[:-1]) / d
        np.subtract(y, y.mean(), out=y)
        return 0.5 * (y + x)

    assert ends.shape[0] == n
    x = rng.generator(0x5EC7_0A11, label="spectral-start").standard_normal(n)
    x -= x.mean()
    x /= np.linalg.norm(x)
    mu = 0.0
    for it in range(max_iter):
        y = mat(x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            mu = 0.0
            x = y
            break
        y /= norm
        mu_new = float(y @ mat(y))
        done = abs(mu_new - mu) <= tol * max(abs(mu_new), 1e-30) and it > 4
        x, mu = y, mu_new
        if done:
            break
    resid = float(np.linalg.norm(mat(x) - mu * x))
    lam2_upper = 2.0 * min(1.0, mu + resid) - 1.0
    return (1.0 - lam2_upper) / 2.0


def load_edge_list(path):
    """Read the text edge-list format: one "u v" pair per line, '#' comments.

    Indices are 0-based decimals; each undirected edge appears once.
    Duplicate edges (in either orientation) and self-loops are errors.
    """
    edges = []
    seen = set()
    max_v = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise EdgeListError(f"{path}:{lineno}: expected 'u v', got {raw!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListError(f"{path}:{lineno}: non-integer vertex id") from None
            if u < 0 or v < 0:
                raise EdgeListError(f"{path}:{lineno}: negative vertex id")
            if u == v:
                raise EdgeListError(f"{path}:{lineno}: self-loop at {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise EdgeListError(f"{path}:{lineno}: duplicate edge {key}")
            seen.add(key)
            edges.append(key)
            max_v = max(max_v, u, v)
    if max_v < 0:
        raise EdgeListError(f"{path}: no edges")
    return Graph(max_v + 1, edges)


def save_edge_list(g, path):
    """Write the edge-list format; round-trips exactly through load."""
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")
