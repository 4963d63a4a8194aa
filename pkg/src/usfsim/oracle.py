"""Exact reference computations the samplers are tested against.

Everything here trades speed for being independently checkable: spanning
trees are counted by an integer determinant and enumerated by brute force,
conditional laws by filtering the enumeration.  Sizes are guarded so a typo
cannot silently start a week-long loop.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np
from scipy import stats

from .graph import GraphError


class OracleSizeError(GraphError):
    pass


def spanning_tree_count(g):
    """Number of spanning trees, by the matrix-tree determinant.

    The reduced Laplacian determinant is computed with Bareiss elimination
    over python ints, so the count is exact at any size that fits in memory.
    Parallel edges contribute multiplicity; a disconnected graph gives 0.
    """
    n = g.n
    if n == 0:
        return 0
    if n == 1:
        return 1
    lap = [[0] * n for _ in range(n)]
    for e in range(g.m):
        u, v = int(g.edge_u[e]), int(g.edge_v[e])
        lap[u][u] += 1
        lap[v][v] += 1
        lap[u][v] -= 1
        lap[v][u] -= 1
    a = [row[1:] for row in lap[1:]]
    return _bareiss_det(a)


def _bareiss_det(a):
    n = len(a)
    a = [row[:] for row in a]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            a[i][k] = 0
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def enumerate_spanning_trees(g, limit=2_000_000):
    """All spanning trees as frozensets of edge ids, by exhaustive search."""
    n, m = g.n, g.m
    if n < 1:
        return []
    k = n - 1
    total = math.comb(m, k)
    if total > limit:
        raise OracleSizeError("C(%d, %d) = %d edge subsets is too many" % (m, k, total))
    trees = []
    for subset in itertools.combinations(range(m), k):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for e in subset:
            a, b = find(int(g.edge_u[e])), find(int(g.edge_v[e]))
            if a == b:
                ok = False
                break
            parent[a] = b
        if ok:
            trees.append(frozenset(subset))
    return trees


def enumerate_conditioned(g, contain=(), avoid=(), limit=2_000_000):
    """Spanning trees containing every edge of `contain`, none of `avoid`."""
    contain = frozenset(int(e) for e in contain)
    avoid = frozenset(int(e) for e in avoid)
    if contain & avoid:
        raise GraphError("contain and avoid overlap")
    out = []
    for t in enumerate_spanning_trees(g, limit=limit):
        if contain <= t and not (avoid & t):
            out.append(t)
    return out


def enumerate_oriented_forests(g, roots=None, limit=5_000_000):
    """All oriented spanning forests: parent tuples with the given root set.

    With roots=None every subset of roots is allowed, i.e. all rootward
    orientations of all spanning forests.  Used for exhaustive duality
    checks, so only sensible for a handful of vertices.
    """
    n = g.n
    options = []
    for v in range(n):
        opts = [(-1, -1)] if roots is None or v in roots else []
        if roots is None or v not in roots:
            for j in range(g.indptr[v], g.indptr[v + 1]):
                opts.append((int(g.nbr[j]), int(g.eid[j])))
        options.append(opts)
    total = 1
    for opts in options:
        total *= max(len(opts), 1)
    if total > limit:
        raise OracleSizeError("%d parent assignments is too many" % total)
    out = []
    for combo in itertools.product(*options):
        parent = np.array([c[0] for c in combo], dtype=np.int64)
        seen_ok = True
        state = [0] * n  # 0 unvisited, 1 on stack, 2 done
        for v in range(n):
            if state[v]:
                continue
            chain = []
            x = v
            while state[x] == 0 and parent[x] >= 0:
                state[x] = 1
                chain.append(x)
                x = parent[x]
            if state[x] == 1:
                seen_ok = False
            for y in chain:
                state[y] = 2
            state[x] = 2
            if not seen_ok:
                break
        if seen_ok:
            pe = np.array([c[1] for c in combo], dtype=np.int64)
            out.append((parent, pe))
    return out


def random_connected_multigraph(n, extra_edges, rng, allow_parallel=True):
    """Random connected multigraph: a random attachment tree plus extras."""
    us, vs = [], []
    for v in range(1, n):
        us.append(int(rng.integers(0, v)))
        vs.append(v)
    for _ in range(extra_edges):
        while True:
            a = int(rng.integers(0, n))
            b = int(rng.integers(0, n))
            if a == b:
                continue
            if not allow_parallel and any(
                    {ua, va} == {a, b} for ua, va in zip(us, vs)):
                continue
            us.append(a)
            vs.append(b)
            break
    from .graph import Graph
    return Graph(n, us, vs)


def uniformity_pvalue(counts, n_outcomes=None):
    """Chi-square p-value for `counts` against the uniform law."""
    counts = np.asarray(list(counts.values()) if isinstance(counts, dict)
                        else counts, dtype=np.float64)
    if n_outcomes is not None and counts.size < n_outcomes:
        counts = np.concatenate([counts, np.zeros(n_outcomes - counts.size)])
    return float(stats.chisquare(counts).pvalue)


def distribution_pvalue(counts, probs):
    """Chi-square p-value of observed counts against given probabilities."""
    keys = sorted(probs)
    obs = np.array([counts.get(k, 0) for k in keys], dtype=np.float64)
    if obs.sum() != sum(counts.values()):
        raise ValueError("observed outcomes outside the reference support")
    exp = np.array([probs[k] for k in keys], dtype=np.float64) * obs.sum()
    return float(stats.chisquare(obs, exp).pvalue)


def tree_distribution(trees):
    """Uniform reference law over an enumerated tree list."""
    p = 1.0 / len(trees)
    return {tuple(sorted(t)): p for t in trees}


def empirical_counts(keys):
    return Counter(keys)
