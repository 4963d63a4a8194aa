"""Wilson's algorithm, partial forests, and run completion.

Forests are stored as parent pointers oriented toward the roots: parent[v~]
is -1 at a root, else the next vertex on v's path rootward, with parent_edge
carrying the multigraph edge id actually used (parallel edges matter).  A
partial forest is the same pair plus a membership mask; completing a run
means adjoining loop-erased walks to it, first any pre-drawn traces in the
given order, then fresh walks from every vertex still outside.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .walks import WalkError


class SampleVoided(Exception):
    """A sample that must be discarded, not patched (pre-drawn walk ran out)."""


class CapExhausted(SampleVoided):
    """A fresh walk hit its step cap; graph likely disconnected or cap too low."""


class OrientedForest:
    """Spanning forest of a graph, oriented toward its roots.

    root_edges, when present, records for each vertex the edge id that
    attached it to a deleted global root (-1 elsewhere); wired-box samples
    use it to remember how trees met the boundary.
    """

    def __init__(self, parent, parent_edge, root_edges=None):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.parent_edge = np.asarray(parent_edge, dtype=np.int64)
        if self.parent.shape != self.parent_edge.shape:
            raise ValueError("parent and parent_edge must match")
        self.root_edges = (None if root_edges is None
                           else np.asarray(root_edges, dtype=np.int64))
        for a in (self.parent, self.parent_edge, self.root_edges):
            if a is not None:
                a.setflags(write=False)
        self._cache = {}

    @property
    def n(self):
        return self.parent.size

    def roots(self):
        return np.flatnonzero(self.parent < 0)

    def is_root(self, v):
        return self.parent[v] < 0

    def edge_ids(self):
        """Sorted ids of the forest's own edges (root attachments excluded)."""
        return np.sort(self.parent_edge[self.parent_edge >= 0])

    def tree_key(self):
        """Hashable outcome key: the full sorted edge set, root edges included."""
        ids = self.parent_edge[self.parent_edge >= 0]
        if self.root_edges is not None:
            ids = np.concatenate([ids, self.root_edges[self.root_edges >= 0]])
        return tuple(np.sort(ids).tolist())

    def parent_chain(self, v):
        """Vertices from v to its root, inclusive."""
        out = [int(v)]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
            if len(out) > self.n:
                raise ValueError("parent array contains a cycle")
        return np.array(out, dtype=np.int64)

    def __repr__(self):
        return "OrientedForest(n=%d, roots=%d)" % (self.n, self.roots().size)


@dataclass(frozen=True)
class PartialForest:
    """A future-closed piece of a forest: membership mask plus parents.

    Future-closed means a member's parent is a member (or the vertex is a
    root), so the piece is a union of rootward-closed branches.
    """

    parent: np.ndarray
    parent_edge: np.ndarray
    member: np.ndarray

    def __post_init__(self):
        bad = self.member & (self.parent >= 0)
        if np.any(bad & ~self.member[np.where(self.parent >= 0, self.parent, 0)]):
            raise ValueError("partial forest is not future-closed")

    @property
    def n(self):
        return self.member.size

    def size(self):
        return int(self.member.sum())


def empty_partial(n, seeds=()):
    """Partial forest containing only the given root seeds."""
    member = np.zeros(n, dtype=bool)
    parent = np.full(n, -1, dtype=np.int64)
    pe = np.full(n, -1, dtype=np.int64)
    for v in seeds:
        member[v] = True
    return PartialForest(parent, pe, member)


def partial_from_forest(forest, mask):
    """Restrict a forest to a future-closed vertex mask."""
    parent = np.where(mask, forest.parent, -1)
    pe = np.where(mask, forest.parent_edge, -1)
    return PartialForest(parent.astype(np.int64), pe.astype(np.int64),
                         mask.astype(bool))


def default_cap(g):
    return max(100 * g.n, 10_000)


def wilson_ust(g, root, rng, order=None, lazy=False, cap=None):
    """Uniform spanning tree of g oriented toward root, by Wilson's algorithm.

    Walks are plain (non-lazy) by default; laziness changes no tree
    probabilities, only the step count, and is available for comparisons.
    Any start order gives the same law; vertices missing from a custom order
    are appended in id order so the tree always spans.
    """
    if not 0 <= root < g.n:
        raise ValueError("root out of range")
    if cap is None:
        cap = default_cap(g)
    parent = np.full(g.n, -1, dtype=np.int64)
    pe = np.full(g.n, -1, dtype=np.int64)
    in_forest = np.zeros(g.n, dtype=bool)
    in_forest[root] = True
    if order is None:
        order = np.arange(g.n, dtype=np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
        missing = np.setdiff1d(np.arange(g.n, dtype=np.int64), order)
        order = np.concatenate([order, missing])
    got = _kernels.wilson_fill(g.indptr, g.nbr, g.eid, in_forest, parent, pe,
                               order, lazy, cap, rng)
    if got < 0:
        raise CapExhausted("walk cap exhausted; is the graph connected?")
    return OrientedForest(parent, pe)


def complete_run(g, partial, walks=(), fills=None, lazy_fill=False,
                 fill_order=None, cap=None, want_hits=False):
    """Extend a partial forest to a spanning forest of g.

    Pre-drawn traces in `walks` are replayed in order, each loop-erased and
    adjoined where it first hits the growing forest; a trace that runs out
    first raises SampleVoided, keeping conditional laws exact.  `fills`
    drives the fresh walks for the remaining vertices: either a Generator
    (one sequential stream) or a callable vertex -> Generator (keyed streams,
    which make the fill randomness reusable across partial forests).
    Returns the forest, or (forest, hit_vertices) with want_hits.
    """
    if not partial.member.any():
        raise ValueError("partial forest has no members to grow from")
    walks = list(walks)
    if cap is None:
        cap = default_cap(g)
    parent = partial.parent.copy()
    pe = partial.parent_edge.copy()
    in_forest = partial.member.copy()
    stk_v = np.empty(g.n, dtype=np.int64)
    stk_e = np.empty(g.n, dtype=np.int64)
    pos = np.full(g.n, -1, dtype=np.int64)
    hits = np.full(len(walks), -1, dtype=np.int64)
    for i, wp in enumerate(walks):
        if wp.edges is None:
            raise WalkError("pre-drawn walks must carry edge ids")
        hit, _ = _kernels.adjoin_path(in_forest, parent, pe,
                                      wp.vertices, wp.edges, stk_v, stk_e, pos)
        if hit < 0:
            raise SampleVoided("pre-drawn walk %d ended before hitting the forest" % i)
        hits[i] = hit
    if fill_order is None:
        todo = np.flatnonzero(~in_forest)
    else:
        todo = np.asarray(fill_order, dtype=np.int64)
        todo = np.concatenate([todo, np.setdiff1d(np.flatnonzero(~in_forest), todo)])
    if todo.size:
        if fills is None:
            raise ValueError("fills required: %d vertices remain" % todo.size)
        if callable(fills):
            for v in todo:
                if in_forest[v]:
                    continue
                got = _kernels.wilson_single(g.indptr, g.nbr, g.eid, in_forest,
                                             parent, pe, v, lazy_fill, cap,
                                             fills(int(v)), stk_v, stk_e, pos)
                if got < 0:
                    raise CapExhausted("fill walk from %d hit the cap" % v)
        else:
            got = _kernels.wilson_fill(g.indptr, g.nbr, g.eid, in_forest,
                                       parent, pe, todo, lazy_fill, cap, fills)
            if got < 0:
                raise CapExhausted("fill walk hit the cap")
    forest = OrientedForest(parent, pe)
    return (forest, hits) if want_hits else forest


def sample_gm(g, root, x_walks, fills, lazy_fill=False, want_hits=False, cap=None):
    """Wilson's algorithm begun with the given (already shifted) walks.

    Equivalent to completing the run of the root-only partial forest: the
    first walks attach the traces' loop erasures, fresh walks fill the rest.
    """
    partial = empty_partial(g.n, seeds=[root])
    return complete_run(g, partial, walks=x_walks, fills=fills,
                        lazy_fill=lazy_fill, cap=cap, want_hits=want_hits)


def delete_root(forest, root):
    """Forest on 0..n-2 from a tree on n vertices rooted at its last vertex.

    The edges into the deleted root are remembered in root_edges, keyed by
    the interior vertex that owned them.
    """
    if root != forest.n - 1:
        raise ValueError("delete_root expects the root to be the last vertex")
    if forest.parent[root] >= 0:
        raise ValueError("vertex %d is not a root" % root)
    parent = forest.parent[:root].copy()
    pe = forest.parent_edge[:root].copy()
    root_edges = np.full(root, -1, dtype=np.int64)
    at_b = parent == root
    root_edges[at_b] = pe[at_b]
    parent[at_b] = -1
    pe[at_b] = -1
    return OrientedForest(parent, pe, root_edges=root_edges)


def sample_wired_usf(box, rng, lazy=False, cap=None, order=None):
    """One uniform spanning forest sample of a wired box, on interior ids.

    Samples the spanning tree of the wired graph rooted at the boundary
    vertex and deletes that vertex; trees of the forest are the components
    left behind, each remembering its boundary attachment in root_edges.
    """
    tree = wilson_ust(box.graph, box.b, rng, order=order, lazy=lazy, cap=cap)
    return delete_root(tree, box.b)


def check_forest(forest, g):
    """Validate orientation, edge incidence, and acyclicity against g."""
    n = forest.n
    assert n == g.n or (forest.root_edges is not None and n == g.n - 1)
    sizes = np.empty(n, dtype=np.int64)
    flag = np.empty(n, dtype=bool)
    _kernels.subtree_reduce(forest.parent, np.zeros(n, dtype=bool), sizes, flag)
    roots = forest.roots()
    assert sizes[roots].sum() == n, "parent pointers contain a cycle"
    for v in range(n):
        p = forest.parent[v]
        if p < 0:
            assert forest.parent_edge[v] == -1
            continue
        e = forest.parent_edge[v]
        u, w = g.edge_endpoints(e)
        assert {int(v), int(p)} == {u, w}, "parent_edge does not join v to parent"
    if forest.root_edges is not None:
        for v in np.flatnonzero(forest.root_edges >= 0):
            u, w = g.edge_endpoints(forest.root_edges[v])
            assert int(v) in (u, w)
    return True


def forest_to_text(forest):
    """Structural dump: `n` header then one `v parent_or_-1` line per vertex."""
    out = io.StringIO()
    out.write("%d\n" % forest.n)
    for v in range(forest.n):
        out.write("%d %d\n" % (v, forest.parent[v]))
    return out.getvalue()


def forest_from_text(text):
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    n = int(lines[0])
    parent = np.full(n, -1, dtype=np.int64)
    for ln in lines[1:n + 1]:
        v, p = (int(x) for x in ln.split())
        parent[v] = p
    return OrientedForest(parent, np.full(n, -1, dtype=np.int64))
