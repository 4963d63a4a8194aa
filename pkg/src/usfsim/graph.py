"""Finite multigraphs in CSR form, box builders, and contraction/deletion quotients.

Vertices are 0..n-1.  Edges are undirected, carry dense ids 0..m-1, and may be
parallel; self-loops are not representable (constructors drop or reject them).
The CSR arrays store each edge twice, once per endpoint, so ``nbr[indptr[v]:
indptr[v+1]]`` lists the neighbors of v with matching edge ids in ``eid``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import _kernels


class GraphError(ValueError):
    pass


# ---------------------------------------------------------------------------
# core type


class Graph:
    """Undirected multigraph with O(1) incidence lookups.

    coords, when present, is an (n, d) int array of lattice coordinates used
    for balls-by-metric and window selection.  Vertices without a meaningful
    position (the wired boundary vertex, merged quotient classes) carry -1 in
    every coordinate.
    """

    def __init__(self, n, edge_u, edge_v, coords=None):
        edge_u = np.asarray(edge_u, dtype=np.int64)
        edge_v = np.asarray(edge_v, dtype=np.int64)
        if edge_u.shape != edge_v.shape or edge_u.ndim != 1:
            raise GraphError("edge endpoint arrays must be 1-d and equal length")
        if edge_u.size and (min(edge_u.min(), edge_v.min()) < 0
                            or max(edge_u.max(), edge_v.max()) >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(edge_u == edge_v):
            raise GraphError("self-loops are not supported")
        self.n = int(n)
        self.m = int(edge_u.size)
        self.edge_u = edge_u
        self.edge_v = edge_v
        self.indptr, self.nbr, self.eid = _build_csr(self.n, edge_u, edge_v)
        if coords is not None:
            coords = np.asarray(coords, dtype=np.int64)
            if coords.shape[0] != self.n:
                raise GraphError("coords must have one row per vertex")
        self.coords = coords
        for a in (self.edge_u, self.edge_v, self.indptr, self.nbr, self.eid):
            a.setflags(write=False)
        if self.coords is not None:
            self.coords.setflags(write=False)

    def degree(self, v):
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def degrees(self):
        return np.diff(self.indptr)

    def neighbors(self, v):
        return self.nbr[self.indptr[v]:self.indptr[v + 1]]

    def incident_edges(self, v):
        return self.eid[self.indptr[v]:self.indptr[v + 1]]

    def edge_endpoints(self, e):
        return int(self.edge_u[e]), int(self.edge_v[e])

    def other_end(self, e, v):
        u, w = self.edge_u[e], self.edge_v[e]
        if v == u:
            return int(w)
        if v == w:
            return int(u)
        raise GraphError("vertex %d not an endpoint of edge %d" % (v, e))

    def distances(self, source):
        """BFS distance from source to every vertex (-1 if unreachable)."""
        dist = np.full(self.n, -1, dtype=np.int64)
        _kernels.bfs_distances(self.indptr, self.nbr, source, dist)
        return dist

    def ball(self, center, radius):
        """Sorted array of vertices within graph distance radius of center."""
        if radius < 0:
            raise GraphError("radius must be nonnegative")
        dist = self.distances(center)
        return np.flatnonzero((dist >= 0) & (dist <= radius))

    def ball_mask(self, center, radius):
        dist = self.distances(center)
        return (dist >= 0) & (dist <= radius)

    def is_connected(self):
        if self.n == 0:
            return True
        return bool(np.all(self.distances(0) >= 0))

    def __repr__(self):
        return "Graph(n=%d, m=%d)" % (self.n, self.m)


def _build_csr(n, edge_u, edge_v):
    m = edge_u.size
    deg = np.zeros(n, dtype=np.int64)
    np.add.at(deg, edge_u, 1)
    np.add.at(deg, edge_v, 1)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    nbr = np.empty(2 * m, dtype=np.int64)
    eid = np.empty(2 * m, dtype=np.int64)
    fill = indptr[:-1].copy()
    _kernels.fill_csr(edge_u, edge_v, fill, nbr, eid)
    return indptr, nbr, eid


# ---------------------------------------------------------------------------
# box builders


@dataclass(frozen=True)
class BoxSpec:
    """A d-dimensional box of side L with a boundary condition.

    boundary is one of "torus", "free", "wired".  The wired box has one extra
    vertex, placed last, adjacent to every face site once per missing free
    neighbor (corners get multiplicity).
    """

    dimension: int
    side: int
    boundary: str = "wired"

    def __post_init__(self):
        if self.dimension < 1:
            raise GraphError("dimension must be >= 1")
        if self.side < 2:
            raise GraphError("side must be >= 2")
        if self.boundary not in ("torus", "free", "wired"):
            raise GraphError("boundary must be torus, free or wired")
        if self.side ** self.dimension > 2 ** 31:
            raise GraphError("box too large: side**dimension exceeds 2**31")

    @property
    def volume(self):
        return self.side ** self.dimension

    @property
    def vertex_count(self):
        return self.volume + (1 if self.boundary == "wired" else 0)


def _box_coords(d, L):
    """Row i holds the base-L digits of i, least significant axis last."""
    idx = np.arange(L ** d, dtype=np.int64)
    coords = np.empty((L ** d, d), dtype=np.int64)
    for j in range(d - 1, -1, -1):
        coords[:, j] = idx % L
        idx //= L
    return coords


def _box_strides(d, L):
    # stride of axis j in the row-major vertex numbering
    return np.array([L ** (d - 1 - j) for j in range(d)], dtype=np.int64)


def make_box(spec):
    """Build the box graph for spec, with coords attached.

    Edge id layout: for torus/free, axis-0 edges first (grouped by axis, and
    within an axis by source vertex id).  The wired box lists the free-box
    edges first with identical ids, then the boundary star edges grouped by
    face site; its boundary vertex is the last vertex id and carries -1
    coordinates.
    """
    d, L = spec.dimension, spec.side
    nv = L ** d
    coords = _box_coords(d, L)
    strides = _box_strides(d, L)
    us, vs = [], []
    for j in range(d):
        if spec.boundary == "torus":
            src = np.arange(nv, dtype=np.int64)
            dst = src + np.where(coords[:, j] < L - 1, strides[j],
                                 -(L - 1) * strides[j])
        else:
            src = np.flatnonzero(coords[:, j] < L - 1)
            dst = src + strides[j]
        us.append(src)
        vs.append(dst)
    if spec.boundary == "wired":
        missing = ((coords == 0).sum(axis=1) + (coords == L - 1).sum(axis=1))
        face = np.repeat(np.arange(nv, dtype=np.int64), missing)
        us.append(face)
        vs.append(np.full(face.size, nv, dtype=np.int64))
        coords = np.vstack([coords, np.full((1, d), -1, dtype=np.int64)])
        nv += 1
    return Graph(nv, np.concatenate(us), np.concatenate(vs), coords=coords)


def box_vertex(spec, coordinate):
    """Vertex id of a lattice coordinate tuple in make_box numbering."""
    d, L = spec.dimension, spec.side
    if len(coordinate) != d:
        raise GraphError("coordinate has wrong dimension")
    v = 0
    for x in coordinate:
        if not 0 <= x < L:
            raise GraphError("coordinate out of the box")
        v = v * L + int(x)
    return v


def box_center(spec):
    return box_vertex(spec, [spec.side // 2] * spec.dimension)


class WiredBox:
    """A wired box bundled with its free-box twin for interior geometry.

    graph is the wired box (boundary vertex b last); interior is the free box
    on the same vertex ids 0..volume-1, whose edge ids coincide with the
    wired graph's first interior.m ids.  Balls and windows for experiments are
    always taken in the interior metric, where the boundary shortcut through b
    does not exist.
    """

    def __init__(self, spec):
        if spec.boundary != "wired":
            spec = BoxSpec(spec.dimension, spec.side, "wired")
        self.spec = spec
        self.graph = make_box(spec)
        self.interior = make_box(BoxSpec(spec.dimension, spec.side, "free"))
        self.b = self.graph.n - 1

    @property
    def volume(self):
        return self.spec.volume

    def vertex(self, coordinate):
        return box_vertex(self.spec, coordinate)

    def center(self):
        return box_center(self.spec)

    def __repr__(self):
        return "WiredBox(d=%d, L=%d)" % (self.spec.dimension, self.spec.side)


# ---------------------------------------------------------------------------
# quotients


@dataclass
class Quotient:
    """Result of collapsing and/or deleting parts of a base graph.

    projection maps base vertex -> derived vertex; section maps derived
    vertex -> a representative base vertex.  edge_map maps derived edge id ->
    base edge id, and base_edge_map the other way (-1 for edges that were
    contracted, deleted, or became self-loops).  derived_connected records
    whether the derived graph is connected; callers that need a tree decide
    what to do with a disconnected quotient.
    """

    base: Graph
    derived: Graph
    projection: np.ndarray
    section: np.ndarray
    edge_map: np.ndarray
    base_edge_map: np.ndarray
    contracted: np.ndarray
    deleted: np.ndarray
    dropped_loops: np.ndarray
    derived_connected: bool


def _quotient_from_projection(g, proj, n_derived, drop_edges, contracted,
                              deleted):
    keep = np.flatnonzero(~drop_edges)
    du = proj[g.edge_u[keep]]
    dv = proj[g.edge_v[keep]]
    loops = du == dv
    edge_map = keep[~loops]
    dropped = keep[loops]
    derived = Graph(n_derived, du[~loops], dv[~loops], coords=None)
    base_edge_map = np.full(g.m, -1, dtype=np.int64)
    base_edge_map[edge_map] = np.arange(edge_map.size, dtype=np.int64)
    section = np.full(n_derived, -1, dtype=np.int64)
    # first base vertex in each class is its representative
    for v in range(g.n - 1, -1, -1):
        section[proj[v]] = v
    return Quotient(g, derived, proj, section, edge_map, base_edge_map,
                    contracted, deleted, dropped, derived.is_connected())


def contract_and_delete(g, contract, delete=()):
    """Contract the edges in `contract`, delete the edges in `delete`.

    The two sets must be disjoint.  Contracted classes keep the base order of
    their smallest members in the derived numbering.  Parallel edges created
    by contraction are kept; edges that become self-loops are dropped and
    recorded.
    """
    contract = np.asarray(sorted(set(int(e) for e in contract)), dtype=np.int64)
    delete = np.asarray(sorted(set(int(e) for e in delete)), dtype=np.int64)
    for arr, what in ((contract, "contract"), (delete, "delete")):
        if arr.size and (arr.min() < 0 or arr.max() >= g.m):
            raise GraphError("%s edge id out of range" % what)
    if np.intersect1d(contract, delete).size:
        raise GraphError("contract and delete sets overlap")
    parent = np.arange(g.n, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for e in contract:
        a, b = find(g.edge_u[e]), find(g.edge_v[e])
        if a != b:
            # keep the smaller id as class root so numbering is stable
            if a > b:
                a, b = b, a
            parent[b] = a
    roots = np.array([find(v) for v in range(g.n)], dtype=np.int64)
    uniq, proj = np.unique(roots, return_inverse=True)
    drop = np.zeros(g.m, dtype=bool)
    drop[contract] = True
    drop[delete] = True
    return _quotient_from_projection(g, proj.astype(np.int64), uniq.size, drop,
                                     contract, delete)


def wire_boundary(g, boundary_vertices):
    """Merge a vertex set into a single derived vertex, placed last.

    Unlike contract_and_delete this needs no edges between the merged
    vertices.  Edges inside the set become self-loops and are dropped.
    """
    mask = np.zeros(g.n, dtype=bool)
    bv = np.asarray(list(boundary_vertices), dtype=np.int64)
    if bv.size == 0:
        raise GraphError("boundary set is empty")
    if bv.min() < 0 or bv.max() >= g.n:
        raise GraphError("boundary vertex out of range")
    mask[bv] = True
    proj = np.empty(g.n, dtype=np.int64)
    proj[~mask] = np.arange(g.n - mask.sum(), dtype=np.int64)
    proj[mask] = g.n - mask.sum()
    none = np.empty(0, dtype=np.int64)
    return _quotient_from_projection(g, proj, g.n - int(mask.sum()) + 1,
                                     np.zeros(g.m, dtype=bool), none, none)


# ---------------------------------------------------------------------------
# named small graphs and serialization


def complete_graph(n):
    us, vs = zip(*[(i, j) for i in range(n) for j in range(i + 1, n)])
    return Graph(n, us, vs)


def cycle_graph(n):
    if n == 2:
        return Graph(2, [0, 0], [1, 1])  # double edge, the 2-cycle
    us = list(range(n))
    vs = [(i + 1) % n for i in range(n)]
    return Graph(n, us, vs)


def path_graph(n):
    return Graph(n, list(range(n - 1)), list(range(1, n)))


def graph_to_text(g):
    """Serialize as: `n m` header, one `u v` line per edge id, then an
    optional `coords d` block with one row per vertex."""
    out = io.StringIO()
    out.write("%d %d\n" % (g.n, g.m))
    for e in range(g.m):
        out.write("%d %d\n" % (g.edge_u[e], g.edge_v[e]))
    if g.coords is not None:
        out.write("coords %d\n" % g.coords.shape[1])
        for row in g.coords:
            out.write(" ".join(str(int(x)) for x in row) + "\n")
    return out.getvalue()


def graph_from_text(text):
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise GraphError("empty graph text")
    try:
        n, m = (int(x) for x in lines[0].split())
    except ValueError:
        raise GraphError("bad header, expected `n m`") from None
    if len(lines) < 1 + m:
        raise GraphError("expected %d edge lines" % m)
    us = np.empty(m, dtype=np.int64)
    vs = np.empty(m, dtype=np.int64)
    for e in range(m):
        parts = lines[1 + e].split()
        if len(parts) != 2:
            raise GraphError("bad edge line %d" % (e + 2))
        us[e], vs[e] = int(parts[0]), int(parts[1])
    coords = None
    rest = lines[1 + m:]
    if rest:
        head = rest[0].split()
        if head[0] != "coords" or len(head) != 2:
            raise GraphError("expected `coords d` after edges")
        d = int(head[1])
        if len(rest) != 1 + n:
            raise GraphError("expected %d coordinate rows" % n)
        coords = np.array([[int(x) for x in ln.split()] for ln in rest[1:]],
                          dtype=np.int64)
        if coords.shape != (n, d):
            raise GraphError("coordinate rows have wrong shape")
    return Graph(n, us, vs, coords=coords)


def check_graph(g):
    """Structural invariants of the CSR form; raises on violation."""
    assert g.indptr[0] == 0 and g.indptr[-1] == 2 * g.m
    # every edge id appears exactly twice, once from each endpoint
    counts = np.bincount(g.eid, minlength=g.m)
    assert g.m == 0 or np.all(counts == 2)
    for e in range(min(g.m, 2000)):
        u, v = g.edge_endpoints(e)
        assert v in set(g.neighbors(u).tolist())
        assert u in set(g.neighbors(v).tolist())
    return True
