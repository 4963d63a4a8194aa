"""The forest/walk coupling: induced subforests, run completion at a shift,
the component events they control, and conditional estimation on top.

A RootedSystem fixes the sampling setup: a graph with the root its forests
grow toward, plus the metric graph balls are measured in.  Wired boxes store
forests on interior ids (the boundary vertex is the root and is deleted from
samples); plain rooted graphs store the whole tree.  All constructions here
are phrased at the rooted-graph level and translated at the edges.

Conventions for the wired proxy, recorded once: the boundary vertex counts
as part of every radius-R induced subforest (trees reach infinity through
it), and walk positions sitting exactly on the boundary vertex void the
sample rather than guessing what the infinite walk would have done.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .analysis import components, distinct_components, eval_property, past_reaches
from .graph import GraphError, contract_and_delete
from .rng import ROLE_FOREST, ROLE_WALK, fill_streams, stream
from .walks import WalkError, hitting_time, random_walk
from .wilson import (CapExhausted, OrientedForest, PartialForest, SampleVoided,
                     default_cap, delete_root, empty_partial, wilson_ust)


class RootedSystem:
    """A graph, the root its forests point at, and the metric for balls.

    interior=True marks the wired-box convention: the root is the last
    vertex, samples live on the other ids, and the metric graph (the free
    box) covers exactly those ids so the boundary shortcut never contracts
    distances.
    """

    def __init__(self, graph, root, metric=None, interior=False):
        self.graph = graph
        self.root = int(root)
        self.interior = bool(interior)
        self.metric = graph if metric is None else metric
        if interior:
            if self.root != graph.n - 1:
                raise GraphError("interior systems need the root last")
            if self.metric.n != graph.n - 1:
                raise GraphError("metric graph must cover the interior ids")
        elif self.metric.n != graph.n:
            raise GraphError("metric graph must cover all vertices")

    @classmethod
    def from_box(cls, box):
        return cls(box.graph, box.b, metric=box.interior, interior=True)

    @classmethod
    def plain(cls, graph, root):
        return cls(graph, root)

    @property
    def stored_n(self):
        return self.graph.n - 1 if self.interior else self.graph.n

    def draw_forest(self, rng, lazy=False, cap=None):
        tree = wilson_ust(self.graph, self.root, rng, lazy=lazy, cap=cap)
        return delete_root(tree, self.root) if self.interior else tree

    def store(self, forest_w):
        return delete_root(forest_w, self.root) if self.interior else forest_w

    def fr_mask(self, forest, u1, radius):
        """Stored-level mask of the radius-R induced subforest around u1.

        Keeps v exactly when past(v) leaves the ball B(u1, R); for plain
        systems the root is kept unconditionally so completion terminates.
        """
        outside = ~self.metric.ball_mask(u1, radius)
        keep = past_reaches(forest, outside)
        if not self.interior:
            keep = keep.copy()
            keep[self.root] = True
        return keep

    def lift_partial(self, forest, mask):
        """Graph-level PartialForest from a stored-level future-closed mask."""
        n = self.graph.n
        parent = np.full(n, -1, dtype=np.int64)
        pe = np.full(n, -1, dtype=np.int64)
        member = np.zeros(n, dtype=bool)
        member[self.root] = True
        idx = np.flatnonzero(mask)
        if self.interior:
            fp = forest.parent[idx]
            parent[idx] = np.where(fp >= 0, fp, self.root)
            pe[idx] = np.where(fp >= 0, forest.parent_edge[idx],
                               forest.root_edges[idx])
        else:
            parent[idx] = forest.parent[idx]
            pe[idx] = forest.parent_edge[idx]
        member[idx] = True
        return PartialForest(parent, pe, member)

    def fr_partial(self, forest, u1, radius):
        return self.lift_partial(forest, self.fr_mask(forest, u1, radius))

    def walk_mask(self, stored_mask, root_value):
        """Extend a stored-level mask to walk ids (root slot appended)."""
        if not self.interior:
            return stored_mask
        return np.append(stored_mask, root_value)

    def __repr__(self):
        return "RootedSystem(n=%d, root=%d, interior=%s)" % (
            self.graph.n, self.root, self.interior)


def shift_walk(walk, m):
    if walk.start_time != 0:
        raise WalkError("expected an unshifted walk")
    if walk.steps < m:
        raise SampleVoided("walk horizon %d shorter than shift %d" % (walk.steps, m))
    return walk.from_time(m)


def attach_walks(g, partial, walks, want_branches=False):
    """Adjoin pre-drawn walks in order to a copy of the partial forest.

    Returns (parent, parent_edge, in_forest, hits, attach): hits[i] is where
    walk i first met the forest grown so far, attach[i] the index of the
    earlier walk whose branch it hit (-1 when it hit the partial itself).
    A walk whose trace runs out first raises SampleVoided: patching it would
    bias the conditional laws the coupling is built to preserve.
    """
    parent = partial.parent.copy()
    pe = partial.parent_edge.copy()
    in_forest = partial.member.copy()
    n = g.n
    stk_v = np.empty(n, dtype=np.int64)
    stk_e = np.empty(n, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    owner = np.full(n, -1, dtype=np.int64)
    hits = np.full(len(walks), -1, dtype=np.int64)
    attach = np.full(len(walks), -1, dtype=np.int64)
    branches = []
    for i, wp in enumerate(walks):
        if wp.edges is None:
            raise WalkError("pre-drawn walks must carry edge ids")
        hit, added = _kernels.adjoin_path(in_forest, parent, pe, wp.vertices,
                                          wp.edges, stk_v, stk_e, pos)
        if hit < 0:
            raise SampleVoided("walk %d ran out before reaching the forest" % i)
        hits[i] = hit
        attach[i] = owner[hit]
        if added:
            owner[stk_v[:added]] = i
        if want_branches:
            branches.append(stk_v[:added].copy())
    if want_branches:
        return parent, pe, in_forest, hits, attach, branches
    return parent, pe, in_forest, hits, attach


def fill_remaining(g, parent, pe, in_forest, fills, lazy_fill=False, cap=None):
    """Fresh loop-erased walks from every vertex still outside the forest.

    fills is a Generator (one sequential stream) or a callable
    vertex -> Generator; keyed streams make the randomness at each start
    vertex reusable across different partial forests, which is what couples
    the interpolating forests to the shifted samplers.
    """
    if cap is None:
        cap = default_cap(g)
    todo = np.flatnonzero(~in_forest)
    if todo.size == 0:
        return
    if fills is None:
        raise ValueError("fills required: %d vertices remain" % todo.size)
    if callable(fills):
        n = g.n
        stk_v = np.empty(n, dtype=np.int64)
        stk_e = np.empty(n, dtype=np.int64)
        pos = np.full(n, -1, dtype=np.int64)
        for v in todo:
            if in_forest[v]:
                continue
            got = _kernels.wilson_single(g.indptr, g.nbr, g.eid, in_forest,
                                         parent, pe, v, lazy_fill, cap,
                                         fills(int(v)), stk_v, stk_e, pos)
            if got < 0:
                raise CapExhausted("fill walk from %d hit the cap" % v)
    else:
        got = _kernels.wilson_fill(g.indptr, g.nbr, g.eid, in_forest, parent,
                                   pe, todo, lazy_fill, cap, fills)
        if got < 0:
            raise CapExhausted("fill walk hit the cap")


def build_fmr(system, forest, walks, m, radius, u1, fills, lazy_fill=False,
              cap=None, want_detail=False):
    """The interpolating forest at shift m and radius R.

    Start from the radius-R subforest of `forest` around u1, adjoin the
    loop erasures of the given walks viewed from time m in order, then
    complete the run from every remaining vertex.  The result is stored like
    `forest` (interior ids for wired boxes) and is itself USF-distributed.
    """
    partial = system.fr_partial(forest, u1, radius)
    shifted = [shift_walk(w, m) for w in walks]
    parent, pe, in_forest, hits, attach = attach_walks(system.graph, partial,
                                                       shifted)
    fill_remaining(system.graph, parent, pe, in_forest, fills,
                   lazy_fill=lazy_fill, cap=cap)
    out = system.store(OrientedForest(parent, pe))
    if want_detail:
        return out, hits, attach
    return out


def run_gm(system, walks, m, fills, lazy_fill=False, cap=None,
           want_detail=False):
    """The shift-m sampler: Wilson's algorithm begun with the walks from
    time m, completed from the root-only partial forest."""
    partial = empty_partial(system.graph.n, seeds=[system.root])
    shifted = [shift_walk(w, m) for w in walks]
    parent, pe, in_forest, hits, attach = attach_walks(system.graph, partial,
                                                       shifted)
    fill_remaining(system.graph, parent, pe, in_forest, fills,
                   lazy_fill=lazy_fill, cap=cap)
    out = system.store(OrientedForest(parent, pe))
    if want_detail:
        return out, hits, attach
    return out


# ---------------------------------------------------------------------------
# events


def walks_at(walks, m):
    return np.array([w.vertex_at(m) for w in walks], dtype=np.int64)


def check_positions(system, walks, m):
    """Void samples whose shifted start sits on the wired boundary vertex."""
    if system.interior and np.any(walks_at(walks, m) == system.root):
        raise SampleVoided("walk at the boundary vertex at shift %d" % m)


def event_w(system, walks, m):
    """Distinct components at the shifted positions, from the walks alone.

    The branches the walks contribute to the shift-m sampler determine the
    component structure at those positions before any filling happens, and
    fills can only attach new vertices, never merge grown branches.
    """
    check_positions(system, walks, m)
    partial = empty_partial(system.graph.n, seeds=[system.root])
    shifted = [shift_walk(w, m) for w in walks]
    _, _, _, _, attach = attach_walks(system.graph, partial, shifted)
    return _attach_distinct(attach)


def event_b(system, forest, walks, m, radius, u1):
    """Every shifted walk first meets the grown forest inside the radius-R
    subforest (boundary vertex included, under the wired convention)."""
    check_positions(system, walks, m)
    partial = system.fr_partial(forest, u1, radius)
    shifted = [shift_walk(w, m) for w in walks]
    _, _, _, _, attach = attach_walks(system.graph, partial, shifted)
    return bool(np.all(attach < 0))


def _attach_distinct(attach):
    comp = np.empty(attach.size, dtype=np.int64)
    for i in range(attach.size):
        comp[i] = i if attach[i] < 0 else comp[attach[i]]
    return int(np.unique(comp).size) == attach.size


def event_b_by_components(system, forest, walks, m, radius, u1, fills,
                          lazy_fill=False, cap=None):
    """Cross-check form of event_b via the completed interpolating forest.

    Labels the shifted positions by the last vertex of their rootward chain
    in F(m,R) before the chain enters the radius-R subforest; positions in
    distinct branches get distinct anchors, positions already inside the
    subforest count as their own phantom component.
    """
    check_positions(system, walks, m)
    fr_mask = system.fr_mask(forest, u1, radius)
    fmr = build_fmr(system, forest, walks, m, radius, u1, fills,
                    lazy_fill=lazy_fill, cap=cap)
    anchors = []
    for i, w in enumerate(walks):
        v = int(w.vertex_at(m))
        if fr_mask[v]:
            anchors.append(("phantom", i))
            continue
        x = v
        while True:
            p = fmr.parent[x]
            if p < 0 or fr_mask[p]:
                break
            x = p
        anchors.append(("anchor", int(x)))
    return len(set(anchors)) == len(anchors)


def event_c(system, forest, u, r, radius):
    """The radius-R subforest avoids every ball B(u_i, r)."""
    mask = system.fr_mask(forest, int(u[0]), radius)
    hit = np.zeros(system.stored_n, dtype=bool)
    for ui in u:
        hit |= system.metric.ball_mask(int(ui), r)
    return not bool(np.any(mask & hit))


def event_d(system, forest, walks, m, u1, radius):
    """The futures (in `forest`) of the shifted positions avoid B(u1, R)."""
    check_positions(system, walks, m)
    ball = system.metric.ball_mask(int(u1), radius)
    for w in walks:
        chain = forest.parent_chain(int(w.vertex_at(m)))
        if np.any(ball[chain]):
            return False
    return True


def walk_taus(system, forest, walks, m, radius, u1):
    """First times >= m each walk hits the radius-R subforest (-1 censored).

    Under the wired convention the boundary vertex counts as part of the
    subforest, since trees attach to infinity through it.
    """
    mask = system.walk_mask(system.fr_mask(forest, u1, radius), True)
    out = np.empty(len(walks), dtype=np.int64)
    for i, w in enumerate(walks):
        t = hitting_time(w, mask, after=m)
        out[i] = -1 if t is None else t
    return out


# ---------------------------------------------------------------------------
# one coupled sample with everything attached


@dataclass
class CouplingSample:
    """One draw of the full coupling at a single (m, R) point."""

    u: tuple
    m: int
    radius: int
    forest: OrientedForest
    fmr: OrientedForest
    gm: OrientedForest | None
    hits: np.ndarray
    attach: np.ndarray
    b_event: bool
    w_event: bool
    taus: np.ndarray


def draw_coupling_sample(system, u, m, radius, master, replica, horizon,
                         with_gm=False, lazy_fill=True, cap=None):
    """Draw (F, X) from named streams and assemble the coupling at (m, R).

    The forest, each walk, and each fill start get their own substream of
    (master, replica), so the same sample is reproducible piecewise.  Fill
    streams are keyed by start vertex and shared between the interpolating
    forest and the shift-m sampler, realizing them as functions of one
    underlying randomness.
    """
    u = tuple(int(x) for x in u)
    forest = system.draw_forest(stream(master, replica, ROLE_FOREST))
    walks = [random_walk(system.graph, ui, horizon,
                         stream(master, replica, ROLE_WALK, i))
             for i, ui in enumerate(u)]
    check_positions(system, walks, m)
    fills = fill_streams(master, replica, m)
    fmr, hits, attach = build_fmr(system, forest, walks, m, radius, u[0],
                                  fills, lazy_fill=lazy_fill, cap=cap,
                                  want_detail=True)
    gm = None
    if with_gm:
        gm = run_gm(system, walks, m, fill_streams(master, replica, m),
                    lazy_fill=lazy_fill, cap=cap)
    return CouplingSample(u=u, m=m, radius=radius, forest=forest, fmr=fmr,
                          gm=gm, hits=hits, attach=attach,
                          b_event=bool(np.all(attach < 0)),
                          w_event=event_w(system, walks, m),
                          taus=walk_taus(system, forest, walks, m, radius, u[0]))


# ---------------------------------------------------------------------------
# conditioning on ball contents


def ball_edge_ids(g, u1, r, metric=None):
    """Ids of edges with both endpoints within distance r of u1."""
    metric = g if metric is None else metric
    inball = metric.ball_mask(int(u1), r)
    if metric.n == g.n - 1:
        inball = np.append(inball, False)
    elif metric.n != g.n:
        raise GraphError("metric graph does not match")
    return np.flatnonzero(inball[g.edge_u] & inball[g.edge_v])


def condition_on_ball(g, u1, r, keep, metric=None):
    """Quotient realizing {forest agrees with `keep` inside the ball}.

    Contracts the kept edges and deletes the other in-ball edges; spanning
    trees of the derived graph correspond exactly to spanning trees of g
    whose in-ball edge set is `keep`.  The kept set must be acyclic.  A
    disconnected derived graph means the conditioning has probability zero,
    which the caller sees on the quotient's derived_connected flag.
    """
    inball = ball_edge_ids(g, u1, r, metric=metric)
    keep = np.asarray(sorted(set(int(e) for e in keep)), dtype=np.int64)
    if keep.size and np.setdiff1d(keep, inball).size:
        raise GraphError("kept edges must lie inside the ball")
    parent = {}

    def find(x):
        while parent.get(x, x) != x:
            parent[x] = parent.get(parent[x], parent[x])
            x = parent[x]
        return x

    for e in keep:
        a, b = find(int(g.edge_u[e])), find(int(g.edge_v[e]))
        if a == b:
            raise GraphError("kept edges contain a cycle")
        parent[a] = b
    delete = np.setdiff1d(inball, keep)
    return contract_and_delete(g, keep, delete)


def sample_conditioned(quotient, root, rng, lazy=False, cap=None):
    """One spanning tree of the base graph drawn from the conditioned law.

    Samples a tree of the derived graph by Wilson's algorithm, maps its
    edges back, adds the contracted edges, and orients everything toward
    root at the base level.
    """
    q = quotient
    if not q.derived_connected:
        raise CapExhausted("derived graph disconnected: conditioning has "
                           "probability zero")
    dtree = wilson_ust(q.derived, int(q.projection[root]), rng, lazy=lazy,
                       cap=cap)
    base_edges = np.concatenate([q.edge_map[dtree.edge_ids()], q.contracted])
    return orient_edges(q.base, base_edges, root)


def orient_edges(g, edge_ids, root):
    """Parent arrays for an acyclic edge set, oriented toward root.

    Vertices not reachable from root along the given edges stay roots of
    their own trees (orientation then proceeds from them arbitrarily but
    deterministically by id order).
    """
    adj = {}
    for e in edge_ids:
        u, v = g.edge_endpoints(int(e))
        adj.setdefault(u, []).append((v, int(e)))
        adj.setdefault(v, []).append((u, int(e)))
    parent = np.full(g.n, -1, dtype=np.int64)
    pe = np.full(g.n, -1, dtype=np.int64)
    seen = np.zeros(g.n, dtype=bool)
    order = [int(root)] + [v for v in range(g.n) if v != root]
    for src in order:
        if seen[src]:
            continue
        seen[src] = True
        queue = [src]
        while queue:
            x = queue.pop()
            for (y, e) in adj.get(x, ()):
                if not seen[y]:
                    seen[y] = True
                    parent[y] = x
                    pe[y] = e
                    queue.append(y)
    return OrientedForest(parent, pe)


# ---------------------------------------------------------------------------
# conditional estimation along the shift ladder


@dataclass
class ConditionalEstimate:
    """Two-armed estimate of a conditional property probability.

    Arm one conditions plain forest samples on distinct components at u;
    arm two evaluates the property at the walk positions (X_m) against an
    independent forest, whose law equals that of the shift-m sampler paired
    with its own walk positions.  Fields are aligned with m_values.
    """

    u: tuple
    m_values: tuple
    n_samples: int
    n_w: int
    p_w: float
    se_w: float
    n_m: np.ndarray
    p_m: np.ndarray
    se_m: np.ndarray
    voids_m: np.ndarray
    w_frac: float

    def gap(self, j):
        return abs(self.p_m[j] - self.p_w)

    def gap_se(self, j):
        return float(np.hypot(self.se_w, self.se_m[j]))


def binomial_se(successes, n):
    if n <= 1:
        return float("nan")
    p = successes / n
    return float(np.sqrt(max(p * (1.0 - p), 1e-12) / n))


_WALK_STRIDE = 64  # walk substream stride per tuple; caps tuples at 64 marks


def estimate_conditional_multi(system, tuples, prop, prop_graph, n_samples,
                               master, m_values, replica=0, lazy_walks=True):
    """Conditional estimates for several vertex tuples over shared forests.

    Per sample, one forest is drawn and every tuple gets its own fresh lazy
    walks from named substreams.  The direct arm keeps samples where the
    tuple lies in distinct trees and evaluates the property there; the
    ladder arm evaluates it at the time-m walk positions unconditionally,
    voiding positions that sit on the boundary vertex.  Sharing the forests
    correlates the tuples' estimates positively, which only makes
    independent-error comparisons between them conservative.  prop_graph
    supplies adjacency and coords (the interior box for wired systems).
    """
    tuples = [tuple(int(x) for x in u) for u in tuples]
    if any(len(u) > _WALK_STRIDE for u in tuples):
        raise ValueError("tuples longer than %d are not supported" % _WALK_STRIDE)
    m_values = tuple(int(m) for m in m_values)
    horizon = max(m_values) if m_values else 0
    k = len(tuples)
    n_w = [0] * k
    t_w = [0] * k
    n_m = np.zeros((k, len(m_values)), dtype=np.int64)
    t_m = np.zeros((k, len(m_values)), dtype=np.int64)
    voids = np.zeros((k, len(m_values)), dtype=np.int64)
    for i in range(n_samples):
        forest = system.draw_forest(stream(master, replica, ROLE_FOREST, i))
        for ti, u in enumerate(tuples):
            walks = [random_walk(system.graph, ui, horizon,
                                 stream(master, replica, ROLE_WALK, i,
                                        ti * _WALK_STRIDE + j),
                                 lazy=lazy_walks)
                     for j, ui in enumerate(u)]
            if distinct_components(forest, u):
                n_w[ti] += 1
                if eval_property(prop, prop_graph, forest, u):
                    t_w[ti] += 1
            for j, m in enumerate(m_values):
                pos = walks_at(walks, m)
                if system.interior and np.any(pos == system.root):
                    voids[ti, j] += 1
                    continue
                n_m[ti, j] += 1
                if eval_property(prop, prop_graph, forest, pos):
                    t_m[ti, j] += 1
    out = []
    for ti, u in enumerate(tuples):
        p_m = np.where(n_m[ti] > 0, t_m[ti] / np.maximum(n_m[ti], 1), np.nan)
        se_m = np.array([binomial_se(t_m[ti, j], n_m[ti, j]) if n_m[ti, j]
                         else np.nan for j in range(len(m_values))])
        out.append(ConditionalEstimate(
            u=u, m_values=m_values, n_samples=n_samples, n_w=n_w[ti],
            p_w=(t_w[ti] / n_w[ti]) if n_w[ti] else float("nan"),
            se_w=binomial_se(t_w[ti], n_w[ti]) if n_w[ti] else float("nan"),
            n_m=n_m[ti], p_m=p_m, se_m=se_m, voids_m=voids[ti],
            w_frac=n_w[ti] / n_samples if n_samples else float("nan")))
    return out


def estimate_conditional(system, u, prop, prop_graph, n_samples, master,
                         m_values, replica=0, lazy_walks=True):
    """Single-tuple form of estimate_conditional_multi."""
    return estimate_conditional_multi(system, [u], prop, prop_graph,
                                      n_samples, master, m_values,
                                      replica=replica,
                                      lazy_walks=lazy_walks)[0]


# ---------------------------------------------------------------------------
# window laws and total variation


def forest_window_key(forest, mask):
    """Hashable restriction of a forest to a vertex mask: the sorted ids of
    its edges with both endpoints inside."""
    idx = np.flatnonzero(forest.parent >= 0)
    keep = mask[idx] & mask[forest.parent[idx]]
    return tuple(np.sort(forest.parent_edge[idx[keep]]).tolist())


@dataclass(frozen=True)
class TvEstimate:
    value: float
    n_a: int
    n_b: int
    support: int


def tv_between(keys_a, keys_b):
    """Total variation distance between two empirical laws of hashable keys."""
    ca, cb = Counter(keys_a), Counter(keys_b)
    na, nb = sum(ca.values()), sum(cb.values())
    if na == 0 or nb == 0:
        raise ValueError("empty sample in tv_between")
    keys = set(ca) | set(cb)
    tv = 0.5 * sum(abs(ca[k] / na - cb[k] / nb) for k in keys)
    return TvEstimate(value=float(tv), n_a=na, n_b=nb, support=len(keys))
