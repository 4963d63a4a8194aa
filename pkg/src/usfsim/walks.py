"""Lazy random walks, traces, and chronological loop erasure.

The lazy walk holds with probability exactly 1/2 and otherwise moves along a
uniformly chosen incident edge (parallel edges raise the chance of their
shared neighbor).  Each step consumes a single uniform: u < 1/2 is a hold,
else the edge index is read off the remaining half.  A recorded trace stores
the vertex sequence plus the edge ids used, with -1 marking holds, so loop
erasure and forest adjoining can replay it without touching the rng.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernels


class WalkError(ValueError):
    pass


@dataclass(frozen=True)
class WalkPath:
    """A recorded walk segment.

    vertices has one more entry than edges; edges[t] is the edge id taken
    between vertices[t] and vertices[t+1], or -1 for a lazy hold.  start_time
    is the absolute time of vertices[0], so a path shifted to time m simply
    drops its first m steps and remembers the offset.  truncated marks a
    run_until trace that hit its cap before its target.
    """

    vertices: np.ndarray
    edges: np.ndarray | None = None
    start_time: int = 0
    truncated: bool = False

    def __post_init__(self):
        if self.edges is not None and self.edges.size != self.vertices.size - 1:
            raise WalkError("edges must be one shorter than vertices")

    @property
    def steps(self):
        return self.vertices.size - 1

    @property
    def end_time(self):
        return self.start_time + self.steps

    def vertex_at(self, t):
        """Vertex occupied at absolute time t."""
        if not self.start_time <= t <= self.end_time:
            raise WalkError("time %d outside [%d, %d]" % (t, self.start_time, self.end_time))
        return int(self.vertices[t - self.start_time])

    def from_time(self, m):
        """The same walk viewed from absolute time m onward."""
        if not self.start_time <= m <= self.end_time:
            raise WalkError("shift m=%d outside recorded range" % m)
        k = m - self.start_time
        return WalkPath(self.vertices[k:],
                        None if self.edges is None else self.edges[k:],
                        start_time=m, truncated=self.truncated)

    def up_to(self, horizon):
        """The first `horizon` steps (fewer if the record is shorter)."""
        k = min(horizon, self.steps)
        return WalkPath(self.vertices[:k + 1],
                        None if self.edges is None else self.edges[:k],
                        start_time=self.start_time, truncated=self.truncated)


def lazy_step(g, v, rng):
    """One lazy step from v; returns (next_vertex, edge_or_minus_one)."""
    if g.degree(v) == 0:
        raise WalkError("walk stuck at degree-zero vertex %d" % v)
    u = rng.random()
    if u < 0.5:
        return v, -1
    j = g.indptr[v] + min(int((u - 0.5) * 2.0 * g.degree(v)), g.degree(v) - 1)
    return int(g.nbr[j]), int(g.eid[j])


def random_walk(g, start, horizon, rng, lazy=True, start_time=0):
    """Pre-draw a full walk of `horizon` steps starting at `start`."""
    if horizon < 0:
        raise WalkError("horizon must be nonnegative")
    out_v = np.empty(horizon + 1, dtype=np.int64)
    out_e = np.empty(horizon, dtype=np.int64)
    rc = _kernels.gen_walk(g.indptr, g.nbr, g.eid, start, horizon, lazy, rng,
                           out_v, out_e)
    if rc == -2:
        raise WalkError("walk reached a degree-zero vertex")
    return WalkPath(out_v, out_e, start_time=start_time)


def run_until(g, start, stop, rng, cap, lazy=True, start_time=0):
    """Walk until entering `stop` (vertex set or boolean mask), cap-limited.

    A trace that exhausts the cap is returned with truncated=True rather than
    raising; callers decide whether that voids their sample.
    """
    mask = _as_mask(g.n, stop)
    out_v = np.empty(cap + 1, dtype=np.int64)
    out_e = np.empty(max(cap, 1), dtype=np.int64)
    k, hit = _kernels.walk_until(g.indptr, g.nbr, g.eid, start, mask, cap,
                                 lazy, rng, out_v, out_e)
    return WalkPath(out_v[:k].copy(), out_e[:k - 1].copy(),
                    start_time=start_time, truncated=not bool(hit))


def _as_mask(n, stop):
    if isinstance(stop, np.ndarray) and stop.dtype == bool:
        if stop.size != n:
            raise WalkError("stop mask has wrong length")
        return stop
    mask = np.zeros(n, dtype=bool)
    idx = np.asarray(list(stop) if not isinstance(stop, np.ndarray) else stop,
                     dtype=np.int64)
    mask[idx] = True
    return mask


@dataclass(frozen=True)
class LoopErasedPath:
    """A self-avoiding path produced by chronological loop erasure."""

    vertices: np.ndarray
    edges: np.ndarray | None = None

    @property
    def steps(self):
        return self.vertices.size - 1


def loop_erase(path):
    """Chronological loop erasure of a walk trace.

    Revisiting a vertex erases the cycle just closed; lazy holds erase to
    nothing.  The erased path keeps, for every retained vertex, the edge by
    which the walk first stepped beyond the vertex's final visit, so the
    result is a genuine path in the multigraph.
    """
    verts = path.vertices if isinstance(path, WalkPath) else np.asarray(path, dtype=np.int64)
    edges = path.edges if isinstance(path, WalkPath) else None
    out_v = [int(verts[0])]
    out_e = [-1]
    pos = {int(verts[0]): 0}
    for t in range(verts.size - 1):
        w = int(verts[t + 1])
        e = -1 if edges is None else int(edges[t])
        if edges is not None and e == -1:
            continue  # lazy hold
        if w == out_v[-1] and edges is None:
            continue  # hold recorded without edge ids
        p = pos.get(w)
        if p is not None:
            for x in out_v[p + 1:]:
                del pos[x]
            del out_v[p + 1:]
            del out_e[p + 1:]
        else:
            pos[w] = len(out_v)
            out_v.append(w)
            out_e.append(e)
    ev = np.array(out_v, dtype=np.int64)
    ee = None if edges is None else np.array(out_e[1:], dtype=np.int64)
    return LoopErasedPath(ev, ee)


def hitting_time(path, target, after=None):
    """First absolute time >= after at which the walk sits in `target`.

    Returns None if the recorded trace never enters the set (callers treat
    that as censored, not as infinity).  `after` defaults to the trace start.
    """
    if after is None:
        after = path.start_time
    if after > path.end_time:
        return None
    k0 = max(0, after - path.start_time)
    seg = path.vertices[k0:]
    if isinstance(target, np.ndarray) and target.dtype == bool:
        hits = np.flatnonzero(target[seg])
    else:
        tgt = np.asarray(sorted(set(int(x) for x in target)), dtype=np.int64)
        hits = np.flatnonzero(np.isin(seg, tgt))
    if hits.size == 0:
        return None
    return int(path.start_time + k0 + hits[0])


def intersection_count(path_a, path_b, from_time=None):
    """Number of distinct vertices visited by both walks at/after from_time."""
    ta = path_a.start_time if from_time is None else from_time
    tb = path_b.start_time if from_time is None else from_time
    sa = path_a.vertices[max(0, ta - path_a.start_time):]
    sb = path_b.vertices[max(0, tb - path_b.start_time):]
    return int(np.intersect1d(sa, sb).size)


def walk_to_text(path, seed_note=""):
    """One vertex id per line, with a header recording times and provenance."""
    out = io.StringIO()
    out.write("# walk start_time=%d steps=%d%s\n"
              % (path.start_time, path.steps,
                 (" " + seed_note) if seed_note else ""))
    for v in path.vertices:
        out.write("%d\n" % v)
    return out.getvalue()


def walk_from_text(text):
    verts = [int(ln) for ln in text.splitlines()
             if ln.strip() and not ln.startswith("#")]
    start_time = 0
    for ln in text.splitlines():
        if ln.startswith("# walk"):
            for tok in ln.split():
                if tok.startswith("start_time="):
                    start_time = int(tok.split("=")[1])
    return WalkPath(np.array(verts, dtype=np.int64), start_time=start_time)
