"""Numba kernels for the walk, Wilson, and forest-analysis hot loops.

All kernels take plain int64/bool arrays plus (where they draw randomness) a
numpy Generator, which numba supports natively; draws made here advance the
same bitstream as python-level draws on the same Generator.  Nothing in this
module allocates per step.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def fill_csr(edge_u, edge_v, fill, nbr, eid):
    for e in range(edge_u.size):
        u = edge_u[e]
        v = edge_v[e]
        nbr[fill[u]] = v
        eid[fill[u]] = e
        fill[u] += 1
        nbr[fill[v]] = u
        eid[fill[v]] = e
        fill[v] += 1


@njit(cache=True)
def bfs_distances(indptr, nbr, src, dist):
    n = dist.size
    queue = np.empty(n, dtype=np.int64)
    dist[src] = 0
    queue[0] = src
    head, tail = 0, 1
    while head < tail:
        v = queue[head]
        head += 1
        dv = dist[v]
        for j in range(indptr[v], indptr[v + 1]):
            w = nbr[j]
            if dist[w] < 0:
                dist[w] = dv + 1
                queue[tail] = w
                tail += 1


@njit(cache=True, inline="always")
def _step(indptr, nbr, eid, v, lazy, rng):
    """One walk step from v: returns (w, e); e = -1 encodes a lazy hold."""
    d0 = indptr[v]
    deg = indptr[v + 1] - d0
    if deg == 0:
        return -1, -2
    u = rng.random()
    if lazy:
        if u < 0.5:
            return v, -1
        j = d0 + int((u - 0.5) * 2.0 * deg)
    else:
        j = d0 + int(u * deg)
    if j >= d0 + deg:
        j = d0 + deg - 1
    return nbr[j], eid[j]


@njit(cache=True)
def gen_walk(indptr, nbr, eid, start, horizon, lazy, rng, out_v, out_e):
    """Record exactly `horizon` steps from start.  Returns 0, or -2 if the
    walk reached a degree-zero vertex (recorded length in out_v[0..t])."""
    v = start
    out_v[0] = v
    for t in range(horizon):
        w, e = _step(indptr, nbr, eid, v, lazy, rng)
        if e == -2:
            return -2
        out_v[t + 1] = w
        out_e[t] = e
        v = w
    return 0


@njit(cache=True)
def walk_until(indptr, nbr, eid, start, stop_mask, cap, lazy, rng, out_v, out_e):
    """Walk from start until entering stop_mask, recording the trace.

    Returns (n_vertices, hit) where hit is 1 if a stop vertex was reached and
    0 if the step cap ran out first; n_vertices counts recorded vertices."""
    v = start
    out_v[0] = v
    k = 1
    if stop_mask[v]:
        return 1, 1
    for _ in range(cap):
        w, e = _step(indptr, nbr, eid, v, lazy, rng)
        if e == -2:
            return k, 0
        out_v[k] = w
        out_e[k - 1] = e
        k += 1
        v = w
        if stop_mask[v]:
            return k, 1
    return k, 0


@njit(cache=True)
def wilson_single(indptr, nbr, eid, in_forest, parent, parent_edge,
                  start, lazy, cap, rng, stk_v, stk_e, pos):
    """Run one loop-erased walk from start and adjoin it to the forest.

    The walk is erased chronologically in place: pos[v] holds v's index on
    the current loop-erased stack, so a revisit truncates back to it.  On
    success the stack becomes a forest branch oriented toward the hit vertex
    and the step count is returned; -1 means the cap ran out (forest arrays
    untouched).
    """
    if in_forest[start]:
        return 0
    top = 0
    stk_v[0] = start
    pos[start] = 0
    v = start
    steps = 0
    while steps < cap:
        w, e = _step(indptr, nbr, eid, v, lazy, rng)
        if e == -2:
            break
        steps += 1
        if e == -1:
            continue
        if in_forest[w]:
            for i in range(top):
                x = stk_v[i]
                parent[x] = stk_v[i + 1]
                parent_edge[x] = stk_e[i + 1]
                in_forest[x] = True
                pos[x] = -1
            x = stk_v[top]
            parent[x] = w
            parent_edge[x] = e
            in_forest[x] = True
            pos[x] = -1
            return steps
        p = pos[w]
        if p >= 0:
            for i in range(p + 1, top + 1):
                pos[stk_v[i]] = -1
            top = p
        else:
            top += 1
            stk_v[top] = w
            stk_e[top] = e
            pos[w] = top
        v = w
    for i in range(top + 1):
        pos[stk_v[i]] = -1
    return -1


@njit(cache=True)
def wilson_fill(indptr, nbr, eid, in_forest, parent, parent_edge,
                order, lazy, cap, rng):
    """Complete the forest from every start in `order`, one sequential rng.

    Returns total steps taken, or -1 if any branch hit the cap."""
    n = in_forest.size
    stk_v = np.empty(n, dtype=np.int64)
    stk_e = np.empty(n, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    total = 0
    for k in range(order.size):
        got = wilson_single(indptr, nbr, eid, in_forest, parent, parent_edge,
                            order[k], lazy, cap, rng, stk_v, stk_e, pos)
        if got < 0:
            return -1
        total += got
    return total


@njit(cache=True)
def adjoin_path(in_forest, parent, parent_edge, walk_v, walk_e, stk_v, stk_e, pos):
    """Replay a pre-drawn walk until it hits the forest, loop-erase, adjoin.

    walk_e entries of -1 are lazy holds.  Returns (hit_vertex, n_adjoined);
    the adjoined branch is left in stk_v[:n_adjoined] for the caller.
    hit_vertex is -1 if the recorded walk ran out before hitting the forest
    (forest arrays untouched, second entry 0).
    """
    v = walk_v[0]
    if in_forest[v]:
        return v, 0
    top = 0
    stk_v[0] = v
    pos[v] = 0
    for t in range(walk_e.size):
        e = walk_e[t]
        if e < 0:
            continue
        w = walk_v[t + 1]
        if in_forest[w]:
            for i in range(top):
                x = stk_v[i]
                parent[x] = stk_v[i + 1]
                parent_edge[x] = stk_e[i + 1]
                in_forest[x] = True
                pos[x] = -1
            x = stk_v[top]
            parent[x] = w
            parent_edge[x] = e
            in_forest[x] = True
            pos[x] = -1
            return w, top + 1
        p = pos[w]
        if p >= 0:
            for i in range(p + 1, top + 1):
                pos[stk_v[i]] = -1
            top = p
        else:
            top += 1
            stk_v[top] = w
            stk_e[top] = e
            pos[w] = top
    for i in range(top + 1):
        pos[stk_v[i]] = -1
    return -1, 0


@njit(cache=True)
def components_from_parent(parent, labels):
    """Dense component labels from a parent array; returns the count.

    Labels are assigned in order of first discovery scanning vertex ids
    upward, so the labeling is deterministic for a given forest."""
    n = parent.size
    path = np.empty(n, dtype=np.int64)
    c = 0
    for v in range(n):
        if labels[v] >= 0:
            continue
        x = v
        k = 0
        while parent[x] >= 0 and labels[x] < 0:
            path[k] = x
            k += 1
            x = parent[x]
        if labels[x] >= 0:
            lab = labels[x]
        else:
            lab = c
            c += 1
            labels[x] = lab
        for i in range(k):
            labels[path[i]] = lab
    return c


@njit(cache=True)
def subtree_reduce(parent, own_mask, sizes, flag):
    """One reverse-topological sweep: past sizes and an OR over pasts.

    sizes[v] ends as |past(v)| (v included); flag[v] as whether own_mask holds
    anywhere in past(v)."""
    n = parent.size
    child_count = np.zeros(n, dtype=np.int64)
    for v in range(n):
        sizes[v] = 1
        flag[v] = own_mask[v]
        if parent[v] >= 0:
            child_count[parent[v]] += 1
    queue = np.empty(n, dtype=np.int64)
    tail = 0
    for v in range(n):
        if child_count[v] == 0:
            queue[tail] = v
            tail += 1
    head = 0
    while head < tail:
        v = queue[head]
        head += 1
        p = parent[v]
        if p < 0:
            continue
        sizes[p] += sizes[v]
        if flag[v]:
            flag[p] = True
        child_count[p] -= 1
        if child_count[p] == 0:
            queue[tail] = p
            tail += 1


@njit(cache=True)
def count_adjacent_pairs(indptr, nbr, labels, window_mask, la, lb):
    """Vertices in the window with label la and >= 1 neighbor labeled lb."""
    cnt = 0
    for v in range(labels.size):
        if window_mask[v] and labels[v] == la:
            for j in range(indptr[v], indptr[v + 1]):
                if labels[nbr[j]] == lb:
                    cnt += 1
                    break
    return cnt
