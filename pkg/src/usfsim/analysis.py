"""Forest observables: components, futures and pasts, induced subforests,
and the window properties the indistinguishability experiments evaluate.

The future of v is its path to the root of its tree; the past is everything
whose future passes through v.  The induced subforest at radius R keeps the
vertices whose past leaves the ball around a marked vertex, a future-closed
set, so it is a valid partial forest to complete runs from.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .wilson import PartialForest, partial_from_forest


def components(forest):
    """Dense component labels (cached on the forest)."""
    got = forest._cache.get("labels")
    if got is None:
        labels = np.full(forest.n, -1, dtype=np.int64)
        c = _kernels.components_from_parent(forest.parent, labels)
        labels.setflags(write=False)
        got = (labels, int(c))
        forest._cache["labels"] = got
    return got


def component_sizes(forest):
    labels, c = components(forest)
    return np.bincount(labels, minlength=c)


def distinct_components(forest, vertices):
    """Whether the given vertices lie in pairwise distinct trees."""
    labels, _ = components(forest)
    lab = labels[np.asarray(list(vertices), dtype=np.int64)]
    return int(np.unique(lab).size) == len(lab)


def future(forest, v):
    """The path from v to its root, v included."""
    return forest.parent_chain(v)


def past_sizes(forest):
    """|past(v)| for every v, one reverse-topological sweep (cached)."""
    got = forest._cache.get("past_sizes")
    if got is None:
        sizes = np.empty(forest.n, dtype=np.int64)
        flag = np.empty(forest.n, dtype=bool)
        _kernels.subtree_reduce(forest.parent, np.zeros(forest.n, dtype=bool),
                                sizes, flag)
        sizes.setflags(write=False)
        forest._cache["past_sizes"] = sizes
        got = sizes
    return got


def past(forest, v):
    """All vertices whose future passes through v (v included)."""
    got = forest._cache.get("children")
    if got is None:
        order = np.argsort(forest.parent, kind="stable")
        keys = forest.parent[order]
        got = (order, keys)
        forest._cache["children"] = got
    order, keys = got
    out = [int(v)]
    frontier = [int(v)]
    while frontier:
        nxt = []
        for x in frontier:
            lo = np.searchsorted(keys, x, side="left")
            hi = np.searchsorted(keys, x, side="right")
            nxt.extend(int(c) for c in order[lo:hi])
        out.extend(nxt)
        frontier = nxt
    return np.array(sorted(out), dtype=np.int64)


def past_reaches(forest, mask):
    """For every v, whether past(v) meets the masked set."""
    sizes = np.empty(forest.n, dtype=np.int64)
    flag = np.empty(forest.n, dtype=bool)
    _kernels.subtree_reduce(forest.parent, np.ascontiguousarray(mask), sizes, flag)
    return flag


def f_sub_r(forest, metric_graph, u1, radius):
    """The subforest induced by vertices whose past leaves the ball.

    Keeps v exactly when past(v) contains a vertex at metric distance > R
    from u1; equivalently, the union of futures of the outside vertices.
    The result is future-closed, hence a PartialForest ready to complete.
    Balls are taken in metric_graph, which for wired boxes is the interior
    box so the boundary shortcut does not contract distances.
    """
    if metric_graph.n != forest.n:
        raise ValueError("metric graph and forest disagree on vertex count")
    outside = ~metric_graph.ball_mask(u1, radius)
    keep = past_reaches(forest, outside)
    return partial_from_forest(forest, keep)


def f_sub_r_mask(forest, metric_graph, u1, radius):
    outside = ~metric_graph.ball_mask(u1, radius)
    return past_reaches(forest, outside)


# ---------------------------------------------------------------------------
# window properties


PROPERTY_KINDS = ("adjacency_count", "component_size", "always_true",
                  "always_false", "custom")

# name -> callable(graph, forest, labels, vertices, spec) -> bool
PROPERTY_REGISTRY = {}


def register_property(name, fn):
    PROPERTY_REGISTRY[name] = fn


@dataclass(frozen=True)
class PropertySpec:
    """A measurable component property evaluated at a vertex tuple.

    kind "adjacency_count": every pair of marked components has at least
    `threshold` window vertices of the first lying adjacent to the second.
    kind "component_size": every marked component has at least `min_size`
    vertices.  The window is the centered sub-box containing the given
    fraction of each side (only meaningful when the graph has coords);
    out-of-range windows are clamped and flagged once.
    """

    kind: str
    threshold: int = 1
    min_size: int = 1
    window_fraction: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in PROPERTY_KINDS:
            raise ValueError("unknown property kind %r" % (self.kind,))
        if self.kind == "custom" and not self.name:
            raise ValueError("custom property needs a registry name")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ValueError("window_fraction must be in (0, 1]")


def window_mask(graph, fraction):
    """Boolean mask of the centered sub-box holding `fraction` of each side."""
    if graph.coords is None:
        raise ValueError("graph has no coordinates, cannot take a window")
    coords = graph.coords
    side = int(coords.max()) + 1
    width = max(1, int(round(fraction * side)))
    if width > side:
        warnings.warn("window wider than the box; clamped")
        width = side
    lo = (side - width) // 2
    hi = lo + width
    ok = np.all((coords >= lo) & (coords < hi), axis=1)
    return ok


def eval_property(spec, graph, forest, vertices):
    """Evaluate spec at the marked vertices of a forest.

    The marked components are those of `vertices`; the value is a plain
    bool.  graph supplies adjacency and coords and must live on the same
    vertex ids as the forest (for wired boxes, pass the interior box).
    """
    labels, _ = components(forest)
    verts = np.asarray(list(vertices), dtype=np.int64)
    if spec.kind == "always_true":
        return True
    if spec.kind == "always_false":
        return False
    if spec.kind == "custom":
        return bool(PROPERTY_REGISTRY[spec.name](graph, forest, labels, verts, spec))
    if spec.kind == "component_size":
        sizes = component_sizes(forest)
        return bool(np.all(sizes[labels[verts]] >= spec.min_size))
    # adjacency_count
    if spec.window_fraction < 1.0:
        wmask = window_mask(graph, spec.window_fraction)
    else:
        wmask = np.ones(graph.n, dtype=bool)
    marks = labels[verts]
    for i in range(len(verts)):
        for j in range(len(verts)):
            if i == j or marks[i] == marks[j]:
                continue
            cnt = _kernels.count_adjacent_pairs(graph.indptr, graph.nbr,
                                                labels, wmask,
                                                marks[i], marks[j])
            if cnt < spec.threshold:
                return False
    return True
