import numpy as np
import pytest

from usfsim.analysis import (PropertySpec, components, component_sizes,
                             distinct_components, eval_property, f_sub_r,
                             f_sub_r_mask, future, past, past_reaches,
                             past_sizes, register_property, window_mask)
from usfsim.graph import BoxSpec, box_vertex, cycle_graph, make_box, path_graph
from usfsim.oracle import enumerate_oriented_forests
from usfsim.rng import stream
from usfsim.wilson import OrientedForest, check_forest, wilson_ust


def _forest(parent):
    parent = np.asarray(parent, dtype=np.int64)
    pe = np.where(parent >= 0, 0, -1).astype(np.int64)
    return OrientedForest(parent, pe)


def test_components_and_sizes():
    f = _forest([-1, 0, -1, 2, 3])
    labels, c = components(f)
    assert c == 2
    assert labels[0] == labels[1] and labels[2] == labels[3] == labels[4]
    assert labels[0] != labels[2]
    assert sorted(component_sizes(f).tolist()) == [2, 3]
    assert distinct_components(f, [1, 3])
    assert not distinct_components(f, [0, 1])


def test_future_and_past_hand_case():
    f = _forest([1, 2, -1, 2, 3])
    assert future(f, 0).tolist() == [0, 1, 2]
    assert future(f, 2).tolist() == [2]
    assert past(f, 2).tolist() == [0, 1, 2, 3, 4]
    assert past(f, 3).tolist() == [3, 4]
    assert past(f, 0).tolist() == [0]
    assert past_sizes(f).tolist() == [1, 2, 5, 2, 1]


def test_past_future_duality_exhaustively():
    # past(v) = {u : v lies on u's path to the root}, over every oriented
    # spanning forest of the four-cycle
    g = cycle_graph(4)
    for parent, pe in enumerate_oriented_forests(g):
        f = OrientedForest(parent, pe)
        for v in range(4):
            dual = sorted(u for u in range(4) if v in future(f, u))
            assert past(f, v).tolist() == dual
            assert past_sizes(f)[v] == len(dual)


def test_past_reaches():
    f = _forest([1, 2, -1, 2, 3])
    mask = np.array([False, False, False, False, True])
    assert past_reaches(f, mask).tolist() == [False, False, True, True, True]


def test_induced_subforest_hand_case():
    # tree rooted at 2 over the path metric; the radius-1 ball at 0 is {0, 1},
    # so the kept set is the union of futures of {2, 3, 4}
    f = _forest([1, 2, -1, 2, 3])
    metric = path_graph(5)
    part = f_sub_r(f, metric, 0, 1)
    assert part.member.tolist() == [False, False, True, True, True]
    assert part.parent.tolist() == [-1, -1, -1, 2, 3]
    empty = f_sub_r(f, metric, 2, 10)
    assert not empty.member.any()


def test_induced_subforest_equals_union_of_futures():
    spec = BoxSpec(2, 4, "free")
    g = make_box(spec)
    u1 = box_vertex(spec, (1, 1))
    for i in range(20):
        f = wilson_ust(g, 0, stream(41, i))
        check_forest(f, g)
        prev = None
        for radius in (0, 1, 2, 3):
            mask = f_sub_r_mask(f, g, u1, radius)
            ball = g.ball_mask(u1, radius)
            expect = np.zeros(g.n, dtype=bool)
            for v in np.flatnonzero(~ball):
                expect[future(f, v)] = True
            assert np.array_equal(mask, expect)
            if prev is not None:
                assert np.all(mask <= prev)  # shrinks as the ball grows
            prev = mask


def test_window_mask():
    g = make_box(BoxSpec(2, 5, "free"))
    w = window_mask(g, 0.6)
    assert w.sum() == 9
    spec = BoxSpec(2, 5, "free")
    assert w[box_vertex(spec, (1, 1))] and w[box_vertex(spec, (3, 3))]
    assert not w[box_vertex(spec, (0, 2))]
    assert window_mask(g, 1.0).all()
    with pytest.raises(ValueError):
        window_mask(cycle_graph(3), 0.5)


def test_property_spec_validation():
    with pytest.raises(ValueError):
        PropertySpec("no_such_kind")
    with pytest.raises(ValueError):
        PropertySpec("custom")
    with pytest.raises(ValueError):
        PropertySpec("always_true", window_fraction=0.0)


def test_eval_property_cases():
    g = cycle_graph(4)
    f = _forest([1, -1, 3, -1])  # components {0,1} and {2,3}
    assert eval_property(PropertySpec("always_true"), g, f, [0, 2])
    assert not eval_property(PropertySpec("always_false"), g, f, [0, 2])
    assert eval_property(PropertySpec("component_size", min_size=2), g, f, [0, 2])
    assert not eval_property(PropertySpec("component_size", min_size=3), g, f, [0, 2])
    # each marked component touches the other along both cycle boundaries
    assert eval_property(PropertySpec("adjacency_count", threshold=2), g, f, [0, 2])
    assert not eval_property(PropertySpec("adjacency_count", threshold=3), g, f, [0, 2])
    # a single mark has no ordered pairs to fail on
    assert eval_property(PropertySpec("adjacency_count", threshold=99), g, f, [0])
    # marks in one component are skipped, not compared with themselves
    assert eval_property(PropertySpec("adjacency_count", threshold=99), g, f, [0, 1])


def test_eval_property_windowed():
    spec = BoxSpec(2, 5, "free")
    g = make_box(spec)
    parent = np.full(25, -1, dtype=np.int64)
    # two slabs: rows x in {0,1} chain to (0,0), rows x in {2,3,4} to (2,0)
    for v in range(25):
        x, y = divmod(v, 5)
        if y > 0:
            parent[v] = v - 1
        elif x not in (0, 2):
            parent[v] = box_vertex(spec, (x - 1, 0))
    pe = np.where(parent >= 0, 0, -1).astype(np.int64)
    f = OrientedForest(parent, pe)
    u, v = box_vertex(spec, (0, 2)), box_vertex(spec, (3, 2))
    full = PropertySpec("adjacency_count", threshold=5)
    assert eval_property(full, g, f, [u, v])
    # the 3-wide centered window sees only 3 of the 5 contact columns
    win = PropertySpec("adjacency_count", threshold=4, window_fraction=0.6)
    assert not eval_property(win, g, f, [u, v])
    win3 = PropertySpec("adjacency_count", threshold=3, window_fraction=0.6)
    assert eval_property(win3, g, f, [u, v])


def test_custom_property_registry():
    calls = []

    def probe(graph, forest, labels, verts, spec):
        calls.append(tuple(verts))
        return len(verts) == 2

    register_property("probe", probe)
    g = cycle_graph(4)
    f = _forest([1, -1, 3, -1])
    spec = PropertySpec("custom", name="probe")
    assert eval_property(spec, g, f, [0, 2])
    assert not eval_property(spec, g, f, [0, 1, 2])
    assert calls == [(0, 2), (0, 1, 2)]
