import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from usfsim.graph import BoxSpec, Graph, cycle_graph, make_box, path_graph
from usfsim.rng import stream
from usfsim.walks import (WalkError, WalkPath, hitting_time,
                          intersection_count, lazy_step, loop_erase,
                          random_walk, run_until, walk_from_text, walk_to_text)


def test_streams_are_reproducible():
    g = make_box(BoxSpec(2, 5, "torus"))
    a = random_walk(g, 0, 200, stream(11, 3, 1))
    b = random_walk(g, 0, 200, stream(11, 3, 1))
    c = random_walk(g, 0, 200, stream(11, 3, 2))
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.edges, b.edges)
    assert not np.array_equal(a.vertices, c.vertices)


def test_lazy_step_frequencies_on_multigraph():
    # vertex 0: double edge to 1, single edge to 2; lazy law is
    # hold 1/2, neighbor 1 with 1/2 * 2/3 = 1/3, neighbor 2 with 1/6
    g = Graph(3, [0, 0, 0], [1, 1, 2])
    rng = stream(21, 0)
    n = 100_000
    hits = {-1: 0, 1: 0, 2: 0}
    for _ in range(n):
        w, e = lazy_step(g, 0, rng)
        hits[w if e >= 0 else -1] += 1
    for target, p in ((-1, 0.5), (1, 1 / 3), (2, 1 / 6)):
        se = np.sqrt(p * (1 - p) / n)
        assert abs(hits[target] / n - p) < 3 * se


def test_lazy_step_degree_zero():
    with pytest.raises(WalkError):
        lazy_step(Graph(3, [0], [1]), 2, stream(0, 0))


def test_lazy_hitting_time_on_triangle():
    # independent oracle: solve the first-step equations for the expected
    # lazy hitting time of vertex 1 from 0 on the triangle
    a = np.array([[1 - 0.5, -0.25], [-0.25, 1 - 0.5]])
    b = np.array([1.0, 1.0])
    e0, e2 = np.linalg.solve(a, b)
    assert e0 == pytest.approx(4.0)
    g = cycle_graph(3)
    n = 20_000
    times = np.empty(n)
    for i in range(n):
        p = run_until(g, 0, [1], stream(31, 0, i), cap=2000)
        assert not p.truncated
        times[i] = p.steps
    se = times.std(ddof=1) / np.sqrt(n)
    assert abs(times.mean() - e0) < 3 * se


def test_run_until_basics():
    g = path_graph(5)
    p = run_until(g, 2, [2], stream(1, 0), cap=10)
    assert p.steps == 0 and not p.truncated
    q = run_until(g, 0, [4], stream(1, 1), cap=3)
    assert q.truncated and q.steps == 3
    r = run_until(g, 0, np.array([False, False, False, False, True]),
                  stream(1, 2), cap=100_000)
    assert not r.truncated and r.vertices[-1] == 4


def test_walk_path_slicing():
    g = cycle_graph(4)
    p = random_walk(g, 0, 50, stream(7, 0), start_time=0)
    s = p.from_time(10)
    assert s.start_time == 10 and s.steps == 40
    assert s.vertex_at(10) == p.vertex_at(10)
    assert s.vertex_at(50) == p.vertex_at(50)
    t = p.up_to(5)
    assert t.steps == 5 and t.vertices[0] == p.vertices[0]
    with pytest.raises(WalkError):
        p.vertex_at(51)
    with pytest.raises(WalkError):
        p.from_time(51)


def test_lazy_hold_fraction():
    g = make_box(BoxSpec(3, 3, "torus"))
    p = random_walk(g, 0, 40_000, stream(13, 0))
    frac = float((p.edges == -1).mean())
    assert abs(frac - 0.5) < 3 * np.sqrt(0.25 / p.steps)
    q = random_walk(g, 0, 1000, stream(13, 1), lazy=False)
    assert np.all(q.edges >= 0)


def _assert_valid_erasure(g, walk, erased):
    # starts where the walk starts, ends where it ends, self-avoiding,
    # and every step uses a real edge of the graph
    assert erased.vertices[0] == walk.vertices[0]
    assert erased.vertices[-1] == walk.vertices[-1]
    assert len(set(erased.vertices.tolist())) == erased.vertices.size
    for t in range(erased.steps):
        u, v = g.edge_endpoints(int(erased.edges[t]))
        assert {int(erased.vertices[t]), int(erased.vertices[t + 1])} == {u, v}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(0, 300))
def test_loop_erase_properties(seed, steps):
    g = make_box(BoxSpec(2, 4, "torus"))
    walk = random_walk(g, 0, steps, stream(seed, 9))
    erased = loop_erase(walk)
    _assert_valid_erasure(g, walk, erased)
    again = loop_erase(WalkPath(erased.vertices, erased.edges))
    assert np.array_equal(erased.vertices, again.vertices)
    assert np.array_equal(erased.edges, again.edges)


def test_loop_erase_hand_case():
    # 0 1 2 0 2 1: revisiting 0 erases the loop, then 2 and 1 survive
    erased = loop_erase(np.array([0, 1, 2, 0, 2, 1]))
    assert erased.vertices.tolist() == [0, 2, 1]
    assert erased.edges is None


def test_loop_erase_lazy_holds_vanish():
    g = cycle_graph(3)
    verts = np.array([0, 0, 1, 1, 2])
    edges = np.array([-1, 0, -1, 1])
    erased = loop_erase(WalkPath(verts, edges))
    assert erased.vertices.tolist() == [0, 1, 2]
    assert erased.edges.tolist() == [0, 1]


def test_hitting_time():
    p = WalkPath(np.array([3, 2, 1, 2, 5]), start_time=4)
    assert hitting_time(p, [2]) == 5
    assert hitting_time(p, [2], after=6) == 7
    assert hitting_time(p, [9]) is None
    assert hitting_time(p, [3], after=9) is None
    mask = np.zeros(6, dtype=bool)
    mask[5] = True
    assert hitting_time(p, mask) == 8


def test_intersection_count():
    a = WalkPath(np.array([0, 1, 2, 3]))
    b = WalkPath(np.array([5, 2, 1, 6]))
    assert intersection_count(a, b) == 2
    assert intersection_count(a, b, from_time=1) == 2
    assert intersection_count(a, b, from_time=2) == 0
    assert intersection_count(a, b) == intersection_count(b, a)


def test_walk_text_round_trip():
    g = cycle_graph(4)
    p = random_walk(g, 1, 20, stream(3, 3), start_time=0).from_time(4)
    text = walk_to_text(p, seed_note="seed=3 stream=3")
    q = walk_from_text(text)
    assert q.start_time == 4
    assert np.array_equal(q.vertices, p.vertices)
