import numpy as np
import pytest
from scipy import stats

from usfsim.analysis import PropertySpec, eval_property
from usfsim.coupling import (ConditionalEstimate, RootedSystem, attach_walks,
                             ball_edge_ids, build_fmr, condition_on_ball,
                             draw_coupling_sample, estimate_conditional,
                             estimate_conditional_multi, event_b,
                             event_b_by_components, event_c, event_d, event_w,
                             forest_window_key, run_gm, sample_conditioned,
                             shift_walk, tv_between, walk_taus, walks_at)
from usfsim.graph import (BoxSpec, GraphError, WiredBox, box_vertex,
                          cycle_graph, path_graph)
from usfsim.oracle import (distribution_pvalue, empirical_counts,
                           enumerate_conditioned, tree_distribution,
                           uniformity_pvalue)
from usfsim.rng import ROLE_AUX, ROLE_FILL, ROLE_WALK, fill_streams, stream
from usfsim.walks import WalkError, random_walk
from usfsim.wilson import (CapExhausted, OrientedForest, SampleVoided,
                           check_forest)


def _wired(d, L):
    return RootedSystem.from_box(WiredBox(BoxSpec(d, L, "wired")))


def test_rooted_system_validation():
    box = WiredBox(BoxSpec(1, 3, "wired"))
    sys1 = RootedSystem.from_box(box)
    assert sys1.interior and sys1.root == 3 and sys1.stored_n == 3
    with pytest.raises(GraphError):
        RootedSystem(box.graph, 0, metric=box.interior, interior=True)
    with pytest.raises(GraphError):
        RootedSystem(box.graph, 3, metric=box.graph, interior=True)
    with pytest.raises(GraphError):
        RootedSystem(cycle_graph(4), 0, metric=cycle_graph(5))
    plain = RootedSystem.plain(cycle_graph(4), 0)
    assert not plain.interior and plain.stored_n == 4


def test_fr_partial_lift_hand_case():
    # wired 1d box with three interior sites; the forest drops interior edge
    # 1, so vertex 0 carries 1 and both roots attach to the boundary
    system = _wired(1, 3)
    forest = OrientedForest([-1, 0, -1], [-1, 0, -1], root_edges=[2, -1, 3])
    mask = system.fr_mask(forest, 1, 0)
    assert mask.tolist() == [True, False, True]
    part = system.fr_partial(forest, 1, 0)
    assert part.member.tolist() == [True, False, True, True]
    assert part.parent.tolist() == [3, -1, 3, -1]
    assert part.parent_edge.tolist() == [2, -1, 3, -1]
    empty = system.fr_partial(forest, 1, 1)
    assert empty.member.tolist() == [False, False, False, True]


def test_shift_walk_guards():
    g = cycle_graph(4)
    w = random_walk(g, 0, 10, stream(1, 0))
    assert shift_walk(w, 3).start_time == 3
    with pytest.raises(SampleVoided):
        shift_walk(w, 11)
    with pytest.raises(WalkError):
        shift_walk(w.from_time(2), 3)


def test_fmr_and_gm_are_usf_distributed():
    # the interpolating forest and the shifted sampler both have the plain
    # wired-forest law, here checked on the four-outcome 1d box
    system = _wired(1, 3)
    keys_fmr, keys_gm, voids = [], [], 0
    for i in range(4000):
        try:
            s = draw_coupling_sample(system, (1,), m=2, radius=1, master=51,
                                     replica=i, horizon=64, with_gm=True)
        except SampleVoided:
            voids += 1
            continue
        keys_fmr.append(s.fmr.tree_key())
        keys_gm.append(s.gm.tree_key())
    assert voids < 1000
    assert len(empirical_counts(keys_fmr)) == 4
    assert uniformity_pvalue(empirical_counts(keys_fmr)) > 0.01
    assert uniformity_pvalue(empirical_counts(keys_gm)) > 0.01


def test_fmr_plain_system_is_ust_distributed():
    system = RootedSystem.plain(cycle_graph(4), 0)
    keys = []
    for i in range(3000):
        forest = system.draw_forest(stream(52, i, 0))
        walks = [random_walk(system.graph, 2, 256, stream(52, i, 1))]
        fmr = build_fmr(system, forest, walks, 1, 1, 2,
                        fills=stream(52, i, 2))
        keys.append(fmr.tree_key())
    assert uniformity_pvalue(empirical_counts(keys), n_outcomes=4) > 0.01


def test_gm_is_independent_of_walk_positions():
    # the shifted sampler's tree and the positions that seeded it are
    # independent, which is what lets estimates reuse one forest per sample
    system = _wired(1, 3)
    rows = {}
    for i in range(4000):
        w = random_walk(system.graph, 1, 256, stream(53, i, ROLE_WALK))
        pos = int(w.vertex_at(2))
        if pos == system.root:
            continue
        try:
            gm = run_gm(system, [w], 2, stream(53, i, ROLE_FILL))
        except SampleVoided:
            continue
        cells = rows.setdefault(gm.tree_key(), [0, 0, 0])
        cells[pos] += 1
    table = np.array([rows[k] for k in sorted(rows)])
    assert table.shape == (4, 3)
    assert stats.chi2_contingency(table).pvalue > 0.01


def test_estimate_matches_literal_shifted_sampler():
    # arm two of the estimator evaluates the property at (forest, X_m) with a
    # forest drawn once per sample; the literal construction rebuilds the
    # shifted sampler per sample.  The two must agree within Monte Carlo error.
    system = _wired(2, 3)
    u = (4,)
    m = 2
    prop = PropertySpec("component_size", min_size=5)
    box_interior = system.metric
    n = 1500
    est = estimate_conditional(system, u, prop, box_interior, n, 54, (m,))
    t_lit = n_lit = 0
    for i in range(n):
        w = random_walk(system.graph, 4, 2048, stream(55, i, ROLE_WALK))
        pos = walks_at([w], m)
        if pos[0] == system.root:
            continue
        gm = run_gm(system, [w], m, stream(55, i, ROLE_FILL))
        n_lit += 1
        t_lit += bool(eval_property(prop, box_interior, gm, pos))
    p_lit = t_lit / n_lit
    se = np.hypot(est.se_m[0], np.sqrt(p_lit * (1 - p_lit) / n_lit))
    assert abs(est.p_m[0] - p_lit) < 3.5 * se
    assert est.n_m[0] + est.voids_m[0] == n


def test_event_b_matches_anchor_form():
    system = _wired(2, 3)
    u = (4, 0)
    checked = 0
    for i in range(200):
        forest = system.draw_forest(stream(56, i, 0))
        walks = [random_walk(system.graph, ui, 48, stream(56, i, 1, j))
                 for j, ui in enumerate(u)]
        for m in (0, 1, 2):
            for radius in (1, 2):
                try:
                    direct = event_b(system, forest, walks, m, radius, u[0])
                    anchored = event_b_by_components(
                        system, forest, walks, m, radius, u[0],
                        fills=fill_streams(56, i, m))
                except SampleVoided:
                    continue
                assert direct == anchored
                checked += 1
    assert checked > 300


def test_event_w_and_attach():
    system = _wired(2, 3)
    seen = {True: 0, False: 0}
    for i in range(300):
        walks = [random_walk(system.graph, ui, 48, stream(57, i, 1, j))
                 for j, ui in enumerate((4, 0))]
        try:
            seen[event_w(system, walks, 1)] += 1
        except SampleVoided:
            pass
    assert seen[True] > 0 and seen[False] > 0


def test_tau_identity_on_avoidance_event():
    # when the radius-R subforest clears the r-balls and m <= r, nothing can
    # be hit before time m, so the shifted and unshifted hitting times agree
    system = _wired(2, 5)
    u = (12,)
    r, radius, m = 1, 2, 1
    held = 0
    for i in range(150):
        forest = system.draw_forest(stream(58, i, 0))
        walks = [random_walk(system.graph, u[0], 64, stream(58, i, 1))]
        t0 = walk_taus(system, forest, walks, 0, radius, u[0])
        tm = walk_taus(system, forest, walks, m, radius, u[0])
        if tm[0] >= 0 and t0[0] >= 0:
            assert tm[0] >= t0[0]
        if event_c(system, forest, u, r, radius):
            held += 1
            assert np.array_equal(t0, tm)
    assert held > 5


def test_event_c_and_d_hand_cases():
    system = _wired(1, 3)
    forest = OrientedForest([-1, 0, -1], [-1, 0, -1], root_edges=[2, -1, 3])
    # the radius-0 subforest around 1 is {0, 2}; it meets B(1, 1) but not B(1, 0)
    assert event_c(system, forest, (1,), 0, 0)
    assert not event_c(system, forest, (1,), 1, 0)
    walks = [random_walk(system.graph, 1, 8, stream(59, 0, 0))]
    assert walks[0].vertex_at(0) == 1
    # the future of 1 in the stored forest is {1, 0}, which meets B(1, 1)
    assert not event_d(system, forest, walks, 0, 1, 1)
    # ... but stays clear of B(2, 0)
    assert event_d(system, forest, walks, 0, 2, 0)


def test_ball_edges_and_conditioning_on_the_cycle():
    g = cycle_graph(4)
    assert ball_edge_ids(g, 0, 1).tolist() == [0, 3]
    q = condition_on_ball(g, 0, 1, keep=[0, 3])
    ref = tree_distribution(enumerate_conditioned(g, contain=[0, 3]))
    assert len(ref) == 2
    rng = stream(60, 0)
    keys = []
    for _ in range(2000):
        t = sample_conditioned(q, 0, rng)
        check_forest(t, g)
        keys.append(t.tree_key())
    counts = empirical_counts(keys)
    assert set(counts) == set(ref)
    assert distribution_pvalue(counts, ref) > 0.01


def test_conditioning_error_paths():
    g = cycle_graph(4)
    with pytest.raises(GraphError):
        condition_on_ball(g, 0, 1, keep=[1])  # edge outside the ball
    with pytest.raises(GraphError):
        condition_on_ball(g, 0, 2, keep=[0, 1, 2, 3])  # kept cycle
    q = condition_on_ball(g, 0, 1, keep=[])
    assert not q.derived_connected
    with pytest.raises(CapExhausted):
        sample_conditioned(q, 0, stream(61, 0))


def test_conditioned_law_on_wired_box():
    box = WiredBox(BoxSpec(1, 3, "wired"))
    q = condition_on_ball(box.graph, 0, 1, keep=[0], metric=box.interior)
    ref = tree_distribution(enumerate_conditioned(box.graph, contain=[0]))
    assert len(ref) == 3
    rng = stream(62, 0)
    keys = [sample_conditioned(q, box.b, rng).tree_key() for _ in range(1500)]
    counts = empirical_counts(keys)
    assert set(counts) == set(ref)
    assert distribution_pvalue(counts, ref) > 0.01


def test_estimate_conditional_trivial_properties():
    system = _wired(2, 3)
    u = (4, 0)
    top = estimate_conditional(system, u, PropertySpec("always_true"),
                               system.metric, 400, 63, (0, 1))
    assert top.n_w > 0 and top.p_w == 1.0
    assert np.all(top.p_m[top.n_m > 0] == 1.0)
    assert 0.0 < top.w_frac <= 1.0
    assert np.all(top.n_m + top.voids_m == 400)
    bot = estimate_conditional(system, u, PropertySpec("always_false"),
                               system.metric, 400, 63, (0, 1))
    assert bot.p_w == 0.0 and np.all(bot.p_m[bot.n_m > 0] == 0.0)
    assert bot.gap(0) == 0.0
    assert bot.gap_se(0) > 0.0


def test_estimate_conditional_is_deterministic_and_multi_consistent():
    system = _wired(2, 3)
    prop = PropertySpec("adjacency_count", threshold=1)
    a = estimate_conditional(system, (4, 0), prop, system.metric, 300, 64, (0, 2))
    b = estimate_conditional(system, (4, 0), prop, system.metric, 300, 64, (0, 2))
    assert a.n_w == b.n_w and a.p_w == b.p_w
    assert np.array_equal(a.n_m, b.n_m) and np.array_equal(a.voids_m, b.voids_m)
    multi = estimate_conditional_multi(system, [(4, 0), (4, 8)], prop,
                                       system.metric, 300, 64, (0, 2))
    assert multi[0].n_w == a.n_w and multi[0].p_w == a.p_w
    assert np.array_equal(multi[0].n_m, a.n_m)
    assert multi[1].u == (4, 8)


def test_forest_window_key_and_tv():
    f1 = OrientedForest([1, 2, -1], [0, 1, -1])
    f2 = OrientedForest([-1, 0, 1], [-1, 0, 1])
    mask = np.array([True, True, False])
    assert forest_window_key(f1, mask) == (0,)
    assert forest_window_key(f2, mask) == (0,)
    assert forest_window_key(f1, np.array([True, False, False])) == ()
    est = tv_between(["a", "a", "b"], ["a", "b", "b"])
    assert est.value == pytest.approx(1 / 3)
    assert est.n_a == 3 and est.n_b == 3 and est.support == 2
    assert tv_between(["a"], ["a"]).value == 0.0
    with pytest.raises(ValueError):
        tv_between([], ["a"])


def test_draw_coupling_sample_shape():
    system = _wired(2, 3)
    i = 0
    while True:
        try:
            s = draw_coupling_sample(system, (4, 2), m=1, radius=1, master=65,
                                     replica=i, horizon=64, with_gm=True)
            break
        except SampleVoided:
            i += 1
    assert s.u == (4, 2) and s.m == 1 and s.radius == 1
    check_forest(s.forest, system.graph)
    check_forest(s.fmr, system.graph)
    check_forest(s.gm, system.graph)
    assert s.hits.shape == (2,) and s.attach.shape == (2,)
    assert isinstance(s.b_event, bool) and isinstance(s.w_event, bool)
    assert np.all((s.taus == -1) | (s.taus >= s.m))
