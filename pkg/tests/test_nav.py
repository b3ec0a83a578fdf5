import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uncmap.nav import (COMPLEX, SIMPLE, STOP, ContractError, Episode, PerceptionCache, PerceptionConfig,
                        PolicyConfig, WaypointGraph, candidate_set, gen_scene, metrics, nn_action, run_episode,
                        score_candidates)
from uncmap.nav.policy import region_logit, softmax
TARGET = np.array([1.0, 0.0, 0.0])


def feature(occ=10.0, sem=(1.0, 0.0, 0.0), u=(0.0, 0.0, 0.0)):
    return np.array([occ, *sem, *u], dtype=np.float64)


# -- scenes -------------------------------------------------------------------


def scene_signature(sc):
    boxes = [(b.lo.tobytes(), b.hi.tobytes(), b.label, b.color.tobytes(), b.texture, b.salt) for b in sc.world.boxes]
    nodes = [n.position.tobytes() for n in sc.graph.nodes]
    return boxes, nodes, sc.graph.adj, sc.start, sc.goal, sc.target


@pytest.mark.parametrize("difficulty", [SIMPLE, COMPLEX])
def test_scene_deterministic(difficulty):
    assert scene_signature(gen_scene(4, difficulty)) == scene_signature(gen_scene(4, difficulty))
    assert scene_signature(gen_scene(4, difficulty)) != scene_signature(gen_scene(5, difficulty))


@given(st.integers(0, 10_000))
def test_scene_invariants(seed):
    for diff in (SIMPLE, COMPLEX):
        sc = gen_scene(seed, diff)
        assert sc.graph.connected() and sc.graph.is_consistent()
        assert np.isfinite(sc.graph.distance(sc.start, sc.goal))
        goal_lm = [lm for lm in sc.landmarks if lm.node == sc.goal]
        assert goal_lm and goal_lm[0].label == sc.target and not goal_lm[0].decoy
        if diff == COMPLEX:
            assert sc.n_duplicates >= 2 and sc.n_occluders >= 2
            assert sum(lm.label == sc.target for lm in sc.landmarks) >= 3
        else:
            assert sc.n_duplicates == 0 and sc.n_occluders == 0
            labels = [lm.label for lm in sc.landmarks]
            assert len(set(labels)) == len(labels)


def test_unknown_difficulty():
    with pytest.raises(ValueError):
        gen_scene(0, "medium")


@pytest.mark.parametrize("difficulty", [SIMPLE, COMPLEX])
def test_rendered_labels_are_scene_classes(difficulty):
    sc = gen_scene(2, difficulty)
    allowed = sc.world.classes()
    for node in range(len(sc.graph)):
        for fr in sc.panorama(node, 16):
            hit = fr.depth > 0
            assert set(np.unique(fr.labels[hit]).tolist()) <= allowed
            assert np.all(fr.labels[~hit] == 0)


# -- scoring ------------------------------------------------------------------


def test_single_candidate():
    _, p = score_candidates([3], {3: feature()}, None, TARGET, PolicyConfig())
    assert p.tolist() == [1.0]


def test_equal_features_split_evenly():
    _, p = score_candidates([1, 2], {1: feature(), 2: feature()}, None, TARGET, PolicyConfig())
    assert p.tolist() == [0.5, 0.5]


def test_empty_candidates():
    with pytest.raises(ContractError):
        score_candidates([], {}, None, TARGET, PolicyConfig())


def test_gamma_flips_argmax_as_hand_logits_predict():
    cfg = PolicyConfig()
    a = feature(sem=(1.0, 0.0, 0.0), u=(1.0, 1.0, 1.0))     # on-target but uncertain
    b = feature(sem=(0.6, 0.8, 0.0), u=(0.0, 0.0, 0.0))     # cos 0.6, certain
    pen = -(1 - np.exp(-10.0 / cfg.occ_scale))
    by_hand = {g: (2.0 * 1.0 + pen - g * 3.0, 2.0 * 0.6 + pen) for g in (0.0, 1.0)}
    for g, (la, lb) in by_hand.items():
        logits, p = score_candidates([1, 2], {1: a, 2: b}, None, TARGET, cfg, gamma=g)
        assert np.allclose(logits, [la, lb])
        assert np.allclose(p, softmax([la, lb]))
    assert by_hand[0.0][0] > by_hand[0.0][1] and by_hand[1.0][0] < by_hand[1.0][1]
    assert np.argmax(score_candidates([1, 2], {1: a, 2: b}, None, TARGET, cfg, gamma=0.0)[1]) == 0
    assert np.argmax(score_candidates([1, 2], {1: a, 2: b}, None, TARGET, cfg, gamma=1.0)[1]) == 1


def test_stop_bonus_sign():
    cfg = PolicyConfig()
    on = feature(sem=(1.0, 0.0, 0.0))
    off = feature(sem=(0.0, 1.0, 0.0))
    l_on, _ = score_candidates([STOP], {}, on, TARGET, cfg)
    l_off, _ = score_candidates([STOP], {}, off, TARGET, cfg)
    assert np.isclose(l_on[0], region_logit(on, TARGET, cfg, 1.0) + cfg.stop_bonus)
    assert np.isclose(l_off[0], region_logit(off, TARGET, cfg, 1.0) - cfg.stop_bonus)


feats = st.lists(st.floats(0, 1), min_size=7, max_size=7).map(np.array)


@given(st.lists(feats, min_size=1, max_size=6), st.floats(0, 1))
def test_probabilities_on_simplex(fs, g):
    cands = list(range(len(fs)))
    _, p = score_candidates(cands + [STOP], dict(zip(cands, fs)), fs[0], TARGET, PolicyConfig(), gamma=g)
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-9


@given(st.lists(feats, min_size=2, max_size=6), st.floats(0, 1), st.floats(1.0, 50.0))
def test_uncertainty_scale_invariance(fs, g, c):
    cands = list(range(len(fs)))
    scaled = [np.r_[f[:4], c * f[4:]] for f in fs]
    la, _ = score_candidates(cands, dict(zip(cands, fs)), None, TARGET, PolicyConfig(), gamma=g)
    lb, _ = score_candidates(cands, dict(zip(cands, scaled)), None, TARGET, PolicyConfig(), gamma=g / c)
    assert np.allclose(la, lb, rtol=1e-9, atol=1e-9)
    assert np.argmax(la) == np.argmax(lb) or np.isclose(np.max(la), la[np.argmax(lb)])


def test_gamma_range_checked():
    with pytest.raises(ValueError):
        PolicyConfig(gamma=1.5)


# -- actions ------------------------------------------------------------------


def six_node_graph():
    g = WaypointGraph()
    pts = [(0, 0, 0), (1, 0, 0), (2, 0, 0), (1, 1, 0), (2, 1, 0), (3, 0.5, 0)]
    for q in pts:
        g.add_node(q)
    for a, b in [(0, 1), (1, 2), (1, 3), (3, 4), (2, 5), (4, 5), (2, 4)]:
        g.add_edge(a, b)
    return g


def all_paths_first_hop(g, src, dst):
    """Brute force: enumerate every simple path and take the shortest one's first hop."""
    best = None
    others = [n for n in range(len(g)) if n not in (src, dst)]
    for k in range(len(others) + 1):
        for mid in itertools.permutations(others, k):
            path = [src, *mid, dst]
            if all(b in g.adj[a] for a, b in zip(path, path[1:])):
                cand = (g.path_length(path), path)
                if best is None or cand[0] < best[0] - 1e-12:
                    best = cand
    return best[1][1]


def test_adjacent_and_stop():
    g = six_node_graph()
    assert nn_action(np.array([0.7, 0.3]), [1, STOP], g, 0) == (1, 1)
    assert nn_action(np.array([0.2, 0.7, 0.1]), [0, 3, STOP], g, 1) == (3, 3)
    assert nn_action(np.array([0.2, 0.1, 0.7]), [0, 3, STOP], g, 1) == (STOP, STOP)


def test_ties_break_by_node_id():
    g = six_node_graph()
    assert nn_action(np.array([0.4, 0.4, 0.2]), [3, 2, STOP], g, 1) == (2, 2)


@pytest.mark.parametrize("src,dst", [(0, 4), (0, 5), (3, 5), (5, 0), (4, 0)])
def test_backtrack_first_hop_matches_brute_force(src, dst):
    g = six_node_graph()
    cands = [dst, STOP]
    choice, nxt = nn_action(np.array([0.9, 0.1]), cands, g, src)
    assert choice == dst
    assert nxt == all_paths_first_hop(g, src, dst)


def test_candidate_set_includes_visited_and_stop():
    g = six_node_graph()
    g.nodes[0].visited = g.nodes[1].visited = g.nodes[4].visited = True
    assert candidate_set(g, 1) == [0, 2, 3, 4, STOP]


def test_graph_rejects_bad_edges():
    g = WaypointGraph()
    a = g.add_node((0, 0, 0))
    b = g.add_node((0, 0, 0))
    with pytest.raises(ValueError):
        g.add_edge(a, a)
    with pytest.raises(ValueError):
        g.add_edge(a, b)


# -- metrics ------------------------------------------------------------------


def ep(outcome, p, ell):
    return Episode(2, "unambiguous", 0, 1, 15, path=[0, 1], outcome=outcome, path_length=p, shortest=ell)


def test_metrics_examples():
    assert metrics([ep("arrived", 1.0, 1.0), ep("stop-at-goal", 2.0, 2.0)]) == (1.0, 1.0)
    assert metrics([ep("max-steps", 3.0, 1.0)]) == (0.0, 0.0)
    assert metrics([ep("arrived", 2.0, 1.0)]) == (1.0, 0.5)
    assert metrics([ep("arrived", 2.0, 1.0), ep("stop-elsewhere", 1.0, 1.0)]) == (0.5, 0.25)
    assert metrics([]) == (0.0, 0.0)


# -- episodes -----------------------------------------------------------------


@pytest.fixture(scope="module")
def cache():
    return PerceptionCache(PerceptionConfig())


def check_path(sc, e):
    assert e.path[0] == sc.start
    for a, b in zip(e.path, e.path[1:]):
        assert b in sc.graph.adj[a]
    assert np.isclose(e.path_length, sc.graph.path_length(e.path))


def test_start_at_goal_stops_immediately(cache):
    sc = gen_scene(3, SIMPLE)
    sc = replace(sc, start=sc.goal)
    e = run_episode(sc, PolicyConfig(), cache)
    assert e.outcome == "stop-at-goal" and e.success
    assert e.path == [sc.goal] and e.path_length == 0.0


def test_replay_identical(cache):
    sc = gen_scene(1, COMPLEX)
    a = run_episode(sc, PolicyConfig(), cache)
    b = run_episode(sc, PolicyConfig(), PerceptionCache(PerceptionConfig()))
    assert a.path == b.path and a.outcome == b.outcome
    assert [s.p for s in a.steps] == [s.p for s in b.steps]
    check_path(sc, a)


def test_simple_scenes_full_uncertainty_succeed(cache):
    eps = [run_episode(gen_scene(s, SIMPLE), PolicyConfig(gamma=1.0), cache) for s in range(10)]
    for s, e in enumerate(eps):
        check_path(gen_scene(s, SIMPLE), e)
    assert sum(e.success for e in eps) == 10


def test_trace_records(cache):
    e = run_episode(gen_scene(0, SIMPLE), PolicyConfig(), cache)
    for rec in e.steps:
        d = rec.to_dict()
        assert set(d) == {"step", "node", "action", "choice", "candidates", "p", "region"}
        assert abs(sum(d["p"]) - 1) < 1e-9
        assert set(d["region"]) == {"mean_ug", "mean_us", "mean_ua", "count"}
