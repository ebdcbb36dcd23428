import pytest

from sinrlab.protocols import (FOLLOWER, LEADER, NEUTRAL, Stars, adjacent_backbone_pairs, backbone_creation,
                               bb_message_exchange, bb_message_transmit, check_epoch_alignment,
                               check_status_monotone, choose_star_links, exchange_audit, multi_broadcast,
                               potential_leader_election, token_passing_transfer, tree_cutter,
                               tree_cutter_phases, tree_grower, wakeup)
from sinrlab.protocols.backbone import Backbone
from sinrlab.protocols.tree_cutter import _Node
from sinrlab.protocols.wakeup import DONE, EpochTiming
from sinrlab.verify import check_backbone, check_forest, check_stars

from helpers import PARAMS, make_ctx, scenario_ctx


def stars_of(ctx, n):
    forest = tree_grower(ctx, ctx.sim.labels, n)
    stars, stats = tree_cutter(ctx, forest, n)
    return stars, stats


# ---------------------------------------------------------------- tree grower
def test_lone_node_is_a_leader_without_children():
    ctx = make_ctx([(5, 0, 0)])
    f = tree_grower(ctx, [5], 1)
    assert f.kind[5] == LEADER and not f.children.get(5)


def test_box_mates_smaller_label_becomes_parent():
    ctx = make_ctx([(3, 0.1, 0.1), (7, 0.3, 0.2)], n_labels=8)
    f = tree_grower(ctx, [3, 7], 2)
    assert f.kind[3] == LEADER and f.my_leader[7] == 3 and 7 in f.children[3]


@pytest.mark.parametrize("seed", range(4))
def test_forest_checker_passes_on_random_nodes(seed):
    sc, ctx = scenario_ctx(n=5, seed=seed)
    f = tree_grower(ctx, ctx.sim.labels, 5)
    assert check_forest(f, ctx.sim.graph, sc.stations, PARAMS)
    assert ctx.sim.trace.total_rounds == 4 * 5 * ctx.z


# --------------------------------------------------- potential leader election
def neutral(u):
    return _Node(NEUTRAL, u, u, set())


def test_lone_candidate_becomes_leader():
    ctx = make_ctx([(2, 0.1, 0.1)])
    nodes = {2: neutral(2)}
    potential_leader_election(ctx, nodes, [2])
    assert nodes[2].kind == LEADER


def test_two_candidates_in_a_box_elect_one():
    ctx = make_ctx([(2, 0.1, 0.1), (4, 0.3, 0.3)], n_labels=4)
    nodes = {2: neutral(2), 4: neutral(4)}
    potential_leader_election(ctx, nodes, [2, 4])
    kinds = sorted(n.kind for n in nodes.values())
    assert kinds == [FOLLOWER, LEADER]
    # The first main round in schedule order wins; with singletons that is label 2.
    assert nodes[2].kind == LEADER and nodes[4].my_leader == 2


def test_no_candidates_changes_nothing():
    ctx = make_ctx([(2, 0.1, 0.1)])
    nodes = {2: neutral(2)}
    potential_leader_election(ctx, nodes, [])
    assert nodes[2].kind == NEUTRAL
    assert ctx.sim.trace.total_rounds == 3 * ctx.z


# ----------------------------------------------------------------- tree cutter
def test_single_leader_stays_a_star_of_one():
    ctx = make_ctx([(1, 0, 0)])
    stars, stats = stars_of(ctx, 1)
    assert stars.leaders == [1] and stars.members(1) == []
    assert stats.phases == tree_cutter_phases(1)


def test_chain_of_depth_two_becomes_stars():
    ctx = make_ctx([(1, 0, 0), (2, 0.9, 0), (3, 1.8, 0)], n_labels=6)
    forest = tree_grower(ctx, [1, 2, 3], 3)
    assert forest.children[1] == {2} and forest.children[2] == {3}
    stars, _ = tree_cutter(ctx, forest, 3)
    assert check_stars(stars, ctx.sim.graph, ctx.sim.stations, PARAMS)


def test_leaders_three_hops_apart_both_survive():
    ctx = make_ctx([(1, 0, 0), (2, 0.95, 0), (3, 1.9, 0), (4, 2.85, 0)], n_labels=8)
    stars, _ = stars_of(ctx, 4)
    assert len(stars.leaders) == 2
    assert check_stars(stars, ctx.sim.graph, ctx.sim.stations, PARAMS)


def test_phase_count_formula():
    assert tree_cutter_phases(4) == 2 * 947 * 5 - 1


# --------------------------------------------------------- token passing
def test_wakeup_mode_wakes_sleeper_in_range():
    ctx = make_ctx([(1, 0, 0), (2, 0.4, 0), (3, 1.2, 0)], asleep={3})
    forest = tree_grower(ctx, [1, 2], 2)
    stars, _ = tree_cutter(ctx, forest, 2)
    res = token_passing_transfer(ctx, stars, "wakeup", 3, participants=[1, 2])
    assert 3 in res.woken


def test_exchange_between_two_stars_spreads_one_message():
    placed = [(1, 0, 0), (2, 0.3, 0), (3, 1.2, 0), (4, 1.5, 0)]
    ctx = make_ctx(placed, n_labels=8)
    stars = Stars({1: LEADER, 2: FOLLOWER, 3: FOLLOWER, 4: LEADER}, {1: 1, 2: 1, 3: 4, 4: 4},
                  {1: frozenset({2}), 2: frozenset(), 3: frozenset(), 4: frozenset({3})})
    res = token_passing_transfer(ctx, stars, "exchange", 4, messages={1: "hello"})
    assert all(res.held[u] == {1: "hello"} for u in (1, 2, 3, 4))
    assert all(1 in res.sent[u] for u in (1, 2, 3, 4))
    assert exchange_audit(res) == []


def test_single_node_single_transmit_hears_nothing():
    ctx = make_ctx([(1, 0, 0)])
    stars = Stars({1: LEADER}, {1: 1}, {1: frozenset()})
    res = token_passing_transfer(ctx, stars, "single_transmit", 1, messages={1: "x"})
    assert res.sent[1] and not res.heard.get(1)


# ---------------------------------------------------------------- wakeup
def test_two_nodes_one_awake():
    ctx = make_ctx([(1, 0, 0), (2, 0.5, 0)], n_labels=4)
    res = wakeup(ctx, 2, [1])
    assert res.all_awake and res.last_wake_phase < res.timing.phase_budget
    assert not check_status_monotone(res) and not check_epoch_alignment(res)


def test_all_awake_reach_done_in_smallest_sufficient_slot():
    sc, ctx = scenario_ctx(n=5, seed=1, all_awake=True)
    res = wakeup(ctx, 5, sc.labels)
    slot = next(s for s in range(1, 10) if 2 ** s >= 5)
    status = res.final_status()
    assert all(status[(u, slot)] == DONE for u in sc.labels)


def test_single_node_is_complete_at_phase_zero():
    ctx = make_ctx([(1, 0, 0)])
    res = wakeup(ctx, 1, [1])
    assert res.all_awake and res.last_wake_phase == 0


def test_epoch_timing_formula():
    t = EpochTiming(4, 8, 8)
    assert t.slot_count == 3
    assert t.unit == t.c1 * 3 >= 8
    assert t.epoch_length(1) == 2 * 10450 * t.unit + 9465 * t.unit
    assert t.phase_budget == 4 * 4 * t.epoch_length(1)


@pytest.mark.parametrize("kind,n", [("line", 5), ("snowball", 7), ("random_geometric", 8)])
def test_wakeup_spreads_from_one_node(kind, n):
    sc, ctx = scenario_ctx(kind, n=n, seed=2)
    res = wakeup(ctx, len(sc.stations), sc.awake)
    assert res.all_awake


# ---------------------------------------------------------- multi-broadcast
def test_one_message_on_a_line():
    ctx = make_ctx([(i + 1, 0.9 * i, 0) for i in range(4)], n_labels=8)
    res = multi_broadcast(ctx, 4, {1: "m"})
    assert all(h == {1: "m"} for h in res.held.values())


def test_everyone_gets_everything_on_random_nodes():
    sc, ctx = scenario_ctx(n=6, seed=4)
    msgs = {u: f"m{u}" for u in sc.labels}
    res = multi_broadcast(ctx, 6, msgs)
    assert all(h == msgs for h in res.held.values())


def test_single_node_broadcast():
    ctx = make_ctx([(1, 0, 0)])
    res = multi_broadcast(ctx, 1, {1: "m"})
    assert res.held == {1: {1: "m"}}
    assert ctx.sim.trace.deliveries == 0


def test_star_links_pick_one_canonical_crossing_per_foreign_leader():
    stars = Stars({1: LEADER, 2: FOLLOWER, 3: FOLLOWER, 9: LEADER, 8: FOLLOWER},
                  {1: 1, 2: 1, 3: 1, 9: 9, 8: 9},
                  {1: frozenset({2, 3}), 9: frozenset({8})})
    reports = {2: {8: 9}, 3: {8: 9, 9: 9}, 1: {}}
    links, crossings = choose_star_links(stars, reports)
    assert crossings[(1, 9)] == (2, 8)
    assert links[1] == [2]


# ---------------------------------------------------------------- backbone
def test_single_node_backbone():
    ctx = make_ctx([(1, 0, 0)])
    bb = backbone_creation(ctx, 1)
    assert bb.members == {1}
    assert check_backbone(bb, ctx.sim.graph)


def test_shared_follower_becomes_connector():
    # Leaders 1 and 3 are two hops apart; 2 hears both and attaches to 1.
    ctx = make_ctx([(1, 0, 0), (2, 0.9, 0), (3, 1.8, 0)], n_labels=6)
    bb = backbone_creation(ctx, 3)
    assert set(bb.stars.leaders) == {1, 3}
    assert bb.members == {1, 2, 3}
    rep = check_backbone(bb, ctx.sim.graph)
    assert rep and rep.measured["size"] == 3


@pytest.mark.parametrize("seed", range(3))
def test_backbone_on_eight_random_nodes(seed):
    sc, ctx = scenario_ctx(n=8, seed=seed)
    bb = backbone_creation(ctx, 8)
    rep = check_backbone(bb, ctx.sim.graph, oracle=True)
    assert rep, rep.witness


def test_exchange_with_one_connector():
    ctx = make_ctx([(1, 0, 0), (2, 0.9, 0), (3, 1.8, 0)], n_labels=6)
    bb = backbone_creation(ctx, 3)
    res = bb_message_exchange(ctx, bb, {1: "a", 2: "b"})
    assert {1, 2} <= set(res.inbox[1]) and {1, 2} <= set(res.inbox[2])


def test_exchange_without_connectors_delivers_nothing():
    ctx = make_ctx([(1, 0, 0), (2, 0.3, 0)], n_labels=4)
    stars = Stars({1: LEADER, 2: FOLLOWER}, {1: 1, 2: 1}, {1: frozenset({2})})
    bb = Backbone(stars, frozenset({1}), {1: frozenset()}, {1: []})
    res = bb_message_exchange(ctx, bb, {1: "a"})
    assert res.inbox == {1: {1: "a"}} and res.heard_from == {1: set()}


def test_relay_over_three_backbone_hops_within_three_cycles():
    ctx = make_ctx([(1, 0, 0), (2, 0.9, 0), (3, 1.8, 0), (4, 2.7, 0)], n_labels=8)
    bb = backbone_creation(ctx, 4)
    ends = sorted(bb.members)
    far_a, far_b = ends[0], ends[-1]
    res = bb_message_exchange(ctx, bb, {far_a: "hi"}, cycles=3)
    assert far_a in res.inbox[far_b]
    assert adjacent_backbone_pairs(bb)


def test_transmit_single_message_reaches_leader():
    placed = [(1, 0, 0), (2, 0.3, 0), (3, 0, 0.3), (4, -0.3, 0)]
    ctx = make_ctx(placed, n_labels=8)
    stars, _ = stars_of(ctx, 4)
    assert stars.leaders == [1] and stars.members(1) == [2, 3, 4]
    res = bb_message_transmit(ctx, stars, {3: "x"})
    assert res.leader_inbox[1] == {3: "x"}
    assert res.cycle_rounds <= 2 * 3 * 2 * ctx.z


def test_transmit_collects_every_follower():
    placed = [(1, 0, 0), (2, 0.3, 0), (3, 0, 0.3), (4, -0.3, 0)]
    ctx = make_ctx(placed, n_labels=8)
    stars, _ = stars_of(ctx, 4)
    res = bb_message_transmit(ctx, stars, {u: f"m{u}" for u in (2, 3, 4)})
    assert set(res.leader_inbox[1]) == {2, 3, 4}
