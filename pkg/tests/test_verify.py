import networkx as nx
import pytest

from sinrlab.engine import RoundRecord, SimTrace
from sinrlab.protocols import FOLLOWER, LEADER, NEUTRAL, Stars
from sinrlab.sinr import Station, build_comm_graph
from sinrlab.ssf import SsfFamily, singletons
from sinrlab.verify import (OracleTooLarge, audit_rounds, audit_trace, audit_trace_text, check_dilution,
                            check_forest, check_stars, min_cds_oracle, parse_trace, round_budget)

from helpers import PARAMS, make_ctx, scenario_ctx


def single():
    st = [Station(1, 0, 0)]
    return st, build_comm_graph(st, PARAMS)


def test_single_node_forest_and_star_pass():
    st, g = single()
    state = Stars({1: LEADER}, {1: 1}, {1: frozenset()})
    assert check_forest(state, g, st, PARAMS)
    assert check_stars(state, g, st, PARAMS)


def test_two_leaders_in_one_box_fail_with_box_witness():
    st = [Station(1, 0.1, 0.1), Station(2, 0.2, 0.2)]
    g = build_comm_graph(st, PARAMS)
    state = Stars({1: LEADER, 2: LEADER}, {1: 1, 2: 2}, {})
    rep = check_forest(state, g, st, PARAMS)
    assert not rep and rep.witness[0] == "box with several leaders"


def test_depth_two_tree_is_not_a_star():
    st = [Station(1, 0, 0), Station(2, 0.9, 0), Station(3, 1.8, 0)]
    g = build_comm_graph(st, PARAMS)
    chain = Stars({1: LEADER, 2: NEUTRAL, 3: NEUTRAL}, {1: 1, 2: 1, 3: 2},
                  {1: frozenset({2}), 2: frozenset({3})})
    assert check_forest(chain, g, st, PARAMS)
    assert not check_stars(chain, g, st, PARAMS)
    follower_parent = Stars({1: LEADER, 2: FOLLOWER, 3: FOLLOWER}, {1: 1, 2: 1, 3: 2},
                            {1: frozenset({2}), 2: frozenset({3})})
    assert not check_stars(follower_parent, g, st, PARAMS)


def test_stars_dict_form_is_accepted():
    st, g = single()
    assert check_stars(Stars({1: LEADER}, {1: 1}, {1: frozenset()}).as_dict(), g, st, PARAMS)


@pytest.mark.parametrize("graph,expected", [(nx.path_graph(3), 1), (nx.path_graph(5), 3),
                                            (nx.complete_graph(4), 1), (nx.cycle_graph(6), 4)])
def test_min_cds_by_exhaustive_search(graph, expected):
    assert min_cds_oracle(graph) == expected


def test_min_cds_refuses_large_graphs():
    with pytest.raises(OracleTooLarge):
        min_cds_oracle(nx.path_graph(13))


def test_round_budgets():
    assert round_budget("tree-grower", 4, 8, 8) == 4 * 4 * 8
    assert round_budget("bb-transmit", 5, 10, 10, delta=3) == 2 * 3 * 2 * 10
    # z = 12, N = 16: c1 = 3, L = 4
    assert round_budget("multi-broadcast", 6, 16, 12) == 976 * 6 * 12
    assert audit_rounds(5, "tree-grower", 1, 2, 2, exact=False)
    assert not audit_rounds(5, "tree-grower", 1, 2, 2, exact=True)
    assert audit_rounds(8, "tree-grower", 1, 2, 2, exact=True)
    assert not audit_rounds(9, "tree-grower", 1, 2, 2)


def trace_of(*records):
    t = SimTrace(list(records))
    return t


def test_trace_audit_flags_each_violation():
    ok = RoundRecord(0, ((1, "x", 8),), ((2, 1, "x", 8),))
    assert audit_trace(trace_of(ok), cap=64)
    double = RoundRecord(0, ((1, "x", 8), (3, "x", 8)), ((2, 1, "x", 8), (2, 3, "x", 8)))
    assert audit_trace(trace_of(double), 64).witness[0] == "several deliveries"
    ghost = RoundRecord(0, ((1, "x", 8),), ((2, 5, "x", 8),))
    assert audit_trace(trace_of(ghost), 64).witness[0] == "delivery without matching transmission"
    deaf = RoundRecord(0, ((1, "x", 8), (2, "x", 8)), ((2, 1, "x", 8),))
    assert audit_trace(trace_of(deaf), 64).witness[0] == "transmitter decoded"
    assert audit_trace(trace_of(ok), 4).witness[0] == "payload above cap"
    late = RoundRecord(5, ((1, "x", 8),), ())
    assert audit_trace(trace_of(late), 64, wake_round={1: 9}).witness[0] == "asleep transmitter"


def test_trace_text_round_trip():
    sc, ctx = scenario_ctx(n=6, seed=1)
    from sinrlab.protocols import tree_grower
    tree_grower(ctx, ctx.sim.labels, 6)
    text = ctx.sim.trace.export()
    rebuilt = SimTrace(parse_trace(text))
    assert rebuilt.export() == text
    assert audit_trace_text(text, ctx.sim.cap)


def test_dilution_check_catches_a_collision():
    st = [Station(1, -0.4, 0), Station(2, 0.4, 0), Station(3, 0, 0)]
    together = SsfFamily(3, 1, (frozenset({1, 2, 3}),))
    assert not check_dilution(st, PARAMS, together)
    assert check_dilution(st, PARAMS, SsfFamily(3, 3, singletons(3)))
