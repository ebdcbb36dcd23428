import pytest

from sinrlab.engine import (IDLE, LISTEN, WAKEUP, AsleepTransmitter, Payload, PayloadTooLarge,
                            RoundBudgetExceeded, SimClock, Simulator, Transmit, payload_cap, run)
from sinrlab.protocols import Context, tree_grower
from sinrlab.sinr import Station
from sinrlab.ssf import SsfFamily, singletons


def msg(sender, kind="data", bits=8):
    return Payload(kind, sender, f"m{sender}", bits)


def sim_of(points, params, n_labels=None):
    stations = [Station(i + 1, x, y) for i, (x, y) in enumerate(points)]
    return Simulator(stations, params, n_labels or max(2, len(stations)))


def test_single_transmitter_is_heard(unit_params):
    sim = sim_of([(0, 0), (0.5, 0)], unit_params)
    got = sim.step({1: Transmit(msg(1)), 2: LISTEN})
    assert got[2].sender == 1


def test_equidistant_transmitters_give_silence(unit_params):
    sim = sim_of([(-0.4, 0), (0.4, 0), (0, 0)], unit_params)
    assert sim.step({1: Transmit(msg(1)), 2: Transmit(msg(2)), 3: LISTEN}) == {}


def test_no_transmitters_no_deliveries(unit_params):
    sim = sim_of([(0, 0), (0.5, 0)], unit_params)
    assert sim.step({1: LISTEN, 2: IDLE}) == {}
    assert sim.trace.total_rounds == 1 and sim.trace.records == []


def test_transmitters_hear_nothing(unit_params):
    sim = sim_of([(0, 0), (0.3, 0)], unit_params)
    assert sim.step({1: Transmit(msg(1)), 2: Transmit(msg(2))}) == {}


@pytest.mark.parametrize("delta,n_labels,expected", [(1, 2, 64), (0, 4, 64 * 4), (3, 16, 3072)])
def test_payload_cap(delta, n_labels, expected):
    assert payload_cap(delta, n_labels) == expected


def test_oversized_payload_rejected(unit_params):
    sim = sim_of([(0, 0), (0.5, 0)], unit_params)
    with pytest.raises(PayloadTooLarge):
        sim.step({1: Transmit(msg(1, bits=sim.cap + 1)), 2: LISTEN})


def test_asleep_nodes_hear_only_wakeups(unit_params):
    sim = sim_of([(0, 0), (0.5, 0)], unit_params)
    sim.asleep = {2}
    assert sim.step({1: Transmit(msg(1))}) == {}
    assert sim.step({1: Transmit(msg(1, kind=WAKEUP))})[2].kind == WAKEUP
    with pytest.raises(AsleepTransmitter):
        sim.step({2: Transmit(msg(2))})


def test_execution_results_arrive_only_after_it_ends(unit_params):
    sim = sim_of([(0, 0), (0.5, 0), (0.9, 0)], unit_params)
    fam = SsfFamily(3, 3, singletons(3))
    heard = sim.execute(fam, {1: msg(1), 3: msg(3)}, [2])
    assert sim.trace.total_rounds == 3
    assert sorted(p.sender for _, p in heard[2]) == [1, 3]
    # Steps come from the schedule: label 1 in step 0, label 3 in step 2.
    assert [s for s, _ in heard[2]] == [0, 2]


def test_round_budget_enforced(unit_params):
    sim = sim_of([(0, 0), (0.5, 0)], unit_params)
    sim.max_rounds = 2
    sim.idle(2)
    with pytest.raises(RoundBudgetExceeded):
        sim.idle(1)


def test_replay_accounts_for_repeated_blocks(unit_params):
    sim = sim_of([(0, 0), (0.5, 0)], unit_params)
    fam = SsfFamily(2, 2, singletons(2))
    a = sim.mark()
    sim.execute(fam, {1: msg(1)}, [2])
    b = sim.mark()
    sim.replay(a, b, 3)
    assert sim.trace.total_rounds == 8
    assert sim.trace.messages_sent == 4
    assert [r.round for r in sim.trace.iter_rounds()] == [0, 2, 4, 6]
    assert "repeat" in sim.trace.export()


def test_tree_grower_trace_length_on_line(unit_params):
    stations = [Station(i + 1, float(i), 0.0) for i in range(4)]
    sim = Simulator(stations, unit_params, 8)
    fam = SsfFamily(8, 8, singletons(8))
    tree_grower(Context(sim, fam), sim.labels, 4)
    assert sim.trace.total_rounds == 4 * 4 * fam.length


def test_identical_runs_identical_traces(unit_params):
    def once():
        stations = [Station(i + 1, 0.6 * i, 0.1 * (i % 2)) for i in range(5)]
        trace, _ = run(lambda sim: tree_grower(Context(sim, SsfFamily(10, 10, singletons(10))), sim.labels, 5),
                       stations, unit_params, n_labels=10)
        return trace.export()
    assert once() == once()


def test_clock_coordinates():
    c = SimClock.at(phase=2, slot=3, offset=1, slot_count=4)
    assert (c.phase, c.slot, c.offset) == (2, 3, 1)
    assert c.round == 2 * 12 + 2 * 3 + 1
