from sinrlab.engine import Simulator
from sinrlab.harness import generate
from sinrlab.protocols import Context
from sinrlab.sinr import SinrParams, Station
from sinrlab.ssf import DilutionConfig, protocol_family

PARAMS = SinrParams.with_unit_range()


def make_ctx(placed, n_labels=None, asleep=()):
    """`placed` is a list of (label, x, y)."""
    stations = [Station(u, x, y) for u, x, y in placed]
    n_labels = n_labels or max(2, 2 * len(stations), max(u for u, _, _ in placed))
    sim = Simulator(stations, PARAMS, n_labels)
    sim.asleep = set(asleep)
    return Context(sim, protocol_family(n_labels, DilutionConfig()))


def scenario_ctx(kind="random_geometric", n=8, seed=0, **kw):
    sc = generate(kind, PARAMS, seed=seed, n=n, **kw)
    sim = Simulator(sc.stations, sc.params, sc.n_labels)
    return sc, Context(sim, protocol_family(sc.n_labels, sc.dilution))
