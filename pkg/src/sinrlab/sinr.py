"""SINR physics, grid geometry and the weak-links communication graph."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

# Relative slack applied to every reception inequality so that a station placed
# exactly at the range boundary is still heard despite rounding.
REL_TOL = 1e-9
DIST_ATOL = 1e-12


class SinrError(ValueError):
    pass


class InvalidParams(SinrError):
    pass


class ZeroDistance(SinrError):
    pass


class ListenerTransmitting(SinrError):
    pass


class InvalidCell(SinrError):
    pass


class CellMismatch(SinrError):
    pass


@dataclass(frozen=True)
class SinrParams:
    alpha: float = 3.0
    beta: float = 1.0
    noise: float = 0.5
    epsilon: float = 1.0
    power: float = 1.0

    def __post_init__(self):
        if not self.alpha > 2:
            raise InvalidParams(f"alpha must exceed 2, got {self.alpha}")
        if not self.beta >= 1:
            raise InvalidParams(f"beta must be at least 1, got {self.beta}")
        if not self.epsilon > 0:
            raise InvalidParams(f"epsilon must be positive, got {self.epsilon}")
        if not self.power > 0:
            raise InvalidParams(f"power must be positive, got {self.power}")
        if not self.noise > 0:
            raise InvalidParams(f"noise must be positive, got {self.noise}")

    @classmethod
    def raw(cls, alpha: float, beta: float, noise: float, epsilon: float, power: float) -> "SinrParams":
        """Build parameters without validation (used to evaluate degenerate ratios)."""
        obj = object.__new__(cls)
        for name, value in (("alpha", alpha), ("beta", beta), ("noise", noise),
                            ("epsilon", epsilon), ("power", power)):
            object.__setattr__(obj, name, float(value))
        return obj

    @classmethod
    def with_unit_range(cls, alpha: float = 3.0, beta: float = 1.0,
                        epsilon: float = 1.0, power: float = 1.0) -> "SinrParams":
        """Pick the noise level that makes the transmission range exactly 1."""
        return cls(alpha=alpha, beta=beta, noise=power / ((1 + epsilon) * beta),
                   epsilon=epsilon, power=power)

    @property
    def range(self) -> float:
        return transmission_range(self)

    @property
    def sensitivity_floor(self) -> float:
        return (1 + self.epsilon) * self.beta * self.noise


@dataclass(frozen=True)
class Station:
    label: int
    x: float
    y: float
    awake: bool = True

    @property
    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class GridBox:
    a: int
    b: int
    cell: float


@dataclass
class CommGraph:
    graph: nx.Graph
    diameter: int
    max_degree: int
    connected: bool

    @property
    def nodes(self) -> list[int]:
        return sorted(self.graph.nodes)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(e)) for e in self.graph.edges)

    def neighbors(self, label: int) -> list[int]:
        return sorted(self.graph.neighbors(label))


def distance(p: Station, q: Station) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def received_power(d: float, params: SinrParams) -> float:
    if d <= DIST_ATOL:
        raise ZeroDistance("stations share a position")
    return params.power / d ** params.alpha


def _signal_and_interference(sender, listener, transmitters, params):
    if any(t.label == listener.label for t in transmitters):
        raise ListenerTransmitting(f"listener {listener.label} is transmitting")
    if listener.label == sender.label:
        raise ListenerTransmitting("listener and sender coincide")
    signal = received_power(distance(sender, listener), params)
    interference = 0.0
    for t in transmitters:
        if t.label == sender.label:
            continue
        interference += received_power(distance(t, listener), params)
    return signal, interference


def sinr_ratio(sender: Station, listener: Station, transmitters: Iterable[Station],
               params: SinrParams) -> float:
    signal, interference = _signal_and_interference(sender, listener, list(transmitters), params)
    denom = params.noise + interference
    if denom == 0:
        return math.inf
    return signal / denom


def receives(sender: Station, listener: Station, transmitters: Iterable[Station],
             params: SinrParams) -> bool:
    signal, interference = _signal_and_interference(sender, listener, list(transmitters), params)
    boosted = signal * (1 + REL_TOL)
    return (boosted >= params.beta * (params.noise + interference)
            and boosted >= params.sensitivity_floor)


def transmission_range(params: SinrParams) -> float:
    if not params.noise > 0:
        raise InvalidParams("range is unbounded without noise")
    return (params.power / params.sensitivity_floor) ** (1.0 / params.alpha)


def pivotal_cell(params: SinrParams) -> float:
    return transmission_range(params) / math.sqrt(2)


def grid_coord(pos: Sequence[float], cell: float) -> GridBox:
    if not cell > 0:
        raise InvalidCell(f"cell side must be positive, got {cell}")
    return GridBox(math.floor(pos[0] / cell), math.floor(pos[1] / cell), cell)


def box_distance(p: GridBox, q: GridBox) -> int:
    if p.cell != q.cell:
        raise CellMismatch(f"cells differ: {p.cell} vs {q.cell}")
    if p.a == q.a and p.b == q.b:
        return 0
    da = min(abs(p.a - q.a - 1), abs(q.a - p.a - 1))
    db = min(abs(p.b - q.b - 1), abs(q.b - p.b - 1))
    return max(da, db)


def box_gap(da: int, db: int, cell: float) -> float:
    """Smallest Euclidean distance between two grid boxes offset by (da, db)."""
    gx = max(abs(da) - 1, 0) * cell
    gy = max(abs(db) - 1, 0) * cell
    return math.hypot(gx, gy)


def boxes_within(reach: float, cell: float) -> list[tuple[int, int]]:
    """Offsets of every box holding a point within `reach` of some point of the origin box.

    The boundary is treated as inclusive, matching reception at exactly r.
    """
    span = int(math.ceil(reach / cell)) + 1
    out = []
    for da in range(-span, span + 1):
        for db in range(-span, span + 1):
            if box_gap(da, db, cell) < reach * (1 - REL_TOL):
                out.append((da, db))
    return out


def box_of(station: Station, cell: float) -> tuple[int, int]:
    g = grid_coord(station.pos, cell)
    return (g.a, g.b)


def build_comm_graph(stations: Sequence[Station], params: SinrParams) -> CommGraph:
    r = transmission_range(params)
    g = nx.Graph()
    g.add_nodes_from(s.label for s in stations)
    for i, s in enumerate(stations):
        for t in stations[i + 1:]:
            if distance(s, t) <= r * (1 + REL_TOL):
                g.add_edge(s.label, t.label)
    connected = len(stations) <= 1 or nx.is_connected(g)
    diameter = nx.diameter(g) if connected and len(stations) > 1 else 0
    max_degree = max((d for _, d in g.degree), default=0)
    return CommGraph(g, diameter, max_degree, connected)


def gain_matrix(stations: Sequence[Station], params: SinrParams) -> np.ndarray:
    """Received power from station i at station j; the diagonal is zero."""
    xy = np.array([[s.x, s.y] for s in stations], dtype=float).reshape(-1, 2)
    diff = xy[:, None, :] - xy[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=2))
    off = ~np.eye(len(stations), dtype=bool)
    if np.any(d[off] <= DIST_ATOL):
        raise ZeroDistance("two stations share a position")
    gains = np.zeros_like(d)
    gains[off] = params.power / d[off] ** params.alpha
    return gains
