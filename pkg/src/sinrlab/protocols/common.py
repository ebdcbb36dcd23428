"""Plumbing shared by the protocol state machines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..engine import FieldSizes, Payload, Simulator
from ..sinr import box_of, distance, pivotal_cell, transmission_range
from ..ssf import SsfFamily

LEADER = "leader"
FOLLOWER = "follower"
NEUTRAL = "neutral"
KIND_CODES = {LEADER: 0, FOLLOWER: 1, NEUTRAL: 2}

# Opaque broadcast content is modelled as a fixed-width blob.
MESSAGE_BITS = 32


class ProtocolError(RuntimeError):
    pass


class NoMainRound(ProtocolError):
    pass


class TokenLost(ProtocolError):
    pass


@dataclass
class Context:
    """A simulator plus the shared schedule every node executes."""

    sim: Simulator
    family: SsfFamily
    sizes: FieldSizes = None

    def __post_init__(self):
        if self.sizes is None:
            self.sizes = FieldSizes(self.sim.n_labels, self.family.length)

    @property
    def z(self) -> int:
        return self.family.length

    @property
    def r(self) -> float:
        return transmission_range(self.sim.params)

    @property
    def cell(self) -> float:
        return pivotal_cell(self.sim.params)

    def execute(self, intents: Mapping[int, Payload], listeners: Iterable[int]):
        return self.sim.execute(self.family, intents, listeners)

    def execute_stepwise(self, decide, listeners: Iterable[int]):
        return self.sim.execute_stepwise(self.family, decide, listeners)

    def idle_executions(self, count: int):
        self.sim.idle(count * self.family.length)

    def payload(self, kind: str, sender: int, body, bits: int) -> Payload:
        return Payload(kind, sender, body, bits)

    def dist(self, u: int, v: int) -> float:
        return distance(self.sim.by_label[u], self.sim.by_label[v])

    def box(self, u: int) -> tuple[int, int]:
        return box_of(self.sim.by_label[u], self.cell)


@dataclass
class Stars:
    """Output of star formation: kind, leader and children per node."""

    kind: dict[int, str]
    my_leader: dict[int, int]
    children: dict[int, frozenset]
    old_parent: dict[int, int] = field(default_factory=dict)

    @property
    def nodes(self) -> list[int]:
        return sorted(self.kind)

    @property
    def leaders(self) -> list[int]:
        return sorted(u for u, k in self.kind.items() if k == LEADER)

    def members(self, leader: int) -> list[int]:
        return sorted(self.children.get(leader, ()))

    def as_dict(self) -> dict:
        return {
            str(u): {"kind": self.kind[u], "my_leader": self.my_leader[u],
                     "children": sorted(self.children.get(u, ())),
                     "old_parent": self.old_parent.get(u, self.my_leader[u])}
            for u in self.nodes
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Stars":
        kind, leader, children, old = {}, {}, {}, {}
        for key, row in data.items():
            u = int(key)
            kind[u] = row["kind"]
            leader[u] = int(row["my_leader"])
            children[u] = frozenset(int(v) for v in row["children"])
            old[u] = int(row.get("old_parent", row["my_leader"]))
        return cls(kind, leader, children, old)


def heard_by_sender(heard: list[tuple[int, Payload]] | None) -> dict[int, Payload]:
    """First payload decoded from each sender during one execution."""
    out: dict[int, Payload] = {}
    for _, p in heard or ():
        out.setdefault(p.sender, p)
    return out
