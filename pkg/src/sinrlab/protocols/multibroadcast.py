"""Multi-message broadcast over stars: gather at leaders, then flood across star links."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .common import LEADER, Context, Stars
from .tpt import token_passing_transfer
from .tree_cutter import tree_cutter
from .tree_grower import tree_grower

BROADCAST_CONSTANT = 976


def broadcast_budget(n_bound: int, unit: int) -> int:
    """976 * n * c1 * ceil(log2 N) rounds, `unit` being c1 * ceil(log2 N)."""
    return BROADCAST_CONSTANT * n_bound * unit


@dataclass
class MultiBroadcastResult:
    stars: Stars
    held: dict
    star_links: dict  # leader -> children chosen to carry the flood
    crossings: dict = field(default_factory=dict)  # (leader, foreign leader) -> (own node, their node)
    flood_rounds: int = 0
    flood_complete_after: int | None = None
    total_rounds: int = 0

    @property
    def max_star_links(self) -> int:
        return max((len(c) for c in self.star_links.values()), default=0)


def choose_star_links(stars: Stars, reports: Mapping[int, Mapping[int, int]]):
    """Pick, for every foreign leader a star touches, one canonical crossing edge.

    `reports[u]` maps each neighbour v that u heard to v's leader. Both stars see
    the same set of crossing edges and pick the one with the smallest
    (min endpoint, max endpoint), so the two ends of every chosen link agree.
    """
    edges: dict[tuple[int, int], tuple[int, int]] = {}
    for u, heard in reports.items():
        own = stars.my_leader[u]
        for v, their in heard.items():
            if their == own:
                continue
            edge = (min(u, v), max(u, v))
            key = (own, their)
            if key not in edges or edge < edges[key][2:]:
                edges[key] = (u, v) + edge
    links = {leader: set() for leader in stars.leaders}
    crossings = {}
    for (own, their), (u, v, *_) in sorted(edges.items()):
        crossings[(own, their)] = (u, v)
        if stars.kind[u] != LEADER:
            links[own].add(u)
    return {k: sorted(v) for k, v in links.items()}, crossings


def multi_broadcast(ctx: Context, n_bound: int, messages: Mapping[int, object],
                    participants=None, fast_forward: bool = True) -> MultiBroadcastResult:
    sim = ctx.sim
    sz = ctx.sizes
    start = sim.trace.total_rounds
    nodes = sorted(participants if participants is not None else sim.labels)
    forest = tree_grower(ctx, nodes, n_bound)
    stars, _ = tree_cutter(ctx, forest, n_bound, fast_forward=fast_forward)

    # (i) every node announces its leader.
    announce = token_passing_transfer(
        ctx, stars, "single_transmit", n_bound,
        messages={u: stars.my_leader[u] for u in nodes},
        message_bits=lambda body: sz.label, fast_forward=fast_forward)
    reports = {u: dict(announce.heard.get(u, {})) for u in nodes}

    # (ii) followers report the foreign (neighbour, leader) pairs they heard.
    foreign = {u: tuple(sorted((v, lv) for v, lv in reports[u].items() if lv != stars.my_leader[u]))
               for u in nodes}
    relayed = token_passing_transfer(
        ctx, stars, "single_transmit", n_bound, messages=foreign,
        message_bits=lambda body: 2 * sz.label * len(body), fast_forward=fast_forward)
    # A leader only uses pairs reported by its own followers plus what it heard itself.
    known: dict[int, dict[int, int]] = {}
    for leader in stars.leaders:
        mine = {leader: {v: lv for v, lv in foreign[leader]}}
        for f, body in relayed.heard.get(leader, {}).items():
            if stars.my_leader.get(f) == leader and f != leader:
                mine[f] = dict(body)
        known.update(mine)
    links, crossings = choose_star_links(stars, known)

    # (iii) members hand their own messages to the leaders (and anyone in range).
    own = {u: messages[u] for u in nodes if u in messages}
    collected = token_passing_transfer(ctx, stars, "single_transmit", n_bound, messages=own,
                                       fast_forward=fast_forward)
    seeded = {}
    for u in nodes:
        held = dict(collected.heard.get(u, {}))
        if u in own:
            held[u] = own[u]
        seeded[u] = held

    # (iv) exchange-mode flood over the chosen links; other followers just listen.
    flood = token_passing_transfer(ctx, stars, "exchange", n_bound, routes=links,
                                   initial_held=seeded, fast_forward=fast_forward)
    return MultiBroadcastResult(stars, flood.held, links, crossings, flood.rounds,
                                flood.complete_after, sim.trace.total_rounds - start)
